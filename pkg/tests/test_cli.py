import json

import pytest

from hsps.cli import run
from hsps.config import config_to_dict, make_symmetric_config
from hsps import pipeline as pl


@pytest.fixture
def config_path(tmp_path):
    config = make_symmetric_config(
        1.0, 1.0, 0.02, det_efficiencies=(0.5, 0.8, 0.8)
    )
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config_to_dict(config)))
    return str(path)


class TestReport:
    def test_happy_path_stdout(self, config_path, capsys):
        assert run(["report", "--config", config_path]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["heralding_eff"] == pytest.approx(0.5)
        assert doc["car"] == pytest.approx(1 + 1 / (doc["p_pair"] * 4), rel=1e-9)

    def test_writes_file_and_manifest(self, config_path, tmp_path):
        out = tmp_path / "report.json"
        assert run(["report", "--config", config_path, "--out", str(out), "--seed", "5"]) == 0
        assert json.loads(out.read_text())["p1"] > 0
        manifest = json.loads((tmp_path / "report.json.manifest.json").read_text())
        assert manifest["subcommand"] == "report"
        assert manifest["seed"] == 5
        assert manifest["tool_version"]

    def test_unreadable_config_exits_1(self, tmp_path, capsys):
        assert run(["report", "--config", str(tmp_path / "nope.json")]) == 1
        assert "error" in capsys.readouterr().err

    def test_model_validity_exits_2(self, tmp_path, capsys):
        config = make_symmetric_config(8.0, 8.0, 0.03)
        path = tmp_path / "hot.json"
        path.write_text(json.dumps(config_to_dict(config)))
        assert run(["report", "--config", str(path)]) == 2
        assert "model validity" in capsys.readouterr().err

    def test_unknown_flag_exits_nonzero(self, config_path, capsys):
        assert run(["report", "--config", config_path, "--frobnicate"]) != 0


class TestSweep:
    def test_fixture_cell(self, tmp_path):
        out = tmp_path / "fig.csv"
        code = run(["sweep", "--p-pair", "0.02", "--grid", "0.5:1.5:0.25",
                    "--out", str(out)])
        assert code == 0
        rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
        cell = next(r for r in rows if r[0] == "1" and r[1] == "1")
        assert float(cell[3]) == pytest.approx(0.2591435, abs=1e-4)
        meta = json.loads((tmp_path / "fig.csv.meta.json").read_text())
        assert meta["p_pair"] == 0.02

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(["sweep", "--p-pair", "0.01", "--grid", "0.3:2.0:0.1", "--out", str(a)])
        run(["sweep", "--p-pair", "0.01", "--grid", "0.3:2.0:0.1", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_bad_grid_spec(self, tmp_path, capsys):
        assert run(["sweep", "--p-pair", "0.01", "--grid", "oops",
                    "--out", str(tmp_path / "x.csv")]) == 1


class TestOracle:
    def test_comparison_csv(self, config_path, tmp_path):
        out = tmp_path / "cmp.csv"
        assert run(["oracle", "--config", config_path, "--no-gaussian",
                    "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("sigma_s_prime,")
        assert all(float(line.rsplit(",", 1)[1]) < 1e-6 for line in lines[1:])


class TestModes:
    def test_report_and_sweep(self, config_path, tmp_path, capsys):
        sweep_out = tmp_path / "strategy.csv"
        assert run(["modes", "--config", config_path, "--p-pair", "0.005",
                    "--sweep-out", str(sweep_out)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["schmidt_number"] > 1.0
        assert doc["strategy_sweep"]["better_h_strategy"] == "narrow_idler"
        assert sweep_out.exists()


class TestMc:
    def test_deterministic_output_bytes(self, config_path, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        base = ["mc", "--config", config_path, "--pulses", "200000", "--seed", "7"]
        assert run(base + ["--out", str(a)]) == 0
        assert run(base + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_worker_count_does_not_change_tallies(self, config_path, tmp_path):
        a, b = tmp_path / "w1.json", tmp_path / "w4.json"
        base = ["mc", "--config", config_path, "--pulses", "200000", "--seed", "3"]
        run(base + ["--workers", "1", "--out", str(a)])
        run(base + ["--workers", "4", "--out", str(b)])
        assert json.loads(a.read_text())["tallies"] == json.loads(b.read_text())["tallies"]

    def test_raman_flag(self, config_path, tmp_path):
        out = tmp_path / "mc.json"
        assert run(["mc", "--config", config_path, "--pulses", "200000", "--seed", "1",
                    "--raman", "0.05,0.08", "--p-ave", "1.1", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["predictions"]["h"] < 0.5  # Raman dilutes the herald

    def test_bad_raman_spec(self, config_path, tmp_path):
        assert run(["mc", "--config", config_path, "--pulses", "1000",
                    "--raman", "nope", "--out", str(tmp_path / "x.json")]) == 1


class TestFitAndCorrect:
    @pytest.fixture
    def data_path(self, tmp_path, config_path):
        config = make_symmetric_config(1.0, 1.0, 0.02, det_efficiencies=(0.5, 0.8, 0.8))
        records = pl.synthesize_power_sweep(
            config, 0.05, 0.08, [0.5, 0.75, 1.0, 1.25], 400_000, seed=13
        )
        path = tmp_path / "records.csv"
        pl.write_power_records(path, records)
        return str(path)

    def test_fit(self, data_path, capsys):
        assert run(["fit", "--data", data_path]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["n_records"] == 4
        # detected coefficients are the photon-level ones times the herald
        # path efficiency 0.5
        assert doc["s1"] == pytest.approx(0.025, abs=0.01)

    def test_correct_end_to_end(self, data_path, config_path, tmp_path):
        out = tmp_path / "corrected.csv"
        assert run(["correct", "--data", data_path, "--config", config_path,
                    "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("p_ave_mw,")
        assert len(lines) == 5
        assert (tmp_path / "corrected.csv.manifest.json").exists()

    def test_missing_data_file(self, config_path, tmp_path):
        assert run(["fit", "--data", str(tmp_path / "none.csv")]) == 1
