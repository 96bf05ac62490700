"""Experimental data-reduction chain and parameter sweeps.

Count records taken as a function of average pump power are fitted with the
two-origin model

    N_i(P) = s1 * P + s2 * P^2        (counts per gated pulse, P in mW)

whose linear part is spontaneous Raman background and whose quadratic part
is the pair process.  The Raman part is then subtracted from the herald
singles and from every accidental-bearing quantity, giving corrected CAR,
heralded g2 and heralding efficiency that can be compared against the
closed forms.  See docs/raman_correction.md for the subtraction algebra;
the correction adjusts two-fold coincidences and triples as well as
singles, which is recorded in the output metadata.

CSV schema for power records (header mandatory, comma separated, UTF-8):

    p_ave_mw, gates, s1_counts, s2_counts, s3_counts,
    c12, c13, c23, acc12, acc13, t123
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np

from . import __version__ as _version
from .config import ConfigWarning, SourceConfig, normalize
from .montecarlo import (
    EstimatorResult,
    TallyCounters,
    build_pulse_model,
    simulate,
)
from .stats import (
    car as car_closed_form,
    collection_efficiency,
    heralded_g2_approx,
    unconditional_g2,
)


class PipelineError(ValueError):
    """Malformed input data or an ill-posed reduction step."""


class CorrectionRegimeError(RuntimeError):
    """Raman subtraction left nonpositive counts: the fit does not describe
    these records."""


RECORD_COLUMNS = (
    "p_ave_mw", "gates", "s1_counts", "s2_counts", "s3_counts",
    "c12", "c13", "c23", "acc12", "acc13", "t123",
)


@dataclass(frozen=True)
class PowerPointRecord:
    p_ave: float                   # average pump power, mW
    tallies: TallyCounters
    gates: int
    config_id: str = ""

    def __post_init__(self):
        if self.p_ave <= 0:
            raise PipelineError(f"p_ave must be positive, got {self.p_ave}")
        if self.gates != self.tallies.gates:
            raise PipelineError("gates field disagrees with the tally block")


@dataclass(frozen=True)
class QuadraticFit:
    """Through-origin quadratic fit N = s1 P + s2 P^2.

    Units: s1 in counts/pulse/mW, s2 in counts/pulse/mW^2.  covariance is
    the 2x2 parameter covariance from the residual variance.
    """

    s1: float
    s2: float
    residual_rms: float
    covariance: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        if self.residual_rms < 0:
            raise PipelineError("residual_rms must be nonnegative")

    def evaluate(self, p_ave: float) -> float:
        return self.s1 * p_ave + self.s2 * p_ave**2


def write_power_records(path, records: list[PowerPointRecord]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            t = rec.tallies
            writer.writerow(
                [
                    f"{rec.p_ave:.10g}", t.gates, t.singles_1, t.singles_2, t.singles_3,
                    t.coinc_12, t.coinc_13, t.coinc_23, t.acc_12, t.acc_13, t.triples_123,
                ]
            )


def read_power_records(path, config_id: str = "") -> list[PowerPointRecord]:
    """Parse and validate a power-record CSV, sorted by increasing power.

    Schema violations name the offending row and column; duplicate power
    points only warn.
    """
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            warnings.warn(f"{path}: empty file, no records", ConfigWarning, stacklevel=2)
            return []
        if [h.strip() for h in header] != list(RECORD_COLUMNS):
            raise PipelineError(
                f"{path}: bad header {header!r}, expected {','.join(RECORD_COLUMNS)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(RECORD_COLUMNS):
                raise PipelineError(f"{path}:{line_no}: expected {len(RECORD_COLUMNS)} columns")
            values = {}
            for col, cell in zip(RECORD_COLUMNS, row):
                try:
                    values[col] = float(cell) if col == "p_ave_mw" else int(cell)
                except ValueError:
                    raise PipelineError(
                        f"{path}:{line_no}: column {col}: cannot parse {cell!r}"
                    ) from None
            tallies = TallyCounters(
                gates=values["gates"],
                singles_1=values["s1_counts"],
                singles_2=values["s2_counts"],
                singles_3=values["s3_counts"],
                coinc_12=values["c12"],
                coinc_13=values["c13"],
                coinc_23=values["c23"],
                acc_12=values["acc12"],
                acc_13=values["acc13"],
                triples_123=values["t123"],
            )
            records.append(
                PowerPointRecord(
                    p_ave=values["p_ave_mw"], tallies=tallies, gates=values["gates"],
                    config_id=config_id,
                )
            )
    powers = [r.p_ave for r in records]
    if len(set(powers)) != len(powers):
        warnings.warn(f"{path}: duplicate power points", ConfigWarning, stacklevel=2)
    return sorted(records, key=lambda r: r.p_ave)


def _band_counts_per_gate(record: PowerPointRecord, band: str) -> float:
    t = record.tallies
    if band == "idler":
        return t.singles_1 / t.gates
    if band == "signal":
        return (t.singles_2 + t.singles_3) / t.gates
    raise PipelineError(f"band must be 'idler' or 'signal', got {band!r}")


def fit_quadratic(records: list[PowerPointRecord], band: str = "idler") -> QuadraticFit:
    """Least-squares fit of counts/gate vs power through the origin.

    Solved by the normal equations of the design [P, P^2]; needs at least
    three distinct power points so the residual variance has a degree of
    freedom.
    """
    if len({r.p_ave for r in records}) < 3:
        raise PipelineError("need at least 3 distinct power points for the quadratic fit")
    p = np.array([r.p_ave for r in records])
    y = np.array([_band_counts_per_gate(r, band) for r in records])
    design = np.column_stack([p, p**2])
    gram = design.T @ design
    if np.linalg.cond(gram) > 1e12:
        raise PipelineError("power points are degenerate: quadratic fit is rank deficient")
    coeffs = np.linalg.solve(gram, design.T @ y)
    residuals = y - design @ coeffs
    dof = len(records) - 2
    sigma2 = float(residuals @ residuals) / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.inv(gram)
    return QuadraticFit(
        s1=float(coeffs[0]),
        s2=float(coeffs[1]),
        residual_rms=float(np.sqrt(np.mean(residuals**2))),
        covariance=tuple(map(tuple, cov.tolist())),
    )


@dataclass(frozen=True)
class CorrectedEstimates:
    """Raman-subtracted figures for one power point."""

    p_ave: float
    p_pair: float
    car: EstimatorResult
    g_c2: EstimatorResult
    h: EstimatorResult
    raw_h: EstimatorResult
    raman_fraction: float          # Raman share of the herald singles

    def as_dict(self) -> dict:
        doc = asdict(self)
        for key in ("car", "g_c2", "h", "raw_h"):
            doc[key] = getattr(self, key).as_dict()
        return doc


def raman_correct(
    records: list[PowerPointRecord],
    fit: QuadraticFit,
    config: SourceConfig,
) -> list[CorrectedEstimates]:
    """Remove the linear (Raman) background from each record.

    Per record, with beta = s1 * p_ave the fitted Raman counts per gate in
    the herald band and rates per gate n1, n2, ..., c12, ..., t123:

        n1'   = n1  - beta                  herald singles
        c12'  = c12 - beta * n2             two-fold coincidences
        a12'  = a12 - beta * n2             accidentals
        t123' = t123 - beta * c23           triples

    (same for the 1-3 pair).  Raman clicks are independent of the signal
    band, so they enter every herald-bearing rate through products with the
    unconditioned signal-side rate; subtraction is first order in beta.
    Uncertainties combine Poisson counting errors with the fit variance of
    s1.
    """
    bands = normalize(config)
    herald_norm = 0.5 * config.signal_channel_transmission * config.detectors[1].efficiency
    eta_herald = config.idler_channel_transmission * config.detectors[0].efficiency
    xi = collection_efficiency(bands.sigma_s_prime, bands.sigma_i_prime)
    var_s1 = fit.covariance[0][0]

    out = []
    for rec in records:
        t = rec.tallies
        gates = float(t.gates)
        n1 = t.singles_1 / gates
        n2 = t.singles_2 / gates
        n3 = t.singles_3 / gates
        c12 = t.coinc_12 / gates
        c13 = t.coinc_13 / gates
        c23 = t.coinc_23 / gates
        a12 = t.acc_12 / gates
        t123 = t.triples_123 / gates

        beta = fit.s1 * rec.p_ave
        var_beta = var_s1 * rec.p_ave**2

        n1c = n1 - beta
        if n1c <= 0:
            raise CorrectionRegimeError(
                f"p_ave={rec.p_ave}: Raman subtraction exhausts the herald singles"
            )
        c12c = c12 - beta * n2
        c13c = c13 - beta * n3
        a12c = a12 - beta * n2
        t123c = t123 - beta * c23
        if c12c <= 0 or c13c <= 0 or a12c <= 0:
            raise CorrectionRegimeError(
                f"p_ave={rec.p_ave}: Raman subtraction exhausts the coincidences"
            )

        # Poisson variances on raw rates, plus the fit contribution
        v_n1 = n1 / gates + var_beta
        v_c12 = c12 / gates + (n2 * rec.p_ave) ** 2 * var_s1 + beta**2 * n2 / gates
        v_a12 = a12 / gates + (n2 * rec.p_ave) ** 2 * var_s1 + beta**2 * n2 / gates
        v_t123 = t123 / gates + (c23 * rec.p_ave) ** 2 * var_s1 + beta**2 * c23 / gates
        v_c13 = c13 / gates + (n3 * rec.p_ave) ** 2 * var_s1 + beta**2 * n3 / gates

        car_c = c12c / a12c
        car_se = car_c * math.sqrt(v_c12 / c12c**2 + v_a12 / a12c**2)

        g2_c = t123c * n1c / (c13c * c12c)
        g2_se = abs(g2_c) * math.sqrt(
            v_t123 / max(t123c, 1.0 / gates) ** 2
            + v_n1 / n1c**2
            + v_c12 / c12c**2
            + v_c13 / c13c**2
        )

        true_cc = c12c - a12c
        h_c = true_cc / n1c / herald_norm
        h_se = abs(h_c) * math.sqrt((v_c12 + v_a12) / max(true_cc, 1.0 / gates) ** 2 + v_n1 / n1c**2)

        raw_true = c12 - a12
        raw_h = raw_true / n1 / herald_norm
        raw_h_se = abs(raw_h) * math.sqrt(
            (c12 + a12) / gates / max(raw_true, 1.0 / gates) ** 2 + 1.0 / (n1 * gates)
        )

        out.append(
            CorrectedEstimates(
                p_ave=rec.p_ave,
                p_pair=n1c * xi / eta_herald,
                car=EstimatorResult(car_c, car_se, max(int(a12c * gates), 0)),
                g_c2=EstimatorResult(g2_c, g2_se, max(int(t123c * gates), 0)),
                h=EstimatorResult(h_c, h_se, max(int(true_cc * gates), 0)),
                raw_h=EstimatorResult(raw_h, raw_h_se, max(int(raw_true * gates), 0)),
                raman_fraction=beta / n1,
            )
        )
    return out


def power_slope(p_values, values, std_errors) -> tuple[float, float]:
    """Weighted straight-line slope of values vs power, with its standard
    error; used to test whether a corrected quantity still trends with
    pump power."""
    p = np.asarray(p_values, dtype=float)
    y = np.asarray(values, dtype=float)
    w = 1.0 / np.clip(np.asarray(std_errors, dtype=float), 1e-300, None) ** 2
    if p.size < 3:
        raise PipelineError("need at least 3 points for a slope test")
    sw = w.sum()
    pbar = (w * p).sum() / sw
    ybar = (w * y).sum() / sw
    spp = (w * (p - pbar) ** 2).sum()
    if spp == 0.0:
        raise PipelineError("all powers equal: slope undefined")
    slope = (w * (p - pbar) * (y - ybar)).sum() / spp
    return float(slope), float(1.0 / math.sqrt(spp))


# ---------------------------------------------------------------------------
# synthetic power sweeps (ground truth for the reduction chain)
# ---------------------------------------------------------------------------


def synthesize_power_sweep(
    config: SourceConfig,
    s1: float,
    s2: float,
    powers,
    pulses_per_point: int,
    seed: int,
    config_id: str = "synthetic",
    raman_signal_fraction: float = 0.0,
    workers: int = 1,
) -> list[PowerPointRecord]:
    """Simulated power sweep with Raman background on, one record per power.

    s1 and s2 are photon-level coefficients (mean photons per pulse reaching
    the idler band, per mW and per mW^2); detected-count coefficients come
    out scaled by the herald path efficiency, which is what the quadratic
    fit recovers.
    """
    records = []
    for k, p_ave in enumerate(powers):
        model = build_pulse_model(
            config, source="analytic", raman=(s1, s2, float(p_ave)),
            raman_signal_fraction=raman_signal_fraction,
        )
        tallies = simulate(model, pulses_per_point, seed=seed + 7919 * k, workers=workers)
        records.append(
            PowerPointRecord(
                p_ave=float(p_ave), tallies=tallies, gates=tallies.gates, config_id=config_id
            )
        )
    return records


# ---------------------------------------------------------------------------
# contour sweeps over normalized bandwidths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContourGrid:
    sigma_s_values: np.ndarray
    sigma_i_values: np.ndarray
    surfaces: dict          # name -> matrix with shape (len(sigma_s), len(sigma_i))
    p_pair: float

    def __post_init__(self):
        shape = (len(self.sigma_s_values), len(self.sigma_i_values))
        for name, surf in self.surfaces.items():
            if surf.shape != shape:
                raise PipelineError(f"surface {name} has shape {surf.shape}, expected {shape}")

    def value_at(self, name: str, sigma_s: float, sigma_i: float) -> float:
        ks = int(np.argmin(np.abs(self.sigma_s_values - sigma_s)))
        ki = int(np.argmin(np.abs(self.sigma_i_values - sigma_i)))
        return float(self.surfaces[name][ks, ki])


def sweep_contour(
    p_pair: float,
    sigma_s_range: tuple[float, float] = (0.1, 3.0),
    sigma_i_range: tuple[float, float] = (0.1, 3.0),
    step: float = 0.05,
) -> ContourGrid:
    """CAR, approximate heralded g2 and heralding efficiency surfaces over
    the normalized-bandwidth plane at fixed pair rate.

    H carries no p_pair dependence, so its surface is identical across
    sweeps at different pair rates.
    """
    if p_pair <= 0:
        raise PipelineError("p_pair must be positive")
    if step <= 0 or sigma_s_range[0] <= 0 or sigma_i_range[0] <= 0:
        raise PipelineError("ranges and step must be positive")
    sig_s = np.arange(sigma_s_range[0], sigma_s_range[1] + step / 2, step)
    sig_i = np.arange(sigma_i_range[0], sigma_i_range[1] + step / 2, step)
    car_surf = np.empty((sig_s.size, sig_i.size))
    g2_surf = np.empty_like(car_surf)
    h_surf = np.empty_like(car_surf)
    for a, ss in enumerate(sig_s):
        for b, si in enumerate(sig_i):
            car_value = car_closed_form(p_pair, ss, si)
            car_surf[a, b] = car_value
            g2_surf[a, b] = heralded_g2_approx(unconditional_g2(ss), car_value)
            h_surf[a, b] = collection_efficiency(ss, si)
    return ContourGrid(
        sigma_s_values=sig_s,
        sigma_i_values=sig_i,
        surfaces={"car": car_surf, "g_c2": g2_surf, "h": h_surf},
        p_pair=p_pair,
    )


def write_contour_csv(grid: ContourGrid, path, extra_metadata: dict | None = None):
    """Long-form CSV (sigma_s_prime, sigma_i_prime, car, g_c2, h) plus a JSON
    metadata sidecar at <path>.meta.json."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma_s_prime", "sigma_i_prime", "car", "g_c2", "h"])
        for a, ss in enumerate(grid.sigma_s_values):
            for b, si in enumerate(grid.sigma_i_values):
                writer.writerow(
                    [
                        f"{ss:.6g}", f"{si:.6g}",
                        f"{grid.surfaces['car'][a, b]:.8g}",
                        f"{grid.surfaces['g_c2'][a, b]:.8g}",
                        f"{grid.surfaces['h'][a, b]:.8g}",
                    ]
                )
    meta = {
        "p_pair": grid.p_pair,
        "sigma_s_range": [float(grid.sigma_s_values[0]), float(grid.sigma_s_values[-1])],
        "sigma_i_range": [float(grid.sigma_i_values[0]), float(grid.sigma_i_values[-1])],
        "n_sigma_s": int(grid.sigma_s_values.size),
        "n_sigma_i": int(grid.sigma_i_values.size),
        "tool_version": _version,
    }
    if extra_metadata:
        meta.update(extra_metadata)
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_corrected_csv(corrected: list[CorrectedEstimates], path, extra_metadata: dict | None = None):
    """Corrected estimates per power point, with a metadata sidecar recording
    that coincidences and triples were Raman-adjusted along with singles."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "p_ave_mw", "p_pair", "car", "car_err", "g_c2", "g_c2_err",
                "h", "h_err", "raw_h", "raw_h_err", "raman_fraction",
            ]
        )
        for c in corrected:
            writer.writerow(
                [
                    f"{c.p_ave:.10g}", f"{c.p_pair:.8g}",
                    f"{c.car.value:.8g}", f"{c.car.std_error:.4g}",
                    f"{c.g_c2.value:.8g}", f"{c.g_c2.std_error:.4g}",
                    f"{c.h.value:.8g}", f"{c.h.std_error:.4g}",
                    f"{c.raw_h.value:.8g}", f"{c.raw_h.std_error:.4g}",
                    f"{c.raman_fraction:.6g}",
                ]
            )
    meta = {
        "correction": "linear Raman term subtracted from herald singles, "
                      "two-fold coincidences, accidentals and triples",
        "corrects_pairwise_coincidences": True,
        "corrects_triples": True,
        "tool_version": _version,
    }
    if extra_metadata:
        meta.update(extra_metadata)
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
