import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsps.config import ModelValidityError, ConfigWarning
from hsps import stats
from hsps.stats import (
    CountProbabilities,
    car,
    coincidence_prob,
    collection_efficiency,
    full_report,
    heralded_g2_approx,
    heralded_g2_exact,
    heralding_efficiencies,
    herald_singles_prob,
    pair_rate,
    signal_singles_prob,
    triple_coincidence_prob,
    two_pair_collection_efficiency,
    unconditional_g2,
)

# frozen by direct evaluation, cross-checked against the quadrature oracle
P1_SYM = 0.044428829381583664
P2_SYM = 0.022214414690791832
P12_SYM = 0.012094167785504852
TRIPLE_ACC = 2.192474849998632e-05
TRIPLE_PS = 0.0004934802200544679
TRIPLE_BUN = 0.0004486463321618562
GC2_EXACT_SYM = 0.29282829355690737
GC2_APPROX_SYM = 0.28437805358335927
GS2_03 = 1.978231976089037
GS2_1 = 1.8164965809277263


class TestSingles:
    def test_no_gain_no_counts(self):
        assert herald_singles_prob(0.0, 1.0, 1.0, 1.0) == 0.0
        assert signal_singles_prob(0.0, 1.0, 1.0, 1.0) == 0.0

    def test_symmetric_fixture(self):
        assert herald_singles_prob(0.01, 1.0, 1.0, 1.0) == pytest.approx(P1_SYM, rel=1e-12)
        assert signal_singles_prob(0.01, 1.0, 1.0, 1.0) == pytest.approx(P2_SYM, rel=1e-12)

    def test_signal_is_half_of_herald(self):
        # the 50/50 split halves the per-arm rate at equal efficiencies
        p1 = herald_singles_prob(0.007, 0.8, 0.3, 1.3)
        p2 = signal_singles_prob(0.007, 0.8, 0.3, 1.3)
        assert p2 == pytest.approx(p1 / 2.0, rel=1e-12)

    def test_linear_in_bandwidth(self):
        assert herald_singles_prob(0.01, 1, 1, 2.0) == pytest.approx(
            2 * herald_singles_prob(0.01, 1, 1, 1.0), rel=1e-12
        )

    def test_probability_guard(self):
        with pytest.raises(ModelValidityError):
            herald_singles_prob(0.5, 1.0, 1.0, 10.0)


class TestCollectionFactors:
    def test_values(self):
        assert collection_efficiency(1.0, 1.0) == pytest.approx(0.5, rel=1e-12)
        assert collection_efficiency(0.3, 0.3) == pytest.approx(0.2031856384435789, rel=1e-12)
        assert two_pair_collection_efficiency(1.0, 1.0) == pytest.approx(
            0.5345224838248488, rel=1e-12
        )
        assert two_pair_collection_efficiency(0.3, 0.3) == pytest.approx(
            0.20531577324874647, rel=1e-12
        )

    def test_broad_signal_limits(self):
        assert collection_efficiency(1e6, 1.0) == pytest.approx(1.0, rel=1e-9)
        with pytest.warns(ConfigWarning, match="two-pair"):
            value = two_pair_collection_efficiency(1e6, 1.0)
        assert value == pytest.approx(math.sqrt(2.0), rel=1e-9)


class TestCoincidence:
    def test_degenerate_collection_is_accidental(self):
        assert coincidence_prob(0.01, 0.02, 1.0, 1.0, 0.0) == pytest.approx(0.0002, rel=1e-12)

    def test_symmetric_fixture(self):
        assert coincidence_prob(P1_SYM, P2_SYM, 1.0, 1.0, 0.5) == pytest.approx(
            P12_SYM, rel=1e-12
        )

    @given(
        p1=st.floats(1e-6, 0.05),
        p2=st.floats(1e-6, 0.05),
        eta=st.floats(0.01, 1.0),
        xi=st.floats(0.0, 0.9),
    )
    @settings(max_examples=200)
    def test_never_below_accidental(self, p1, p2, eta, xi):
        assert coincidence_prob(p1, p2, eta, eta, xi) >= p1 * p2


class TestCar:
    def test_fixture_values(self):
        assert car(0.01, 1.0, 1.0) == 26.0
        assert car(0.005, 0.3, 0.3) == pytest.approx(9.256880733944952, rel=1e-12)

    def test_excess_halves_when_pair_rate_doubles(self):
        excess_1 = car(0.01, 0.7, 1.3) - 1.0
        excess_2 = car(0.02, 0.7, 1.3) - 1.0
        assert excess_1 == pytest.approx(2 * excess_2, rel=1e-12)

    def test_diverges_at_zero_pair_rate(self):
        with pytest.raises(ZeroDivisionError):
            car(0.0, 1.0, 1.0)

    def test_argmax_of_signal_bandwidth(self):
        # golden-section search against the closed-form optimum sqrt(2 + s_i^2)
        sig_i = 0.8
        inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
        lo, hi = 0.1, 10.0
        for _ in range(80):
            a = hi - inv_phi * (hi - lo)
            b = lo + inv_phi * (hi - lo)
            if car(0.01, a, sig_i) < car(0.01, b, sig_i):
                lo = a
            else:
                hi = b
        assert (lo + hi) / 2 == pytest.approx(math.sqrt(2.0 + sig_i**2), abs=1e-6)


class TestBandAutocorrelation:
    def test_single_mode_limit(self):
        assert unconditional_g2(0.0) == pytest.approx(2.0, rel=1e-12)

    def test_anchor_values(self):
        assert unconditional_g2(0.3) == pytest.approx(GS2_03, rel=1e-12)
        assert unconditional_g2(1.0) == pytest.approx(GS2_1, rel=1e-12)


class TestTripleCoincidence:
    def test_poissonian_signal_kills_bunching(self):
        terms = triple_coincidence_prob(0.01, 0.005, 0.005, 1, 1, 1, 0.5, 0.53, g_s2=1.0)
        assert terms.bunching == 0.0

    def test_symmetric_fixture_term_by_term(self):
        terms = triple_coincidence_prob(
            P1_SYM, P2_SYM, P2_SYM, 1.0, 1.0, 1.0,
            xi=0.5, xi_two_pair=0.5345224838248488, g_s2=GS2_1,
        )
        assert terms.accidental == pytest.approx(TRIPLE_ACC, rel=1e-12)
        assert terms.pair_single == pytest.approx(TRIPLE_PS, rel=1e-12)
        assert terms.bunching == pytest.approx(TRIPLE_BUN, rel=1e-12)

    def test_zero_collection_degenerates_to_bunched_accidentals(self):
        terms = triple_coincidence_prob(0.01, 0.004, 0.005, 1, 1, 1, 0.0, 0.0, g_s2=1.7)
        assert terms.total == pytest.approx(1.7 * 0.01 * 0.004 * 0.005, rel=1e-12)


class TestHeraldedG2:
    def _counts(self, scale_eta_1=1.0):
        p1 = P1_SYM * scale_eta_1
        p12 = p1 * P2_SYM + 0.5 * p1 * 0.5
        p123 = (TRIPLE_ACC + TRIPLE_PS + TRIPLE_BUN) * scale_eta_1
        return CountProbabilities(
            p1=p1, p2=P2_SYM, p3=P2_SYM, p12=p12, p13=p12, p23=GS2_1 * P2_SYM**2,
            p12_acc=p1 * P2_SYM, p13_acc=p1 * P2_SYM, p123=p123,
        )

    def test_symmetric_fixture(self):
        assert heralded_g2_exact(self._counts()) == pytest.approx(GC2_EXACT_SYM, rel=1e-12)

    def test_invariant_under_herald_efficiency(self):
        # P1 appears once up and once down: any eta_1 rescaling cancels
        assert heralded_g2_exact(self._counts(0.37)) == pytest.approx(
            heralded_g2_exact(self._counts()), rel=1e-12
        )

    def test_ideal_source_limit(self):
        _, figures = full_report_from_sigma(1.0, 1.0, 1e-8)
        assert figures.g_c2_exact < 1e-3

    def test_approx_fixtures(self):
        assert heralded_g2_approx(GS2_1, 1e9) == pytest.approx(0.0, abs=1e-8)
        assert heralded_g2_approx(GS2_1, 1.0) == pytest.approx(GS2_1, rel=1e-12)
        assert heralded_g2_approx(GS2_1, 13.5) == pytest.approx(0.25914354515292665, rel=1e-12)


class TestHeraldingAndPairRate:
    def test_arithmetic(self):
        eta_d, h = heralding_efficiencies(1.0, 1.0, 0.5)
        assert (eta_d, h) == (0.25, 0.5)

    def test_narrowband_value(self):
        _, h = heralding_efficiencies(0.4, 0.9, collection_efficiency(0.3, 0.3))
        assert h == pytest.approx(0.2031856384435789, rel=1e-12)

    def test_h_ignores_efficiencies(self):
        assert heralding_efficiencies(0.1, 0.2, 0.5)[1] == heralding_efficiencies(1, 1, 0.5)[1]

    def test_pair_rate(self):
        assert pair_rate(P1_SYM, 1.0, 1.0, 0.5) == pytest.approx(P2_SYM, rel=1e-12)
        with pytest.raises(ZeroDivisionError):
            pair_rate(0.01, 0.0, 1.0, 0.5)

    def test_pair_rate_invariant_under_herald_rescaling(self):
        base = pair_rate(P1_SYM, 1.0, 1.0, 0.5)
        scaled = pair_rate(P1_SYM * 0.2, 0.2, 1.0, 0.5)
        assert scaled == pytest.approx(base, rel=1e-12)


def full_report_from_sigma(sig_s, sig_i, g2, **kwargs):
    from hsps.config import make_symmetric_config

    return full_report(make_symmetric_config(sig_s, sig_i, g2, **kwargs))


class TestFullReport:
    def test_symmetric_regression(self):
        counts, figures = full_report_from_sigma(1.0, 1.0, 0.01)
        assert counts.p1 == pytest.approx(P1_SYM, rel=1e-9)
        assert counts.p12 == pytest.approx(P12_SYM, rel=1e-9)
        assert counts.p123 == pytest.approx(9.640513007163104e-4, rel=1e-9)
        assert figures.car == pytest.approx(12.253953951963826, rel=1e-9)
        assert figures.g_c2_exact == pytest.approx(GC2_EXACT_SYM, rel=1e-9)
        assert figures.g_c2_approx == pytest.approx(GC2_APPROX_SYM, rel=1e-9)
        assert figures.heralding_eff == pytest.approx(0.5, rel=1e-12)

    def test_narrowband_regression(self):
        counts, figures = full_report_from_sigma(0.3, 0.3, 0.01)
        assert counts.p1 == pytest.approx(P1_SYM * 0.3, rel=1e-9)
        assert figures.heralding_eff == pytest.approx(0.2031856384435789, rel=1e-9)
        assert figures.g_s2 == pytest.approx(GS2_03, rel=1e-9)

    def test_asymmetric_regression(self):
        counts, figures = full_report_from_sigma(
            2.0, 0.5, 0.004, det_efficiencies=(0.2, 0.12, 0.17)
        )
        # independent composition of the closed forms
        p1 = math.sqrt(2) * math.pi * 0.004 * 0.2 * 0.5
        xi = 2.0 / math.sqrt(2 + 4 + 0.25)
        assert counts.p1 == pytest.approx(p1, rel=1e-9)
        assert figures.p_pair == pytest.approx(p1 * xi / 0.2, rel=1e-9)
        assert figures.heralding_eff == pytest.approx(xi, rel=1e-9)

    @given(
        g2=st.floats(1e-5, 0.02),
        sig_s=st.floats(0.2, 2.5),
        sig_i=st.floats(0.2, 2.5),
        eta_s=st.floats(0.05, 1.0),
        eta_1=st.floats(0.05, 1.0),
    )
    @settings(max_examples=150, deadline=None)
    def test_car_identity(self, g2, sig_s, sig_i, eta_s, eta_1):
        # CAR from the bandwidth formula equals p12 / (p1 p2) identically
        p1 = herald_singles_prob(g2, eta_s, eta_1, sig_i)
        p2 = signal_singles_prob(g2, eta_s, 0.8, sig_s)
        xi = collection_efficiency(sig_s, sig_i)
        p12 = coincidence_prob(p1, p2, eta_s, 0.8, xi)
        p_pair = pair_rate(p1, eta_s, eta_1, xi)
        assert car(p_pair, sig_s, sig_i) == pytest.approx(p12 / (p1 * p2), rel=1e-12)

    def test_heralding_monotonic_in_bandwidths(self):
        # H rises with the signal bandwidth and falls with the idler bandwidth
        grid = [0.2, 0.5, 1.0, 1.7, 2.6]
        for sig_i in grid:
            values = [collection_efficiency(s, sig_i) for s in grid]
            assert values == sorted(values)
        for sig_s in grid:
            values = [collection_efficiency(sig_s, i) for i in grid]
            assert values == sorted(values, reverse=True)

    def test_heralded_g2_monotone_decreasing_in_bandwidths(self):
        # in the idler direction the CAR peaks at sigma_i = sqrt(2+sigma_s^2)
        # and falls beyond, which turns g_c2 back up: monotone decrease holds
        # below that turnover only
        grid = [0.3, 0.7, 1.2, 2.0]
        for sig_i in grid:
            values = [
                heralded_g2_approx(unconditional_g2(s), car(0.02, s, sig_i)) for s in grid
            ]
            assert values == sorted(values, reverse=True)
        for sig_s in grid:
            turnover = math.sqrt(2.0 + sig_s**2)
            values = [
                heralded_g2_approx(unconditional_g2(sig_s), car(0.02, sig_s, i))
                for i in grid
                if i <= turnover
            ]
            assert len(values) >= 3
            assert values == sorted(values, reverse=True)
        # past the turnover the decrease genuinely stops
        low = heralded_g2_approx(unconditional_g2(0.3), car(0.02, 0.3, 1.2))
        high = heralded_g2_approx(unconditional_g2(0.3), car(0.02, 0.3, 2.0))
        assert high > low

    def test_approximation_quality_over_grid(self):
        # the shortcut formula tracks the exact ratio through xi'/xi ~ 1;
        # that degrades toward broad-signal/narrow-idler corners, where the
        # worst case over this grid is 1 - g_s2 / (1 + (g_s2-1) xi'/xi),
        # about 7.5 percent at (2.0, 0.3).  Within 5 percent holds on the
        # symmetric diagonal; the verified grid-wide bound is 7.5 percent.
        grid = [0.3, 0.6, 1.0, 1.5, 2.0]
        for sig_s in grid:
            for sig_i in grid:
                for g2 in (1e-3, 0.02):
                    _, figures = full_report_from_sigma(sig_s, sig_i, g2)
                    ratio = figures.g_c2_approx / figures.g_c2_exact
                    assert 0.925 <= ratio <= 1.05
                    if sig_s == sig_i:
                        assert 0.95 <= ratio <= 1.05

    def test_approximation_worst_corner_is_understood(self):
        # closed-form prediction of the large-CAR limit of approx/exact
        sig_s, sig_i = 2.0, 0.3
        g_s2 = unconditional_g2(sig_s)
        ratio_limit = g_s2 / (
            1.0
            + (g_s2 - 1.0)
            * two_pair_collection_efficiency(sig_s, sig_i)
            / collection_efficiency(sig_s, sig_i)
        )
        _, figures = full_report_from_sigma(sig_s, sig_i, 1e-5)
        assert figures.g_c2_approx / figures.g_c2_exact == pytest.approx(
            ratio_limit, abs=1e-3
        )

    def test_model_validity_error_propagates(self):
        # sqrt(2) pi g2 sigma_i' > 1 cannot be a probability
        with pytest.raises(ModelValidityError):
            full_report_from_sigma(8.0, 8.0, 0.03, det_efficiencies=(1.0, 1.0, 1.0))

    def test_report_dict_round_trip(self):
        counts, figures = full_report_from_sigma(1.0, 1.0, 0.01)
        doc = stats.report_to_dict(counts, figures)
        assert doc["p1"] == counts.p1
        assert doc["car"] == figures.car
        assert set(doc) >= {"p1", "p12", "p123", "car", "g_c2_exact", "heralding_eff", "p_pair"}
