"""Brute-force numerical validation of the closed-form counting statistics.

Two independent machines live here:

* a quadrature oracle (:func:`build_correlations`, :func:`numeric_counts`)
  that discretizes the second-order correlation kernels of the two bands on
  frequency grids and evaluates every count probability as a Gaussian-moment
  contraction of those matrices, with all integrals done numerically;

* a Gaussian-state click engine (:func:`gaussian_click_probs`) that builds
  the full multimode squeezed state from the SVD of the discretized pair
  kernel, applies the dual-band filter and detector efficiencies as
  frequency-diagonal losses and the 50/50 coupler as a unitary on a doubled
  signal mode set, and obtains threshold-detector click probabilities from
  vacuum-probability determinants by inclusion-exclusion.

In ``low_gain`` mode the click engine returns the leading-order count
probabilities computed through the state route, the same currency as
``numeric_counts``.  In ``all_order`` mode it returns genuine threshold
click probabilities, which differ from the count probabilities at
O(|G|^4) for singles and pairwise coincidences.  Note the triple
coincidence differs at O(1) relative whenever herald multi-photon events
are detected with high efficiency: a double pair puts two photons on the
herald, which counts twice in the moment E[N1 N2 N3] but clicks once.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .config import ConfigWarning, SourceConfig, normalize
from .stats import CountProbabilities, full_report

BOUNDARY_LEAK = 1e-8          # truncation warning threshold, relative to the kernel peak
COVERAGE_FACTOR_MIN = 5.0
DEFAULT_POINTS = 256
DEFAULT_CLICK_POINTS = 128


class OracleConvergenceError(RuntimeError):
    """Grid refinement moved a result by more than the stated tolerance."""


class OracleConditioningError(RuntimeError):
    """The assembled covariance is not a physical Gaussian state."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid over one detection band.

    half_width should cover at least COVERAGE_FACTOR_MIN of the wider of
    the band filter and the pump; anything narrower truncates Gaussian
    tails visibly and triggers a warning.
    """

    band_center: float
    half_width: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 32:
            raise ValueError(f"n_points must be >= 32, got {self.n_points}")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    def points(self) -> np.ndarray:
        return np.linspace(
            self.band_center - self.half_width,
            self.band_center + self.half_width,
            self.n_points,
        )

    def check_coverage(self, feature_width: float):
        if self.half_width < COVERAGE_FACTOR_MIN * feature_width:
            warnings.warn(
                f"grid half-width {self.half_width:.3g} covers less than "
                f"{COVERAGE_FACTOR_MIN} feature widths ({feature_width:.3g}): "
                "expect truncation error",
                ConfigWarning,
                stacklevel=2,
            )

    def refined(self, factor: int = 2) -> "FrequencyGrid":
        return FrequencyGrid(self.band_center, self.half_width, factor * self.n_points)


def make_default_grids(config: SourceConfig, n_points: int = DEFAULT_POINTS):
    """Band grids for the quadrature oracle: 6 widths of the wider of the
    band filter and the pump, centered on the filter centers."""
    sp = config.pump.bandwidth_sigma
    grid_s = FrequencyGrid(
        config.signal_filter.center_omega,
        6.0 * max(sp, config.signal_filter.sigma),
        n_points,
    )
    grid_i = FrequencyGrid(
        config.idler_filter.center_omega,
        6.0 * max(sp, config.idler_filter.sigma),
        n_points,
    )
    return grid_s, grid_i


def make_click_grids(config: SourceConfig, n_points: int = DEFAULT_CLICK_POINTS):
    """Grids for the Gaussian click engine.

    Both bands get one common half-width covering the broader filter, so
    that each band grid also covers the energy-conservation reflection of
    the other band; the joint squeezed state is then represented without
    losing squeezing partners of any detected mode.
    """
    sp = config.pump.bandwidth_sigma
    hw = 6.5 * max(sp, config.signal_filter.sigma, config.idler_filter.sigma)
    grid_s = FrequencyGrid(config.signal_filter.center_omega, hw, n_points)
    grid_i = FrequencyGrid(config.idler_filter.center_omega, hw, n_points)
    return grid_s, grid_i


@dataclass(frozen=True)
class CorrelationMatrices:
    """Discretized second-order moments of the filtered two-band state.

    auto_signal / auto_idler are the (real symmetric, PSD) number kernels of
    each band including channel transmission and filter amplitudes; cross is
    the pair-creation kernel between the bands.  The phase-insensitive
    cross-band correlation vanishes identically and is not stored.
    Detector efficiencies and the coupler split are not folded in here.
    """

    auto_signal: np.ndarray
    auto_idler: np.ndarray
    cross: np.ndarray
    spacing_s: float
    spacing_i: float


def _boundary_leak(matrix: np.ndarray) -> float:
    peak = float(np.max(np.abs(matrix)))
    if peak == 0.0:
        return 0.0
    edges = np.concatenate(
        [np.abs(matrix[0, :]), np.abs(matrix[-1, :]), np.abs(matrix[:, 0]), np.abs(matrix[:, -1])]
    )
    return float(np.max(edges)) / peak


def _inner_pump_integral(offsets: np.ndarray, sigma_p: float) -> np.ndarray:
    """I[k,k'] = integral dv phi(x_k + v) phi(x_k' + v) over the conjugate
    band, by trapezoid on a dedicated grid wide enough to hold the reflected
    band plus 8 pump widths."""
    lo = -float(np.max(offsets)) - 8.0 * sigma_p
    hi = -float(np.min(offsets)) + 8.0 * sigma_p
    n = max(64, int(np.ceil((hi - lo) / (sigma_p / 3.0))) + 1)
    nu = np.linspace(lo, hi, n)
    dnu = nu[1] - nu[0]
    phy = np.exp(-np.add.outer(offsets, nu) ** 2 / (4.0 * sigma_p**2))
    weights = np.ones(n)
    weights[0] = weights[-1] = 0.5
    return (phy * weights) @ phy.T * dnu


def build_correlations(
    config: SourceConfig, grid_s: FrequencyGrid, grid_i: FrequencyGrid
) -> CorrelationMatrices:
    """Assemble the leading-order correlation matrices on the given grids."""
    sp = config.pump.bandwidth_sigma
    grid_s.check_coverage(max(sp, config.signal_filter.sigma))
    grid_i.check_coverage(max(sp, config.idler_filter.sigma))

    g2 = config.gain.g_squared
    g_amp = config.gain.amplitude
    eta_s = config.signal_channel_transmission
    eta_i = config.idler_channel_transmission

    # offsets from the pump carrier keep the quadratic phases cancellation-free
    xs = grid_s.points() - config.pump.center_omega
    xi = grid_i.points() - config.pump.center_omega
    fs = np.exp(-((xs - (config.signal_filter.center_omega - config.pump.center_omega)) ** 2)
                / (2.0 * config.signal_filter.sigma**2))
    fi = np.exp(-((xi - (config.idler_filter.center_omega - config.pump.center_omega)) ** 2)
                / (2.0 * config.idler_filter.sigma**2))

    phi = np.exp(-np.add.outer(xs, xi) ** 2 / (4.0 * sp**2))
    cross = np.sqrt(eta_s * eta_i) * (g_amp / sp) * fs[:, None] * fi[None, :] * phi
    auto_signal = eta_s * (g2 / sp**2) * np.outer(fs, fs) * _inner_pump_integral(xs, sp)
    auto_idler = eta_i * (g2 / sp**2) * np.outer(fi, fi) * _inner_pump_integral(xi, sp)

    for name, matrix in (("auto_signal", auto_signal), ("auto_idler", auto_idler), ("cross", cross)):
        leak = _boundary_leak(matrix)
        if leak > BOUNDARY_LEAK:
            warnings.warn(
                f"{name} kernel boundary holds {leak:.2e} of the peak: grid too narrow",
                ConfigWarning,
                stacklevel=2,
            )

    return CorrelationMatrices(
        auto_signal=auto_signal,
        auto_idler=auto_idler,
        cross=cross,
        spacing_s=grid_s.spacing,
        spacing_i=grid_i.spacing,
    )


def _counts_from_matrices(config: SourceConfig, mats: CorrelationMatrices) -> CountProbabilities:
    e1, e2, e3 = (d.efficiency for d in config.detectors)
    ds, di = mats.spacing_s, mats.spacing_i
    a_s, a_i, c = mats.auto_signal, mats.auto_idler, mats.cross

    p1 = e1 * float(np.trace(a_i)) * di
    p2 = 0.5 * e2 * float(np.trace(a_s)) * ds
    p3 = 0.5 * e3 * float(np.trace(a_s)) * ds

    cross_sq = float(np.sum(c * c)) * ds * di
    t12 = 0.5 * e1 * e2 * cross_sq
    t13 = 0.5 * e1 * e3 * cross_sq

    bunch23 = 0.25 * e2 * e3 * float(np.sum(a_s * a_s)) * ds * ds
    # triple contraction of the cross kernel with the signal number kernel
    w4 = 0.5 * e1 * e2 * e3 * float(np.einsum("kl,ml,km->", c, c, a_s)) * ds * ds * di

    accidental = p1 * p2 * p3
    pair_single = t12 * p3 + t13 * p2
    bunching = p1 * bunch23 + w4

    return CountProbabilities(
        p1=p1,
        p2=p2,
        p3=p3,
        p12=p1 * p2 + t12,
        p13=p1 * p3 + t13,
        p23=p2 * p3 + bunch23,
        p12_acc=p1 * p2,
        p13_acc=p1 * p3,
        p123=accidental + pair_single + bunching,
        p123_accidental=accidental,
        p123_pair_single=pair_single,
        p123_bunching=bunching,
    )


_CONVERGENCE_FIELDS = (
    "p1", "p2", "p3", "p12", "p13", "p23",
    "p123_accidental", "p123_pair_single", "p123_bunching",
)


def numeric_counts(
    config: SourceConfig,
    grid_s: FrequencyGrid | None = None,
    grid_i: FrequencyGrid | None = None,
    check_convergence: bool = False,
    convergence_rtol: float = 1e-6,
) -> CountProbabilities:
    """Count probabilities by quadrature of the correlation kernels.

    With check_convergence=True the grids are refined by a factor of two and
    any relative change beyond convergence_rtol raises
    :class:`OracleConvergenceError`.
    """
    if grid_s is None or grid_i is None:
        grid_s, grid_i = make_default_grids(config)
    counts = _counts_from_matrices(config, build_correlations(config, grid_s, grid_i))
    if check_convergence:
        fine = _counts_from_matrices(
            config, build_correlations(config, grid_s.refined(), grid_i.refined())
        )
        for name in _CONVERGENCE_FIELDS:
            coarse_v, fine_v = getattr(counts, name), getattr(fine, name)
            if fine_v == 0.0:
                continue
            rel = abs(coarse_v - fine_v) / abs(fine_v)
            if rel > convergence_rtol:
                raise OracleConvergenceError(
                    f"{name} moved by {rel:.2e} under grid doubling (> {convergence_rtol})"
                )
    return counts


# ---------------------------------------------------------------------------
# Gaussian click engine
# ---------------------------------------------------------------------------


def _pair_kernel(config: SourceConfig, grid_s: FrequencyGrid, grid_i: FrequencyGrid) -> np.ndarray:
    """Discretized pair-creation kernel R (no filters: those act as loss)."""
    sp = config.pump.bandwidth_sigma
    xs = grid_s.points() - config.pump.center_omega
    xi = grid_i.points() - config.pump.center_omega
    phi = np.exp(-np.add.outer(xs, xi) ** 2 / (4.0 * sp**2))
    return (config.gain.amplitude / sp) * phi * np.sqrt(grid_s.spacing * grid_i.spacing)


def _band_transmissions(config: SourceConfig, grid_s: FrequencyGrid, grid_i: FrequencyGrid):
    """Intensity transmissions per mode: (idler to detector 1, signal band to
    each arm detector, without the coupler split)."""
    fs2 = np.exp(-((grid_s.points() - config.signal_filter.center_omega) ** 2)
                 / config.signal_filter.sigma**2)
    fi2 = np.exp(-((grid_i.points() - config.idler_filter.center_omega) ** 2)
                 / config.idler_filter.sigma**2)
    e1, e2, e3 = (d.efficiency for d in config.detectors)
    t1 = config.idler_channel_transmission * e1 * fi2
    t2_band = config.signal_channel_transmission * e2 * fs2
    t3_band = config.signal_channel_transmission * e3 * fs2
    return t1, t2_band, t3_band


def _low_gain_counts(R: np.ndarray, t1: np.ndarray, t2b: np.ndarray, t3b: np.ndarray) -> CountProbabilities:
    """Leading-order count probabilities from the state route.

    The number kernels at leading order are N_s = R R^T and N_i = R^T R; the
    coupler halves the band transmission seen by each arm.
    """
    t2 = 0.5 * t2b
    t3 = 0.5 * t3b
    n_s = R @ R.T
    n_i = R.T @ R
    p1 = float(t1 @ np.diag(n_i))
    p2 = float(t2 @ np.diag(n_s))
    p3 = float(t3 @ np.diag(n_s))
    pair = R * R  # |pair amplitude|^2 per mode pair
    t12 = float(t2 @ pair @ t1)
    t13 = float(t3 @ pair @ t1)
    bunch23 = float(t2 @ (n_s * n_s) @ t3)
    w4 = 2.0 * float(np.einsum("k,m,l,kl,ml,km->", t2, t3, t1, R, R, n_s))
    accidental = p1 * p2 * p3
    pair_single = t12 * p3 + t13 * p2
    bunching = p1 * bunch23 + w4
    return CountProbabilities(
        p1=p1,
        p2=p2,
        p3=p3,
        p12=p1 * p2 + t12,
        p13=p1 * p3 + t13,
        p23=p2 * p3 + bunch23,
        p12_acc=p1 * p2,
        p13_acc=p1 * p3,
        p123=accidental + pair_single + bunching,
        p123_accidental=accidental,
        p123_pair_single=pair_single,
        p123_bunching=bunching,
    )


def click_probs_from_pair_kernel(
    R: np.ndarray,
    t1: np.ndarray,
    t2_band: np.ndarray,
    t3_band: np.ndarray,
    symplectic_check: bool = True,
) -> CountProbabilities:
    """Threshold click probabilities for the squeezed state exp(sum R a+ b+ - h.c.).

    Collapsing R to a single entry r with scalar transmissions reproduces the
    two-mode squeezed vacuum result P(click) = 1 - 1/(1 + t sinh^2 r).
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2_band = np.atleast_1d(np.asarray(t2_band, dtype=float))
    t3_band = np.atleast_1d(np.asarray(t3_band, dtype=float))
    ns, ni = R.shape
    U, lam, Vt = np.linalg.svd(R)
    V = Vt.T

    lam_s = np.zeros(ns)
    lam_s[: lam.size] = lam
    lam_i = np.zeros(ni)
    lam_i[: lam.size] = lam
    ch_s = np.cosh(2.0 * lam_s)
    ch_i = np.cosh(2.0 * lam_i)
    sh = np.sinh(2.0 * lam)

    c_s = (U * ch_s) @ U.T                     # signal x-x block, vacuum units of 1
    c_i = (V * ch_i) @ V.T
    sh_rect = np.zeros((ns, ni))
    sh_rect[np.diag_indices(lam.size)] = sh
    s_si = U @ sh_rect @ V.T

    # modes: [arm2 (ns), arm3 (ns), idler (ni)]; coupler mixes the signal
    # band with a vacuum port, so each arm holds half the band variance.
    n_tot = 2 * ns + ni
    vxx = np.zeros((n_tot, n_tot))
    eye_s = np.eye(ns)
    v22 = 0.25 * c_s + 0.25 * eye_s
    v23 = 0.25 * c_s - 0.25 * eye_s
    v2i = s_si / (2.0 * np.sqrt(2.0))
    vxx[:ns, :ns] = v22
    vxx[ns:2 * ns, ns:2 * ns] = v22
    vxx[:ns, ns:2 * ns] = v23
    vxx[ns:2 * ns, :ns] = v23.T
    vxx[:ns, 2 * ns:] = v2i
    vxx[2 * ns:, :ns] = v2i.T
    vxx[ns:2 * ns, 2 * ns:] = v2i
    vxx[2 * ns:, ns:2 * ns] = v2i.T
    vxx[2 * ns:, 2 * ns:] = 0.5 * c_i

    vpp = vxx.copy()
    vpp[: 2 * ns, 2 * ns:] *= -1.0
    vpp[2 * ns:, : 2 * ns] *= -1.0

    # frequency-diagonal loss on every mode; the coupler split is in the
    # unitary above, so the band transmissions enter unhalved
    t = np.concatenate([np.asarray(t2_band), np.asarray(t3_band), np.asarray(t1)])
    d = np.sqrt(t)
    vac = np.diag(1.0 - t) / 2.0
    vxx = d[:, None] * vxx * d[None, :] + vac
    vpp = d[:, None] * vpp * d[None, :] + vac

    if symplectic_check:
        # symplectic spectrum of the xx/pp-factored state: sqrt(eig(4 Vxx Vpp))
        chol = np.linalg.cholesky(vpp + 1e-14 * np.eye(n_tot))
        sym_sq = np.linalg.eigvalsh(chol.T @ vxx @ chol)
        nu_min = 2.0 * np.sqrt(max(float(np.min(sym_sq)), 0.0))
        if nu_min < 1.0 - 1e-9:
            raise OracleConditioningError(
                f"minimum symplectic eigenvalue {nu_min:.12f} < 1: covariance unphysical"
            )

    sets = {
        1: np.arange(2 * ns, n_tot),
        2: np.arange(0, ns),
        3: np.arange(ns, 2 * ns),
    }

    def vac_prob(*labels) -> float:
        idx = np.concatenate([sets[lbl] for lbl in labels])
        m = idx.size
        eye = np.eye(m) / 2.0
        sign_a, logdet_a = np.linalg.slogdet(vxx[np.ix_(idx, idx)] + eye)
        sign_b, logdet_b = np.linalg.slogdet(vpp[np.ix_(idx, idx)] + eye)
        if sign_a <= 0 or sign_b <= 0:
            raise OracleConditioningError("non-positive determinant in vacuum probability")
        return float(np.exp(-0.5 * (logdet_a + logdet_b)))

    q1, q2, q3 = vac_prob(1), vac_prob(2), vac_prob(3)
    q12, q13, q23 = vac_prob(1, 2), vac_prob(1, 3), vac_prob(2, 3)
    q123 = vac_prob(1, 2, 3)

    p1 = 1.0 - q1
    p2 = 1.0 - q2
    p3 = 1.0 - q3
    p12 = 1.0 - q1 - q2 + q12
    p13 = 1.0 - q1 - q3 + q13
    p23 = 1.0 - q2 - q3 + q23
    p123 = 1.0 - q1 - q2 - q3 + q12 + q13 + q23 - q123
    return CountProbabilities(
        p1=p1, p2=p2, p3=p3, p12=p12, p13=p13, p23=p23,
        p12_acc=p1 * p2, p13_acc=p1 * p3, p123=p123,
    )


def gaussian_click_probs(
    config: SourceConfig,
    grid_s: FrequencyGrid | None = None,
    grid_i: FrequencyGrid | None = None,
    order: str = "all_order",
) -> CountProbabilities:
    """Detection probabilities from the discretized Gaussian state.

    order="all_order": threshold-detector click probabilities, exact in the
    gain for the discretized state.  order="low_gain": leading-order count
    probabilities through the same state construction, matching
    :func:`numeric_counts` up to discretization.

    Grids from :func:`make_click_grids` guarantee each band covers the
    reflection of the other; narrower grids silently drop squeezing
    partners of detected modes.
    """
    if grid_s is None or grid_i is None:
        grid_s, grid_i = make_click_grids(config)
    R = _pair_kernel(config, grid_s, grid_i)
    t1, t2b, t3b = _band_transmissions(config, grid_s, grid_i)
    if order == "low_gain":
        return _low_gain_counts(R, t1, t2b, t3b)
    if order == "all_order":
        return click_probs_from_pair_kernel(R, t1, t2b, t3b)
    raise ValueError(f"order must be 'low_gain' or 'all_order', got {order!r}")


# ---------------------------------------------------------------------------
# comparison reports
# ---------------------------------------------------------------------------

COMPARISON_QUANTITIES = (
    ("p1", lambda c: c.p1),
    ("p2", lambda c: c.p2),
    ("p12_true", lambda c: c.p12 - c.p12_acc),
    ("p123_accidental", lambda c: c.p123_accidental),
    ("p123_pair_single", lambda c: c.p123_pair_single),
    ("p123_bunching", lambda c: c.p123_bunching),
)


def comparison_rows(config: SourceConfig, include_gaussian: bool = False) -> list[dict]:
    """Closed form vs quadrature (and optionally the low-gain state route)
    for one configuration; rows carry relative errors."""
    bands = normalize(config)
    analytic, _ = full_report(config)
    numeric = numeric_counts(config)
    rows = []

    def add(quantity: str, a: float, n: float):
        rel = abs(n - a) / abs(a) if a != 0 else abs(n)
        rows.append(
            {
                "sigma_s_prime": bands.sigma_s_prime,
                "sigma_i_prime": bands.sigma_i_prime,
                "g_squared": config.gain.g_squared,
                "quantity": quantity,
                "analytic": a,
                "numeric": n,
                "rel_err": rel,
            }
        )

    for name, getter in COMPARISON_QUANTITIES:
        add(name, getter(analytic), getter(numeric))
    if include_gaussian:
        state_counts = gaussian_click_probs(config, order="low_gain")
        for name, getter in COMPARISON_QUANTITIES:
            add(name + "/gaussian_low_gain", getter(analytic), getter(state_counts))
    return rows


COMPARISON_COLUMNS = (
    "sigma_s_prime", "sigma_i_prime", "g_squared", "quantity", "analytic", "numeric", "rel_err",
)


def write_comparison_csv(rows: list[dict], path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COMPARISON_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
