"""Spectral mode structure of the filtered pair state.

The filtered joint spectral amplitude F = f_s f_i phi carries the full
two-photon correlation; its singular values give the Schmidt spectrum and
the effective mode number K = 1 / sum(lambda_k^2).  K = 1 means the state
is spectrally factorable and heralded photons are pure.

For indistinguishability what matters is the marginal mode content of each
band on its own, with the conjugate band unobserved and unfiltered.  That
is governed by the band's autocorrelation kernel f(w) f(w') exp(-(w-w')^2 /
(8 sigma_p^2)), whose eigenvalue participation K_eff fixes the measurable
autocorrelation through g2 = 1 + 1/K_eff; the closed form is
g2 = 1 + 1/sqrt(1 + sig'^2/2).  A band is treated as single-mode when its
K_eff stays below a threshold (1.05 by default, i.e. g2 above 1.95).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict

import numpy as np

from .config import SourceConfig, normalize
from .oracle import FrequencyGrid, make_default_grids
from .stats import (
    car,
    collection_efficiency,
    heralded_g2_approx,
    unconditional_g2,
)

SINGLE_MODE_K_MAX = 1.05


@dataclass(frozen=True)
class SchmidtResult:
    coefficients: np.ndarray        # descending, sum to 1
    schmidt_number: float           # 1 / sum(lambda^2)


@dataclass(frozen=True)
class ModeReport:
    schmidt_coefficients: tuple
    schmidt_number: float
    g2_signal_pred: float
    g2_idler_pred: float
    single_mode_heralding: bool
    single_mode_heralded: bool
    heralded_purity: float
    threshold: float

    def as_dict(self) -> dict:
        doc = asdict(self)
        doc["schmidt_coefficients"] = list(self.schmidt_coefficients)
        return doc


def filtered_jsa(
    config: SourceConfig,
    grid_s: FrequencyGrid | None = None,
    grid_i: FrequencyGrid | None = None,
) -> np.ndarray:
    """Joint spectral amplitude f_s(w_s) f_i(w_i) phi(w_s, w_i) on the grid,
    normalized to unit Frobenius norm."""
    if grid_s is None or grid_i is None:
        grid_s, grid_i = make_default_grids(config)
    sp = config.pump.bandwidth_sigma
    xs = grid_s.points() - config.pump.center_omega
    xi = grid_i.points() - config.pump.center_omega
    fs = np.exp(-((xs - (config.signal_filter.center_omega - config.pump.center_omega)) ** 2)
                / (2.0 * config.signal_filter.sigma**2))
    fi = np.exp(-((xi - (config.idler_filter.center_omega - config.pump.center_omega)) ** 2)
                / (2.0 * config.idler_filter.sigma**2))
    jsa = fs[:, None] * fi[None, :] * np.exp(-np.add.outer(xs, xi) ** 2 / (4.0 * sp**2))
    norm = np.linalg.norm(jsa)
    if norm == 0.0:
        raise ValueError("joint amplitude vanished on the grid")
    return jsa / norm


def schmidt(matrix: np.ndarray) -> SchmidtResult:
    """Schmidt spectrum of a (normalized) joint amplitude.

    The coefficients are the squared singular values renormalized to unit
    sum; a rank-1 matrix gives schmidt_number exactly 1.
    """
    matrix = np.asarray(matrix, dtype=float)
    try:
        singular = np.linalg.svd(matrix, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"Schmidt decomposition failed: {exc}") from exc
    lam = singular**2
    total = lam.sum()
    if total == 0.0:
        raise ValueError("cannot decompose an all-zero amplitude")
    lam = lam / total
    return SchmidtResult(coefficients=lam, schmidt_number=1.0 / float(np.sum(lam**2)))


def marginal_mode_number(
    config: SourceConfig,
    band: str,
    grid: FrequencyGrid | None = None,
) -> float:
    """Effective mode number of one band's filtered autocorrelation kernel.

    band is "signal" or "idler".  K_eff = (sum mu)^2 / sum(mu^2) over the
    kernel eigenvalues; it depends only on this band's filter and the pump,
    not on the conjugate filter, and satisfies 1 + 1/K_eff = g2(band)
    within discretization error.
    """
    if band == "signal":
        filt = config.signal_filter
    elif band == "idler":
        filt = config.idler_filter
    else:
        raise ValueError(f"band must be 'signal' or 'idler', got {band!r}")
    if grid is None:
        grid = FrequencyGrid(
            filt.center_omega, 6.0 * max(config.pump.bandwidth_sigma, filt.sigma), 256
        )
    x = grid.points() - filt.center_omega
    f = np.exp(-(x**2) / (2.0 * filt.sigma**2))
    kernel = np.outer(f, f) * np.exp(
        -np.subtract.outer(x, x) ** 2 / (8.0 * config.pump.bandwidth_sigma**2)
    )
    mu = np.linalg.eigvalsh(kernel)
    mu = np.clip(mu, 0.0, None)
    return float(mu.sum() ** 2 / np.sum(mu**2))


def mode_report(
    config: SourceConfig,
    grid_s: FrequencyGrid | None = None,
    grid_i: FrequencyGrid | None = None,
    threshold: float = SINGLE_MODE_K_MAX,
) -> ModeReport:
    """Full mode-structure report for one configuration.

    The heralded-state purity is 1/K of the filtered joint amplitude (the
    idler trace of F), a heuristic figure: it assumes the herald projects
    onto the filtered idler modes.
    """
    jsa = filtered_jsa(config, grid_s, grid_i)
    decomposition = schmidt(jsa)
    k_signal = marginal_mode_number(config, "signal")
    k_idler = marginal_mode_number(config, "idler")
    return ModeReport(
        schmidt_coefficients=tuple(float(v) for v in decomposition.coefficients[:16]),
        schmidt_number=decomposition.schmidt_number,
        g2_signal_pred=1.0 + 1.0 / k_signal,
        g2_idler_pred=1.0 + 1.0 / k_idler,
        single_mode_heralding=k_idler <= threshold,
        single_mode_heralded=k_signal <= threshold,
        heralded_purity=1.0 / decomposition.schmidt_number,
        threshold=threshold,
    )


# ---------------------------------------------------------------------------
# narrowband-filter strategies for indistinguishable heralded photons
# ---------------------------------------------------------------------------

NARROW_IDLER = "narrow_idler"      # single-mode herald, free signal bandwidth
NARROW_SIGNAL = "narrow_signal"    # single-mode heralded photon, free idler


@dataclass(frozen=True)
class StrategyCurve:
    strategy: str
    sigma_free: np.ndarray
    g_c2: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class IndistinguishabilityReport:
    p_pair: float
    fixed_sigma: float
    curves: tuple[StrategyCurve, StrategyCurve]
    better_g2_strategy: str
    better_h_strategy: str


def indistinguishability_report(
    p_pair: float,
    fixed_sigma: float = 0.3,
    free_values: np.ndarray | None = None,
) -> IndistinguishabilityReport:
    """Compare the two single-mode filter strategies at fixed pair rate.

    Strategy "narrow_idler" pins the herald band at fixed_sigma and sweeps
    the signal bandwidth; "narrow_signal" is the mirror image.  Both give
    the same CAR at mirrored bandwidths (the CAR is symmetric in the two
    bands) but different heralding efficiency, which favors narrowing the
    heralding band.
    """
    if free_values is None:
        free_values = np.arange(0.1, 3.0001, 0.05)
    free_values = np.asarray(free_values, dtype=float)

    def curve(strategy: str) -> StrategyCurve:
        g2v = np.empty_like(free_values)
        hv = np.empty_like(free_values)
        for k, sig in enumerate(free_values):
            if strategy == NARROW_IDLER:
                sig_s, sig_i = sig, fixed_sigma
            else:
                sig_s, sig_i = fixed_sigma, sig
            car_value = car(p_pair, sig_s, sig_i)
            g2v[k] = heralded_g2_approx(unconditional_g2(sig_s), car_value)
            hv[k] = collection_efficiency(sig_s, sig_i)
        return StrategyCurve(strategy=strategy, sigma_free=free_values.copy(), g_c2=g2v, h=hv)

    idler_curve = curve(NARROW_IDLER)
    signal_curve = curve(NARROW_SIGNAL)
    better_g2 = NARROW_IDLER if idler_curve.g_c2.min() <= signal_curve.g_c2.min() else NARROW_SIGNAL
    better_h = NARROW_IDLER if idler_curve.h.max() >= signal_curve.h.max() else NARROW_SIGNAL
    return IndistinguishabilityReport(
        p_pair=p_pair,
        fixed_sigma=fixed_sigma,
        curves=(idler_curve, signal_curve),
        better_g2_strategy=better_g2,
        better_h_strategy=better_h,
    )


def write_mode_report_json(report: ModeReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_strategy_csv(report: IndistinguishabilityReport, path):
    """Long-form CSV of both strategy curves: sigma_free, g_c2, h, strategy."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma_free", "g_c2", "h", "strategy"])
        for curve in report.curves:
            for sig, g2v, hv in zip(curve.sigma_free, curve.g_c2, curve.h):
                writer.writerow([f"{sig:.6g}", f"{g2v:.8g}", f"{hv:.8g}", curve.strategy])
