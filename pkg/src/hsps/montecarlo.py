"""Pulse-by-pulse simulation of the three gated detectors.

The simulator draws one joint click pattern per gated pulse from an exact
8-outcome distribution built out of the count probabilities, ORs in dark
counts and Poissonian Raman-background clicks per detector, applies the
dead-time veto, and tallies singles, same-slot coincidences, adjacent-slot
accidentals and triples exactly as a counting experiment would.  Because
the pattern distribution is exact, estimator behavior can be tested against
known ground truth (:func:`model_predictions`).

Determinism contract: results depend only on (seed, chunking).  Each chunk
derives an independent random stream from a counter-based generator keyed
by (seed, chunk_index), so chunk generation can run on any number of
workers without changing a single count.  Chunks are merged in index
order; dead-time state and the adjacent-gate registers carry across the
boundary.

Raman background is Poissonian and sits in the idler band by default (the
band where it is fitted and subtracted downstream); an optional signal-band
mean is available since broadband filters admit more of it.  When a
``raman=(s1, s2, p_ave)`` triple is given, the model is power-driven: the
linear part s1 * p_ave is the mean Raman photon number reaching the idler
band per pulse and the quadratic part s2 * p_ave^2 sets the pair gain so
that the mean pair-produced idler photon number equals it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np

from .config import SourceConfig, normalize, with_gain
from .stats import CountProbabilities, full_report

_SQRT2_PI = math.sqrt(2.0) * math.pi

DEFAULT_CHUNK = 1 << 20


class ModelInconsistencyError(ValueError):
    """The supplied count probabilities admit no joint click distribution."""


class EstimationError(RuntimeError):
    """A tally-based estimator is undefined on these counts."""


@dataclass(frozen=True)
class TallyCounters:
    """Raw click tallies.  Coincidences are same-slot; acc_* pair each gate
    with the adjacent earlier gate of the partner detector (a vetoed gate
    contributes no click), so the coincidence and accidental rates see the
    same dead-time thinning and their ratio stays unbiased."""

    gates: int
    singles_1: int = 0
    singles_2: int = 0
    singles_3: int = 0
    coinc_12: int = 0
    coinc_13: int = 0
    coinc_23: int = 0
    acc_12: int = 0
    acc_13: int = 0
    triples_123: int = 0

    def __post_init__(self):
        if self.gates < 0:
            raise ValueError("gates must be nonnegative")
        for name in ("coinc_12", "coinc_13", "coinc_23", "acc_12", "acc_13", "triples_123"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.coinc_12 > min(self.singles_1, self.singles_2):
            raise ValueError("coinc_12 exceeds its constituent singles")
        if self.coinc_13 > min(self.singles_1, self.singles_3):
            raise ValueError("coinc_13 exceeds its constituent singles")
        if self.coinc_23 > min(self.singles_2, self.singles_3):
            raise ValueError("coinc_23 exceeds its constituent singles")
        if max(self.singles_1, self.singles_2, self.singles_3) > self.gates:
            raise ValueError("singles exceed the number of gates")

    def __add__(self, other: "TallyCounters") -> "TallyCounters":
        if not isinstance(other, TallyCounters):
            return NotImplemented
        return TallyCounters(
            *(getattr(self, f) + getattr(other, f) for f in self.__dataclass_fields__)
        )

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EstimatorResult:
    value: float
    std_error: float
    n_effective: int

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Estimates:
    car: EstimatorResult
    g_c2: EstimatorResult
    h: EstimatorResult
    eta_d: EstimatorResult

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PulseModel:
    """Everything :func:`simulate` needs for one gated pulse.

    pattern_probs[i] is the probability of the click pattern with bits
    (detector1, detector2, detector3) packed as i = 4 d1 + 2 d2 + d3,
    before dark counts and Raman background.  extra_click_probs are the
    per-detector probabilities of an independent additional click (dark OR
    detected Raman).
    """

    pattern_probs: np.ndarray
    raman_idler_mean: float
    raman_signal_mean: float
    dark: tuple[float, float, float]
    extra_click_probs: tuple[float, float, float]
    gate_divisor: int
    dead_time_gates: tuple[int, int, int]
    source_counts: CountProbabilities

    def marginals(self) -> tuple[float, float, float]:
        p = self.pattern_probs
        bits = np.arange(8)
        return (
            float(p[(bits & 4) > 0].sum()),
            float(p[(bits & 2) > 0].sum()),
            float(p[(bits & 1) > 0].sum()),
        )


def pattern_probabilities(counts: CountProbabilities) -> np.ndarray:
    """Joint 8-outcome click distribution by inclusion-exclusion over
    {P1, P2, P3, P12, P13, P23, P123}."""
    c = counts
    p = np.empty(8)
    p[0b111] = c.p123
    p[0b110] = c.p12 - c.p123
    p[0b101] = c.p13 - c.p123
    p[0b011] = c.p23 - c.p123
    p[0b100] = c.p1 - c.p12 - c.p13 + c.p123
    p[0b010] = c.p2 - c.p12 - c.p23 + c.p123
    p[0b001] = c.p3 - c.p13 - c.p23 + c.p123
    p[0b000] = 1.0 - p[0b001] - p[0b010] - p[0b011] - p[0b100] - p[0b101] - p[0b110] - p[0b111]
    if np.any(p < -1e-12):
        worst = int(np.argmin(p))
        raise ModelInconsistencyError(
            f"inclusion-exclusion gives negative probability {p[worst]:.3e} "
            f"for pattern {worst:03b}"
        )
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def gain_for_power(s2: float, p_ave: float, sigma_i_prime: float) -> float:
    """|G|^2 such that the mean pair-produced idler photon number per pulse
    reaching the band equals s2 * p_ave^2."""
    if s2 < 0 or p_ave <= 0:
        raise ValueError("s2 must be nonnegative and p_ave positive")
    return s2 * p_ave**2 / (_SQRT2_PI * sigma_i_prime)


def build_pulse_model(
    config: SourceConfig,
    source: str = "analytic",
    raman: tuple[float, float, float] | None = None,
    raman_signal_fraction: float = 0.0,
) -> PulseModel:
    """Construct the per-pulse model from a configuration.

    source selects where the click-pattern probabilities come from:
    "analytic" uses the closed forms, "gaussian_oracle" the all-order
    threshold-click probabilities of the Gaussian-state engine.

    raman, when given, is (s1, s2, p_ave): mean Raman photons per pulse in
    the idler band s1 * p_ave, pair gain set from s2 * p_ave^2 (the
    configured |G|^2 is ignored).  raman_signal_fraction routes that
    fraction of the Raman mean into the signal band as well.
    """
    raman_idler = 0.0
    raman_signal = 0.0
    if raman is not None:
        s1, s2, p_ave = raman
        bands = normalize(config)
        config = with_gain(config, gain_for_power(s2, p_ave, bands.sigma_i_prime))
        raman_idler = s1 * p_ave
        raman_signal = raman_signal_fraction * s1 * p_ave

    if source == "analytic":
        counts, _ = full_report(config)
    elif source == "gaussian_oracle":
        from .oracle import gaussian_click_probs

        counts = gaussian_click_probs(config, order="all_order")
    else:
        raise ValueError(f"source must be 'analytic' or 'gaussian_oracle', got {source!r}")

    patterns = pattern_probabilities(counts)

    eta_s = config.signal_channel_transmission
    eta_i = config.idler_channel_transmission
    e1, e2, e3 = (d.efficiency for d in config.detectors)
    q_raman = (
        1.0 - math.exp(-eta_i * e1 * raman_idler),
        1.0 - math.exp(-0.5 * eta_s * e2 * raman_signal),
        1.0 - math.exp(-0.5 * eta_s * e3 * raman_signal),
    )
    dark = tuple(d.dark_count_prob for d in config.detectors)
    extra = tuple(1.0 - (1.0 - dk) * (1.0 - qr) for dk, qr in zip(dark, q_raman))

    model = PulseModel(
        pattern_probs=patterns,
        raman_idler_mean=raman_idler,
        raman_signal_mean=raman_signal,
        dark=dark,
        extra_click_probs=extra,
        gate_divisor=config.gate_divisor,
        dead_time_gates=tuple(d.dead_time_gates for d in config.detectors),
        source_counts=counts,
    )
    # construction guarantees: distribution normalized, marginals match
    marg = model.marginals()
    for got, want, label in zip(marg, (counts.p1, counts.p2, counts.p3), "123"):
        if abs(got - want) > 1e-12:
            raise ModelInconsistencyError(f"pattern marginal P{label} off by {got - want:.2e}")
    return model


def effective_pattern_probs(model: PulseModel) -> np.ndarray:
    """Pattern distribution after OR-ing the independent extra clicks in."""
    p = model.pattern_probs.copy()
    for det, q in enumerate(model.extra_click_probs):
        if q == 0.0:
            continue
        bit = 4 >> det
        out = np.zeros_like(p)
        for idx in range(8):
            if idx & bit:
                out[idx] += p[idx]
            else:
                out[idx] += p[idx] * (1.0 - q)
                out[idx | bit] += p[idx] * q
        p = out
    return p


def _joint_probs(p: np.ndarray) -> dict:
    bits = np.arange(8)
    d1 = (bits & 4) > 0
    d2 = (bits & 2) > 0
    d3 = (bits & 1) > 0
    return {
        "p1": float(p[d1].sum()),
        "p2": float(p[d2].sum()),
        "p3": float(p[d3].sum()),
        "p12": float(p[d1 & d2].sum()),
        "p13": float(p[d1 & d3].sum()),
        "p23": float(p[d2 & d3].sum()),
        "p123": float(p[d1 & d2 & d3].sum()),
    }


def model_predictions(model: PulseModel, config: SourceConfig) -> dict:
    """Exact expectation values of the tally-based estimators, dark counts
    and Raman included, assuming no dead-time thinning."""
    j = _joint_probs(effective_pattern_probs(model))
    acc_12 = j["p1"] * j["p2"]
    eta_d = (j["p12"] - acc_12) / j["p1"]
    herald_norm = 0.5 * config.signal_channel_transmission * config.detectors[1].efficiency
    return {
        "car": j["p12"] / acc_12,
        "g_c2": j["p123"] * j["p1"] / (j["p13"] * j["p12"]),
        "eta_d": eta_d,
        "h": eta_d / herald_norm,
        "joint": j,
    }


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, chunk_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_chunk(model: PulseModel, seed: int, chunk_index: int, size: int):
    """Raw (pre-dead-time) click arrays for one chunk; stateless."""
    rng = _chunk_rng(seed, chunk_index)
    cdf = np.cumsum(model.pattern_probs)
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    d1 = (idx & 4) > 0
    d2 = (idx & 2) > 0
    d3 = (idx & 1) > 0
    for det, (arr, q) in enumerate(zip((d1, d2, d3), model.extra_click_probs)):
        if q > 0.0:
            arr |= rng.random(size) < q
    return d1, d2, d3


def _apply_dead_time(raw: np.ndarray, dead: int, dead_until_local: int):
    """Greedy dead-time veto over one chunk.

    Returns (effective clicks, live mask, dead_until for the next chunk in
    local coordinates past the chunk end).  A click in a vetoed gate is
    dropped and does not retrigger the veto.
    """
    m = raw.size
    live = np.ones(m, dtype=bool)
    if dead_until_local > 0:
        live[: min(dead_until_local, m)] = False
    if dead == 0:
        eff = raw & live
        return eff, live, max(dead_until_local - m, 0)
    starts = []
    ends = []
    du = dead_until_local
    for i in np.nonzero(raw)[0]:
        if i < du:
            continue
        du = i + 1 + dead
        starts.append(i + 1)
        ends.append(min(du, m))
    for s, e in zip(starts, ends):
        if s < m:
            live[s:e] = False
    eff = raw & live
    return eff, live, max(du - m, 0)


def simulate(
    model: PulseModel,
    n_pulses: int,
    seed: int,
    chunking: int = DEFAULT_CHUNK,
    workers: int = 1,
    progress=None,
) -> TallyCounters:
    """Simulate n_pulses pump pulses and return the tallies.

    Only every gate_divisor-th pulse is gated; tallies.gates counts the
    gated pulses.  Deterministic for fixed (seed, chunking) and independent
    of workers; progress, when given, is called as progress(done, total)
    after each merged chunk with pulse counts.
    """
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    if chunking < 1:
        raise ValueError("chunking must be >= 1")
    n_gates = n_pulses // model.gate_divisor
    if n_gates == 0:
        return TallyCounters(gates=0)

    n_chunks = (n_gates + chunking - 1) // chunking
    sizes = [min(chunking, n_gates - k * chunking) for k in range(n_chunks)]

    s1 = s2 = s3 = c12 = c13 = c23 = t123 = a12 = a13 = 0
    dead = model.dead_time_gates
    any_dead = any(d > 0 for d in dead)
    dead_until = [0, 0, 0]
    prev_click = [False, False, False]

    def consume(chunk_index: int, arrays):
        nonlocal s1, s2, s3, c12, c13, c23, t123, a12, a13
        effs = []
        for det, raw in enumerate(arrays):
            if any_dead:
                eff, _, dead_until[det] = _apply_dead_time(raw, dead[det], dead_until[det])
            else:
                eff = raw
            effs.append(eff)
        d1, d2, d3 = effs
        s1 += int(np.count_nonzero(d1))
        s2 += int(np.count_nonzero(d2))
        s3 += int(np.count_nonzero(d3))
        c12 += int(np.count_nonzero(d1 & d2))
        c13 += int(np.count_nonzero(d1 & d3))
        c23 += int(np.count_nonzero(d2 & d3))
        t123 += int(np.count_nonzero(d1 & d2 & d3))
        # accidentals pair each gate with the adjacent earlier gate of the
        # partner; a vetoed gate records no click, as in hardware
        a12 += int(np.count_nonzero(d1[1:] & d2[:-1])) + int(d1[0] and prev_click[1])
        a13 += int(np.count_nonzero(d1[1:] & d3[:-1])) + int(d1[0] and prev_click[2])
        for det in range(3):
            prev_click[det] = bool(effs[det][-1])

    if workers <= 1:
        for k in range(n_chunks):
            consume(k, _draw_chunk(model, seed, k, sizes[k]))
            if progress is not None:
                progress(min((k + 1) * chunking, n_gates) * model.gate_divisor, n_pulses)
    else:
        # bounded submission window: chunk draws run concurrently but only a
        # few are in flight, and merging stays in index order
        window = 2 * workers
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pending = {
                k: pool.submit(_draw_chunk, model, seed, k, sizes[k])
                for k in range(min(window, n_chunks))
            }
            for k in range(n_chunks):
                consume(k, pending.pop(k).result())
                nxt = k + window
                if nxt < n_chunks:
                    pending[nxt] = pool.submit(_draw_chunk, model, seed, nxt, sizes[nxt])
                if progress is not None:
                    progress(min((k + 1) * chunking, n_gates) * model.gate_divisor, n_pulses)

    return TallyCounters(
        gates=n_gates,
        singles_1=s1,
        singles_2=s2,
        singles_3=s3,
        coinc_12=c12,
        coinc_13=c13,
        coinc_23=c23,
        acc_12=a12,
        acc_13=a13,
        triples_123=t123,
    )


def estimate(tallies: TallyCounters, config: SourceConfig) -> Estimates:
    """CAR, heralded g2, heralding efficiency and conditional detection
    efficiency from raw tallies, with delta-method standard errors.

    The estimators mirror the experimental reduction: CAR is the same-slot
    to adjacent-slot coincidence ratio, the heralded g2 is
    triples * singles_1 / (coinc_13 * coinc_12), and H divides the true
    coincidence rate by the herald singles and by the signal-channel
    detection efficiency (coupler split included).
    """
    if tallies.acc_12 == 0:
        raise EstimationError(
            "no accidental 1-2 coincidences tallied; CAR is undefined "
            "(increase n_pulses or the pair rate)"
        )
    if tallies.singles_1 == 0 or tallies.coinc_12 == 0 or tallies.coinc_13 == 0:
        raise EstimationError("zero counts in an estimator denominator; increase n_pulses")

    c12, c13 = float(tallies.coinc_12), float(tallies.coinc_13)
    a12 = float(tallies.acc_12)
    n1 = float(tallies.singles_1)
    t = float(tallies.triples_123)

    car_value = c12 / a12
    car_se = car_value * math.sqrt(1.0 / c12 + 1.0 / a12)

    if t > 0:
        g2_value = t * n1 / (c13 * c12)
        g2_se = g2_value * math.sqrt(1.0 / t + 1.0 / n1 + 1.0 / c12 + 1.0 / c13)
    else:
        g2_value = 0.0
        g2_se = n1 / (c13 * c12)

    true_cc = c12 - a12
    eta_d_value = true_cc / n1
    eta_d_se = math.sqrt((c12 + a12) / n1**2 + eta_d_value**2 / n1)

    herald_norm = 0.5 * config.signal_channel_transmission * config.detectors[1].efficiency
    if herald_norm <= 0:
        raise EstimationError("signal-channel detection efficiency is zero")

    return Estimates(
        car=EstimatorResult(car_value, car_se, int(a12)),
        g_c2=EstimatorResult(g2_value, g2_se, int(t)),
        h=EstimatorResult(eta_d_value / herald_norm, eta_d_se / herald_norm, max(int(true_cc), 0)),
        eta_d=EstimatorResult(eta_d_value, eta_d_se, max(int(true_cc), 0)),
    )
