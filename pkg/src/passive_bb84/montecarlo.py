"""Monte Carlo sampling of protocol steps (1)-(5).

Two modes:

* per-round: every round draws intensity, basis, bit and Poisson photon
  number, routes each photon independently (channel and common line
  efficiency, then the three-way splitter, then polarization), adds dark
  counts and classifies the click pattern with the receiver's rules;
* aggregated: per (intensity, basis) cell the five exclusive event classes
  are drawn from one multinomial with the analytic class probabilities.

Cell RNG streams come from ``SeedSequence(seed, spawn_key=(cell,))`` with
``cell = 2 * intensity_index + basis_index``; the per-round mode uses
``spawn_key=(6,)``. Results therefore do not depend on execution order.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from passive_bb84.channel import ChannelModel, passive_cell
from passive_bb84.model import (
    INTENSITIES,
    Intensity,
    ObservedStats,
    ReceiverModel,
    SourceModel,
    ValidationError,
)

EVENT_CLASSES = ("sift_ok", "sift_err", "mismatch", "cross", "no_click")
BASES = ("Z", "X")
PER_ROUND_BATCH = 1_000_000
FLAG_Z = 5.0


@dataclass(frozen=True)
class SimConfig:
    """``intensity_probs`` sets how rounds are allocated to intensities.

    ``None`` uses the source weights; pass explicit probabilities when the
    source is the ``p_mu = 1`` asymptotic preset so decoys are still sampled.
    """

    n_rounds: int
    seed: int = 0
    resolve_photon_numbers: bool = False
    aggregated: bool = True
    intensity_probs: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        if self.n_rounds < 1:
            raise ValidationError("n_rounds must be >= 1")
        if self.n_rounds >= 2**62:
            raise ValidationError("n_rounds would overflow the 64-bit counters")
        if self.resolve_photon_numbers and self.aggregated:
            raise ValidationError("photon-number resolution needs per-round mode")


@dataclass(frozen=True)
class SimResult:
    """Counts per (intensity, basis) cell and the derived statistics.

    ``counts[tag][basis]`` maps each event class to its count. The fractions
    in ``stats`` are per-intensity; totals are recombined with the source's
    rate weights so they are comparable with the analytic model.
    """

    stats: ObservedStats
    counts: dict[Intensity, dict[str, dict[str, int]]]
    rounds: dict[Intensity, int]
    diagnostics: dict[tuple[int, int, str], int] = field(default_factory=dict)
    rng_trace: dict[str, object] = field(default_factory=dict)


def _cell_rng(seed: int, cell: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(cell,))))


def class_probabilities(
    mean_at_bob: float, basis: str, e_ch: float, m: ReceiverModel
) -> np.ndarray:
    """Analytic probabilities of the five event classes for one cell."""
    zl, xl = passive_cell(mean_at_bob, basis, e_ch, m)
    own, other = (zl, xl) if basis == "Z" else (xl, zl)
    p = np.array([
        own.right * (1 - other.any),
        own.error * (1 - other.any),
        (1 - own.any) * other.any,
        own.any * other.any,
        (1 - own.any) * (1 - other.any),
    ])
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _allocate(cfg: SimConfig, src: SourceModel, rng: np.random.Generator) -> dict[Intensity, int]:
    probs = cfg.intensity_probs or (src.p_mu, src.p_nu, src.p_0)
    n = rng.multinomial(cfg.n_rounds, np.asarray(probs, dtype=float) / sum(probs))
    return dict(zip(INTENSITIES, (int(k) for k in n)))


def stats_from_counts(
    counts: dict[Intensity, dict[str, dict[str, int]]],
    rounds: dict[Intensity, int],
    src: SourceModel,
) -> ObservedStats:
    qz, ex, qc, zerr = {}, {}, {}, {}
    for tag in INTENSITIES:
        n = rounds[tag]
        z, x = counts[tag]["Z"], counts[tag]["X"]
        div = n if n > 0 else 1
        qz[tag] = (z["sift_ok"] + z["sift_err"]) / div
        zerr[tag] = z["sift_err"] / div
        ex[tag] = x["sift_err"] / div
        qc[tag] = (z["cross"] + x["cross"]) / div
    q_total = sum(src.weight(t) * qz[t] for t in INTENSITIES)
    err = sum(src.weight(t) * zerr[t] for t in INTENSITIES)
    return ObservedStats(qz, ex, qc, q_total, err / q_total if q_total > 0 else 0.0)


def _simulate_aggregated(cfg, ch, m, src):
    alloc_rng = _cell_rng(cfg.seed, 7)
    rounds = _allocate(cfg, src, alloc_rng)
    counts: dict[Intensity, dict[str, dict[str, int]]] = {}
    for i, tag in enumerate(INTENSITIES):
        n_z = int(alloc_rng.binomial(rounds[tag], src.p_Z_alice))
        counts[tag] = {}
        for j, (basis, n_cell) in enumerate(zip(BASES, (n_z, rounds[tag] - n_z))):
            rng = _cell_rng(cfg.seed, 2 * i + j)
            p = class_probabilities(src.mean(tag) * ch.eta_ch, basis, ch.e_ch, m)
            draw = rng.multinomial(n_cell, p)
            counts[tag][basis] = dict(zip(EVENT_CLASSES, (int(k) for k in draw)))
    return counts, rounds, {}


def _classify(clicks: np.ndarray, basis_z: np.ndarray, bit: np.ndarray, rng) -> np.ndarray:
    """Event class index per round from the four detector clicks.

    Columns of ``clicks``: Z-line (H, V), X-line (D, Dbar). Bob's bit is
    0 for H/D. A double click within one line draws a random bit.
    """
    z_any = clicks[:, 0] | clicks[:, 1]
    x_any = clicks[:, 2] | clicks[:, 3]
    rand_bit = rng.integers(0, 2, size=len(bit)).astype(bool)

    def bob_bit(c0, c1):
        return np.where(c0 & c1, rand_bit, c1)

    own_any = np.where(basis_z, z_any, x_any)
    other_any = np.where(basis_z, x_any, z_any)
    b_bob = np.where(basis_z, bob_bit(clicks[:, 0], clicks[:, 1]), bob_bit(clicks[:, 2], clicks[:, 3]))
    cls = np.full(len(bit), 4)  # no_click
    cls[own_any & ~other_any & (b_bob == bit)] = 0
    cls[own_any & ~other_any & (b_bob != bit)] = 1
    cls[~own_any & other_any] = 2
    cls[own_any & other_any] = 3
    return cls


def detector_routing(basis_z: bool, bit: int, e_ch: float, m: ReceiverModel) -> np.ndarray:
    """Per-photon probabilities over (ZH, ZV, XD, XDbar, lost) after Bob's
    common efficiency ``eta_Z`` has already been applied."""
    pz, px = m.p_Z, m.p_X * m.r
    good, bad = 1 - e_ch, e_ch
    if basis_z:
        zline = (good, bad) if bit == 0 else (bad, good)
        xline = (0.5, 0.5)
    else:
        zline = (0.5, 0.5)
        xline = (good, bad) if bit == 0 else (bad, good)
    return np.array([pz * zline[0], pz * zline[1], px * xline[0], px * xline[1], 1 - pz - px])


def _simulate_per_round(cfg, ch, m, src):
    rng = _cell_rng(cfg.seed, 6)
    probs = np.asarray(cfg.intensity_probs or (src.p_mu, src.p_nu, src.p_0), dtype=float)
    probs = probs / probs.sum()
    means = np.array([src.mean(t) for t in INTENSITIES])
    counts = {t: {b: dict.fromkeys(EVENT_CLASSES, 0) for b in BASES} for t in INTENSITIES}
    rounds = dict.fromkeys(INTENSITIES, 0)
    diag: Counter = Counter()
    routes = {
        (bz, b): detector_routing(bz, b, ch.e_ch, m) for bz in (True, False) for b in (0, 1)
    }
    left = cfg.n_rounds
    while left > 0:
        n = min(left, PER_ROUND_BATCH)
        left -= n
        tag_idx = rng.choice(3, size=n, p=probs)
        basis_z = rng.random(n) < src.p_Z_alice
        bit = rng.integers(0, 2, size=n)
        n_A = rng.poisson(means[tag_idx])
        n_B = rng.binomial(n_A, ch.eta_ch * m.eta_Z)
        photons = np.zeros((n, 5), dtype=np.int64)
        for (bz, b), pv in routes.items():
            sel = (basis_z == bz) & (bit == b)
            photons[sel] = rng.multinomial(n_B[sel], pv)
        dark = rng.random((n, 4)) < m.d
        clicks = (photons[:, :4] > 0) | dark
        cls = _classify(clicks, basis_z, bit.astype(bool), rng)
        for ti, tag in enumerate(INTENSITIES):
            in_tag = tag_idx == ti
            rounds[tag] += int(in_tag.sum())
            for bz, basis in ((True, "Z"), (False, "X")):
                sel = in_tag & (basis_z == bz)
                tally = np.bincount(cls[sel], minlength=5)
                for k, name in enumerate(EVENT_CLASSES):
                    counts[tag][basis][name] += int(tally[k])
        if cfg.resolve_photon_numbers:
            keys, freq = np.unique(
                np.stack([n_A, n_B, cls, basis_z.astype(int)], axis=1), axis=0, return_counts=True
            )
            for (a, b, c, bz), f in zip(keys, freq):
                diag[(int(a), int(b), _diag_label(int(c), bool(bz)))] += int(f)
    return counts, rounds, dict(diag)


def _diag_label(cls: int, basis_z: bool) -> str:
    name = EVENT_CLASSES[cls]
    if name in ("sift_ok", "sift_err"):
        return ("Z" if basis_z else "X") + "-" + name
    return name


def simulate(cfg: SimConfig, ch: ChannelModel, m: ReceiverModel, src: SourceModel) -> SimResult:
    runner = _simulate_aggregated if cfg.aggregated else _simulate_per_round
    counts, rounds, diag = runner(cfg, ch, m, src)
    return SimResult(
        stats=stats_from_counts(counts, rounds, src),
        counts=counts,
        rounds=rounds,
        diagnostics=diag,
        rng_trace={"seed": cfg.seed, "mode": "aggregated" if cfg.aggregated else "per-round",
                   "streams": 8 if cfg.aggregated else 1},
    )


@dataclass(frozen=True)
class ZScore:
    name: str
    observed: float
    expected: float
    sigma: float
    z: float

    @property
    def flagged(self) -> bool:
        return abs(self.z) > FLAG_Z


def _z(name: str, obs: float, exp: float, sigma: float) -> ZScore:
    if sigma == 0.0:
        if obs != exp:
            raise ValidationError(f"{name}: zero variance but observed {obs} != expected {exp}")
        return ZScore(name, obs, exp, 0.0, 0.0)
    return ZScore(name, obs, exp, sigma, (obs - exp) / sigma)


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n > 0 else 0.0


def compare(sim: SimResult, expected: ObservedStats, src: SourceModel) -> list[ZScore]:
    """z-scores of every sampled fraction against expected values.

    Standard errors are binomial at the expected fraction; totals combine
    per-intensity variances with the rate weights.
    """
    out = []
    for tag in INTENSITIES:
        n = sim.rounds[tag]
        for name, table, exp_table in (
            ("Q_Z", sim.stats.Q_Z_given, expected.Q_Z_given),
            ("E_X", sim.stats.E_X_given, expected.E_X_given),
            ("Q_cross", sim.stats.Q_cross_given, expected.Q_cross_given),
        ):
            p = exp_table[tag]
            out.append(_z(f"{name}[{tag.value}]", table[tag], p, binomial_sigma(p, n)))
    var_q = sum(
        src.weight(t) ** 2 * binomial_sigma(expected.Q_Z_given[t], sim.rounds[t]) ** 2
        for t in INTENSITIES
    )
    out.append(_z("Q_Z_total", sim.stats.Q_Z_total, expected.Q_Z_total, math.sqrt(var_q)))
    # e_Z: weighted mean of per-intensity error rates, weights held fixed
    q_tot = expected.Q_Z_total
    var_e = 0.0
    for t in INTENSITIES:
        w = src.weight(t) * expected.Q_Z_given[t] / q_tot if q_tot > 0 else 0.0
        n_sift = sim.rounds[t] * expected.Q_Z_given[t]
        if w > 0 and n_sift > 0:
            var_e += w * w * expected.e_Z * (1 - expected.e_Z) / n_sift
    out.append(_z("e_Z", sim.stats.e_Z, expected.e_Z, math.sqrt(var_e)))
    return out


@dataclass(frozen=True)
class RatioDiagnostic:
    n_B: int
    n_Z: int
    n_X: int
    ratio: float
    sigma: float
    predicted: float

    @property
    def z(self) -> float:
        return (self.ratio - self.predicted) / self.sigma


def fixed_photon_ratio(
    n_B: int, m: ReceiverModel, p_Z_alice: float, n_rounds: int, seed: int = 0
) -> RatioDiagnostic:
    """Z-to-X sifted-count ratio for single-photon emissions delivering
    exactly ``n_B`` photons to Bob.

    Every delivered photon carries Alice's polarization (no misalignment);
    for ``n_B >= 2`` this stands in for a channel that adds photons, which
    the honest fiber never does. The prediction is ``(p_Z/p_X)^(n_B+1)``
    when ``p_Z_alice`` equals the receiver bias.
    """
    rng = _cell_rng(seed, 100 + n_B)
    n_Z = n_X = 0
    routes = {
        (bz, b): detector_routing(bz, b, 0.0, m) for bz in (True, False) for b in (0, 1)
    }
    left = n_rounds
    while left > 0:
        n = min(left, PER_ROUND_BATCH)
        left -= n
        basis_z = rng.random(n) < p_Z_alice
        bit = rng.integers(0, 2, size=n)
        photons = np.zeros((n, 5), dtype=np.int64)
        for (bz, b), pv in routes.items():
            sel = (basis_z == bz) & (bit == b)
            photons[sel] = rng.multinomial(n_B, pv, size=int(sel.sum()))
        clicks = (photons[:, :4] > 0) | (rng.random((n, 4)) < m.d)
        cls = _classify(clicks, basis_z, bit.astype(bool), rng)
        sifted = cls <= 1
        n_Z += int((sifted & basis_z).sum())
        n_X += int((sifted & ~basis_z).sum())
    ratio = n_Z / n_X if n_X else math.inf
    sigma = ratio * math.sqrt(1 / n_Z + 1 / n_X) if n_Z and n_X else math.inf
    predicted = (p_Z_alice / (1 - p_Z_alice)) * (m.p_Z / (m.p_X * m.r)) ** n_B
    return RatioDiagnostic(n_B, n_Z, n_X, ratio, sigma, predicted)


def rate_sigma(
    stats: ObservedStats,
    rounds: dict[Intensity, int],
    src: SourceModel,
    rate_fn,
    rel_step: float = 1e-4,
) -> float:
    """Delta-method standard error of ``rate_fn(stats)`` under binomial noise.

    Per-intensity fractions are independent binomials. A shift in
    ``Q_Z_given[t]`` carries ``Q_Z_total`` along with weight ``src.weight(t)``;
    ``e_Z`` gets its own binomial error over the weighted sifted count.
    """
    tables = {
        "Q_Z_given": dict(stats.Q_Z_given),
        "E_X_given": dict(stats.E_X_given),
        "Q_cross_given": dict(stats.Q_cross_given),
    }

    def shifted(name: str, tag: Intensity | None, delta: float) -> ObservedStats:
        t = {k: dict(v) for k, v in tables.items()}
        q_tot, e_z = stats.Q_Z_total, stats.e_Z
        if name == "e_Z":
            e_z += delta
        else:
            t[name][tag] += delta
            if name == "Q_Z_given":
                q_tot += src.weight(tag) * delta
        return ObservedStats(t["Q_Z_given"], t["E_X_given"], t["Q_cross_given"], q_tot, e_z)

    inputs = [(name, tag, tables[name][tag], rounds[tag]) for name in tables for tag in INTENSITIES]
    n_sift = sum(
        rounds[t] * stats.Q_Z_given[t] for t in INTENSITIES if src.weight(t) > 0
    )
    inputs.append(("e_Z", None, stats.e_Z, int(n_sift)))
    var = 0.0
    for name, tag, value, n in inputs:
        sigma = binomial_sigma(value, n)
        if sigma == 0.0:
            continue
        h = max(abs(value) * rel_step, 1e-15)
        grad = (rate_fn(shifted(name, tag, h)) - rate_fn(shifted(name, tag, -min(h, value)))) / (
            h + min(h, value)
        )
        var += (grad * sigma) ** 2
    return math.sqrt(var)
