"""Bob's virtual three-way splitter and its POVMs.

Two routes to the same operators live here:

* a brute-force Fock-space oracle that expands the splitter unitary on
  every occupation state and pushes the detection projectors back onto the
  input modes (``pushforward_povm``), and
* the closed forms (``closed_form_povm``, ``single_photon_povms``).

Operators on system B are dense real matrices over the occupation states
``(m_H, m_V)`` with ``m_H + m_V = n_B`` in lexicographic order.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from passive_bb84.model import ReceiverModel, SplittingProbs, ValidationError, splitting_probs

N_MAX_DEFAULT = 4
N_MAX_LIMIT = 8


class AlphaUndefinedError(ValueError):
    """The multi-photon coefficient has a nonpositive denominator."""


class Outcome(str, enum.Enum):
    Z_KEY = "Z-key"
    X_KEY = "X-key"
    NO_CLICK = "no-click"
    CROSS = "cross"


OUTCOMES = (Outcome.Z_KEY, Outcome.X_KEY, Outcome.NO_CLICK, Outcome.CROSS)
SINGLE_PHOTON_LABELS = ("G_Z0", "G_Z1", "G_X0", "G_X1", "G_fail")


@dataclass(frozen=True)
class OccupationB:
    m_H: int
    m_V: int


@dataclass(frozen=True)
class OccupationZXL:
    m_ZH: int
    m_ZV: int
    m_XH: int
    m_XV: int
    m_LH: int
    m_LV: int

    @property
    def n_Z(self) -> int:
        return self.m_ZH + self.m_ZV

    @property
    def n_X(self) -> int:
        return self.m_XH + self.m_XV


@dataclass(frozen=True)
class FockOperator:
    n_B: int
    basis: tuple[OccupationB, ...]
    entries: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        if self.entries.shape != (self.n_B + 1, self.n_B + 1):
            raise ValueError(f"expected a {self.n_B + 1}x{self.n_B + 1} matrix")
        if not np.allclose(self.entries, self.entries.T, rtol=0.0, atol=1e-12):
            raise ValueError("operator is not Hermitian")


@dataclass(frozen=True)
class SiftingProbs:
    s_Z: float
    s_X: float
    pt_Z: float
    pt_X: float


def b_basis(n_B: int) -> tuple[OccupationB, ...]:
    return tuple(OccupationB(m_H, n_B - m_H) for m_H in range(n_B + 1))


@lru_cache(maxsize=None)
def zxl_basis(n_B: int) -> tuple[OccupationZXL, ...]:
    """All six-mode occupations with ``n_B`` photons, lexicographic."""
    return tuple(
        OccupationZXL(*occ)
        for occ in itertools.product(range(n_B + 1), repeat=6)
        if sum(occ) == n_B
    )


def _multinomial(n: int, parts: tuple[int, ...]) -> int:
    out = math.factorial(n)
    for k in parts:
        out //= math.factorial(k)
    return out


def splitter_amplitude(src: OccupationB, dst: OccupationZXL, s: SplittingProbs) -> float:
    """``<dst| U |src, vac>`` for the lossless three-way splitter.

    Each polarization sector expands independently; photon numbers that do
    not match give zero.
    """
    amp = 1.0
    for m, (i, j, k) in (
        (src.m_H, (dst.m_ZH, dst.m_XH, dst.m_LH)),
        (src.m_V, (dst.m_ZV, dst.m_XV, dst.m_LV)),
    ):
        if i + j + k != m:
            return 0.0
        amp *= math.sqrt(_multinomial(m, (i, j, k)))
        amp *= math.sqrt(s.pZp) ** i * math.sqrt(s.pXp) ** j * math.sqrt(s.pL) ** k
    return amp


def splitter_matrix(n_B: int, s: SplittingProbs) -> np.ndarray:
    """Rows: six-mode occupations; columns: system-B occupations."""
    src = b_basis(n_B)
    dst = zxl_basis(n_B)
    return np.array([[splitter_amplitude(a, k, s) for a in src] for k in dst])


def _line_event_weights(n_Z: int, n_X: int, d: float) -> dict[Outcome, float]:
    """Outcome probabilities given the photon count in each line.

    With unit efficiency a line with photons always clicks; an empty line
    clicks only through dark counts of its two detectors.
    """
    quiet = (1.0 - d) ** 2
    z_silent = quiet if n_Z == 0 else 0.0
    x_silent = quiet if n_X == 0 else 0.0
    return {
        Outcome.Z_KEY: (1.0 - z_silent) * x_silent,
        Outcome.X_KEY: z_silent * (1.0 - x_silent),
        Outcome.NO_CLICK: z_silent * x_silent,
        Outcome.CROSS: (1.0 - z_silent) * (1.0 - x_silent),
    }


def _check_n(n_B: int, n_max: int) -> None:
    if n_max > N_MAX_LIMIT:
        raise ValidationError(f"n_max={n_max} exceeds the supported limit {N_MAX_LIMIT}")
    if not (1 <= n_B <= n_max):
        raise ValidationError(f"n_B={n_B} outside [1, {n_max}]")


def pushforward_povm(
    n_B: int,
    outcome: Outcome | str,
    m: ReceiverModel,
    *,
    n_max: int = N_MAX_DEFAULT,
    direct_cross: bool = False,
) -> FockOperator:
    """Push a line-level outcome projector through the splitter onto B.

    The cross element is ``1 - Z - X - no-click`` unless ``direct_cross`` is
    set, in which case it is enumerated from the cross-click patterns.
    """
    _check_n(n_B, n_max)
    outcome = Outcome(outcome)
    s = splitting_probs(m)
    M = splitter_matrix(n_B, s)

    def pushed(which: Outcome) -> np.ndarray:
        w = np.array([_line_event_weights(k.n_Z, k.n_X, m.d)[which] for k in zxl_basis(n_B)])
        return M.T @ (w[:, None] * M)

    if outcome is Outcome.CROSS and not direct_cross:
        entries = np.eye(n_B + 1) - sum(pushed(o) for o in OUTCOMES[:3])
    else:
        entries = pushed(outcome)
    entries = 0.5 * (entries + entries.T)
    return FockOperator(n_B, b_basis(n_B), entries, outcome.value)


def closed_form_povm(n_B: int, outcome: Outcome | str, m: ReceiverModel) -> float:
    """Scalar ``c`` with the n_B-photon element equal to ``c`` times identity."""
    if n_B < 2:
        raise ValidationError("closed_form_povm needs n_B >= 2; use single_photon_povms")
    return conditional_event_probs(n_B, m)[Outcome(outcome)]


def conditional_event_probs(n_B: int, m: ReceiverModel) -> dict[Outcome, float]:
    """Outcome probabilities given ``n_B`` photons at Bob (state independent)."""
    if n_B < 1:
        raise ValidationError("n_B must be >= 1")
    s = splitting_probs(m)
    q = (1.0 - m.d) ** 2
    lost = s.pL**n_B
    z = q * ((s.pZp + s.pL) ** n_B - q * lost)
    x = q * ((s.pXp + s.pL) ** n_B - q * lost)
    nc = q * q * lost
    cross = 1.0 - q * ((s.pZp + s.pL) ** n_B + (s.pXp + s.pL) ** n_B - q * lost)
    return {Outcome.Z_KEY: z, Outcome.X_KEY: x, Outcome.NO_CLICK: nc, Outcome.CROSS: cross}


# single-photon basis is lexicographic: (m_H, m_V) = (0, 1), (1, 0)
_H = np.array([float(b == OccupationB(1, 0)) for b in b_basis(1)])
_V = np.array([float(b == OccupationB(0, 1)) for b in b_basis(1)])
_D = (_H + _V) / math.sqrt(2.0)
_DBAR = (_H - _V) / math.sqrt(2.0)


def _proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v)


def single_photon_parts(m: ReceiverModel) -> dict[str, np.ndarray]:
    """Closed-form single-photon elements, with no-click and cross kept apart."""
    s = splitting_probs(m)
    d = m.d
    one = np.eye(2)
    zdouble = (s.pZp * d + s.pL * d * d) * (1 - d) ** 2 * one
    xdouble = (s.pXp * d + s.pL * d * d) * (1 - d) ** 2 * one
    parts = {
        "F_Z0": (s.pZp * _proj(_H) + s.pL * d * one) * (1 - d) ** 3,
        "F_Z1": (s.pZp * _proj(_V) + s.pL * d * one) * (1 - d) ** 3,
        "F_X0": (s.pXp * _proj(_D) + s.pL * d * one) * (1 - d) ** 3,
        "F_X1": (s.pXp * _proj(_DBAR) + s.pL * d * one) * (1 - d) ** 3,
        "F_no-click": s.pL * (1 - d) ** 4 * one,
        "F_cross": (1 - (1 + 2 * s.pL * d - s.pL * d * d) * (1 - d) ** 2) * one,
    }
    parts["G_Z0"] = parts["F_Z0"] + 0.5 * zdouble
    parts["G_Z1"] = parts["F_Z1"] + 0.5 * zdouble
    parts["G_X0"] = parts["F_X0"] + 0.5 * xdouble
    parts["G_X1"] = parts["F_X1"] + 0.5 * xdouble
    parts["G_fail"] = parts["F_no-click"] + parts["F_cross"]
    return parts


def single_photon_povms(m: ReceiverModel) -> list[FockOperator]:
    """``[G_Z0, G_Z1, G_X0, G_X1, G_fail]`` on the single-photon subspace."""
    parts = single_photon_parts(m)
    return [FockOperator(1, b_basis(1), parts[k], k) for k in SINGLE_PHOTON_LABELS]


def _detector_outcomes(clicks: tuple[bool, bool, bool, bool]) -> dict[str, float]:
    """Announced outcome of one click pattern ``(ZH, ZV, XD, XDbar)``."""
    zh, zv, xd, xa = clicks
    z_any, x_any = zh or zv, xd or xa
    if z_any and x_any:
        return {"G_fail": 1.0}
    if not (z_any or x_any):
        return {"G_fail": 1.0}
    lo, hi = (zh, zv) if z_any else (xd, xa)
    prefix = "G_Z" if z_any else "G_X"
    if lo and hi:
        return {prefix + "0": 0.5, prefix + "1": 0.5}
    return {prefix + ("0" if lo else "1"): 1.0}


def pushforward_single_photon(m: ReceiverModel) -> list[FockOperator]:
    """Brute-force bit-resolved single-photon POVMs.

    The X line is rotated into its detector (D, D-bar) modes, every click
    pattern of the four detectors is enumerated with its dark-count
    probability and classified with the receiver's announcement rules.
    """
    s = splitting_probs(m)
    M_hv = splitter_matrix(1, s)
    # detector modes: ZH, ZV, XD, XDbar, LH, LV
    order = {k: i for i, k in enumerate(zxl_basis(1))}

    def row(**occ: int) -> np.ndarray:
        full = dict.fromkeys(("m_ZH", "m_ZV", "m_XH", "m_XV", "m_LH", "m_LV"), 0) | occ
        return M_hv[order[OccupationZXL(**full)]]

    xh, xv = row(m_XH=1), row(m_XV=1)
    M = np.vstack([
        row(m_ZH=1),
        row(m_ZV=1),
        (xh + xv) / math.sqrt(2.0),
        (xh - xv) / math.sqrt(2.0),
        row(m_LH=1),
        row(m_LV=1),
    ])
    d = m.d
    weights = {k: np.zeros(6) for k in SINGLE_PHOTON_LABELS}
    for mode in range(6):
        lit = [mode == i for i in range(4)]
        for dark in itertools.product((False, True), repeat=4):
            if any(lt and dk for lt, dk in zip(lit, dark)):
                continue  # a lit detector clicks regardless of its dark count
            p = math.prod(
                (d if dk else 1.0 - d) for lt, dk in zip(lit, dark) if not lt
            )
            clicks = tuple(lt or dk for lt, dk in zip(lit, dark))
            for label, frac in _detector_outcomes(clicks).items():
                weights[label][mode] += p * frac
    ops = []
    for label in SINGLE_PHOTON_LABELS:
        entries = M.T @ (weights[label][:, None] * M)
        ops.append(FockOperator(1, b_basis(1), 0.5 * (entries + entries.T), label))
    return ops


def sifting_probs(m: ReceiverModel) -> SiftingProbs:
    s = splitting_probs(m)
    d = m.d
    dark = 2 * s.pL * d - s.pL * d * d
    s_Z = (s.pZp + dark) * (1 - d) ** 2
    s_X = (s.pXp + dark) * (1 - d) ** 2
    total = s_Z + s_X
    if total <= 0.0:
        raise ValidationError("s_Z + s_X = 0: no conclusive single-photon outcome")
    return SiftingProbs(s_Z, s_X, s_Z / total, s_X / total)


def alpha(m: ReceiverModel, p_Z_alice: float | None = None) -> float:
    """Coefficient bounding multi-photon Z keys by cross clicks.

    ``p_Z_alice`` defaults to the receiver's ``p_Z`` (one bias for both
    parties).

    Raises:
        AlphaUndefinedError: if ``1 - (pZp + pL)^2 - (pXp + pL)^2 <= 0``.
    """
    s = splitting_probs(m)
    pz = m.p_Z if p_Z_alice is None else p_Z_alice
    denom = 1.0 - (s.pZp + s.pL) ** 2 - (s.pXp + s.pL) ** 2
    if denom <= 0.0:
        raise AlphaUndefinedError(
            f"alpha-undefined: denominator {denom:.6g} <= 0 for p_Z={m.p_Z}, r={m.r}"
        )
    return pz * (s.pZp + s.pL) ** 2 / denom


def is_psd(op: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.linalg.eigvalsh(op).min() >= -tol)


def verify_case(n_B: int, m: ReceiverModel, n_max: int = N_MAX_DEFAULT) -> dict[str, float]:
    """Oracle-vs-closed-form deviations for one model at one photon number."""
    if n_B == 1:
        oracle = [op.entries for op in pushforward_single_photon(m)]
        closed = [op.entries for op in single_photon_povms(m)]
        dim = 2
    else:
        oracle = [pushforward_povm(n_B, o, m, n_max=n_max).entries for o in OUTCOMES]
        closed = [closed_form_povm(n_B, o, m) * np.eye(n_B + 1) for o in OUTCOMES]
        dim = n_B + 1
    return {
        "max_dev": max(float(np.abs(a - b).max()) for a, b in zip(oracle, closed)),
        "completeness": float(np.abs(sum(oracle) - np.eye(dim)).max()),
        "min_eig": min(float(np.linalg.eigvalsh(a).min()) for a in oracle),
    }
