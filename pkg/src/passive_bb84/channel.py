"""Honest fiber channel and the expected statistics it produces.

Detection model, formula by formula:

* Alice's pulse of mean ``mu_A`` reaches Bob with mean ``mu_A * eta_ch``.
* Misalignment rotates a fraction ``e_ch`` of the light into the
  orthogonal polarization before Bob's splitter, so both lines see it.
* The passive splitter sends ``p_Z`` of the light into the Z line (then
  ``eta_Z``) and ``p_X`` into the X line (then ``eta_X``). In the line that
  matches Alice's basis the light splits ``1 - e_ch`` / ``e_ch`` between the
  correct and wrong detector; in the other line it splits 50/50.
* Poissonian thinning makes the four detectors independent, each clicking
  with ``1 - (1 - d) exp(-lambda)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from passive_bb84.model import (
    INTENSITIES,
    Intensity,
    ObservedStats,
    ReceiverModel,
    SourceModel,
    ValidationError,
)


@dataclass(frozen=True)
class ChannelModel:
    length_km: float
    e_ch: float = 0.03
    km_per_decade: float = 50.0  # fiber length per factor-of-ten loss

    def __post_init__(self) -> None:
        if self.length_km < 0:
            raise ValidationError(f"negative fiber length {self.length_km}")
        if not (0.0 <= self.e_ch <= 0.5):
            raise ValidationError(f"e_ch={self.e_ch} outside [0, 1/2]")

    @property
    def eta_ch(self) -> float:
        return 10.0 ** (-self.length_km / self.km_per_decade)


@dataclass(frozen=True)
class LineClicks:
    """Click probabilities of the two detectors of one line."""

    correct: float
    wrong: float

    @property
    def any(self) -> float:
        return 1.0 - (1.0 - self.correct) * (1.0 - self.wrong)

    @property
    def error(self) -> float:
        """Probability of Bob's bit being wrong (double clicks split evenly)."""
        return self.wrong * (1.0 - self.correct) + 0.5 * self.wrong * self.correct

    @property
    def right(self) -> float:
        return self.correct * (1.0 - self.wrong) + 0.5 * self.wrong * self.correct


def fiber_transmittance(length_km: float) -> float:
    if length_km < 0:
        raise ValidationError(f"negative fiber length {length_km}")
    return 10.0 ** (-length_km / 50.0)


def click_prob(lam: float, d: float) -> float:
    if lam < 0:
        raise ValidationError(f"negative mean photon number {lam}")
    return 1.0 - (1.0 - d) * math.exp(-lam)


def _line(mean: float, matched: bool, e_ch: float, d: float) -> LineClicks:
    if matched:
        return LineClicks(click_prob(mean * (1 - e_ch), d), click_prob(mean * e_ch, d))
    half = click_prob(mean / 2, d)
    return LineClicks(half, half)


def passive_cell(
    mean_at_bob: float, alice_basis: str, e_ch: float, m: ReceiverModel
) -> tuple[LineClicks, LineClicks]:
    """Detector clicks of the (Z line, X line) for one Alice basis."""
    z_mean = mean_at_bob * m.p_Z * m.eta_Z
    x_mean = mean_at_bob * m.p_X * m.eta_X
    zl = _line(z_mean, alice_basis == "Z", e_ch, m.d)
    xl = _line(x_mean, alice_basis == "X", e_ch, m.d)
    return zl, xl


def _fractions(obs_z, obs_e, obs_c, sift_err, src: SourceModel) -> ObservedStats:
    q_total = sum(src.weight(t) * obs_z[t] for t in INTENSITIES)
    err_total = sum(src.weight(t) * sift_err[t] for t in INTENSITIES)
    e_Z = err_total / q_total if q_total > 0 else 0.0
    return ObservedStats(obs_z, obs_e, obs_c, q_total, e_Z)


def expected_stats(ch: ChannelModel, m: ReceiverModel, src: SourceModel) -> ObservedStats:
    """Expected observed fractions of the passive protocol."""
    qz, ex, qc, zerr = {}, {}, {}, {}
    for tag in INTENSITIES:
        mean = src.mean(tag) * ch.eta_ch
        zl, xl = passive_cell(mean, "Z", ch.e_ch, m)
        qz[tag] = src.p_Z_alice * zl.any * (1 - xl.any)
        zerr[tag] = src.p_Z_alice * zl.error * (1 - xl.any)
        cross_z = zl.any * xl.any
        zl, xl = passive_cell(mean, "X", ch.e_ch, m)
        ex[tag] = src.p_X_alice * (1 - zl.any) * xl.error
        qc[tag] = src.p_Z_alice * cross_z + src.p_X_alice * zl.any * xl.any
    return _fractions(qz, ex, qc, zerr, src)


def active_expected_stats(
    ch: ChannelModel, m: ReceiverModel, src: SourceModel, p_Z_bob: float | None = None
) -> ObservedStats:
    """Expected fractions for an active receiver with the Z-line hardware.

    Bob picks Z with ``p_Z_bob`` (default ``m.p_Z``) before detection, both
    bases see ``eta_Z`` and there is no cross-click category.
    """
    pzb = m.p_Z if p_Z_bob is None else p_Z_bob
    qz, ex, qc, zerr = {}, {}, {}, {}
    for tag in INTENSITIES:
        mean = src.mean(tag) * ch.eta_ch * m.eta_Z
        line = _line(mean, True, ch.e_ch, m.d)
        qz[tag] = src.p_Z_alice * pzb * line.any
        zerr[tag] = src.p_Z_alice * pzb * line.error
        ex[tag] = src.p_X_alice * (1 - pzb) * line.error
        qc[tag] = 0.0
    return _fractions(qz, ex, qc, zerr, src)
