"""Decoy-state bounds with a signal, a weak decoy and (optionally) a vacuum.

The generic estimators take two decoy intensities ``nu1 > nu2 >= 0`` with
``nu1 + nu2 < mu``. :func:`estimate` is their ``(nu, 0)`` specialization,
dressed with the Poisson prefactors of the intensity mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import stats

from passive_bb84.model import Intensity, ObservedStats, SourceModel, ValidationError

TAIL_TOL = 1e-12


@dataclass(frozen=True)
class YieldProfile:
    """Photon-number-resolved yields of a synthetic channel, ``n = 0..N``."""

    Y_Z: np.ndarray
    Y_X_err: np.ndarray
    Y_cross: np.ndarray

    def __post_init__(self) -> None:
        for name in ("Y_Z", "Y_X_err", "Y_cross"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or np.any(arr < 0) or np.any(arr > 1):
                raise ValidationError(f"{name} must be a 1-d array of yields in [0, 1]")
            object.__setattr__(self, name, arr)
        if not (len(self.Y_Z) == len(self.Y_X_err) == len(self.Y_cross)):
            raise ValidationError("yield arrays must share a truncation")

    @property
    def N(self) -> int:
        return len(self.Y_Z) - 1


@dataclass(frozen=True)
class DecoyEstimates:
    QZ0_low: float
    QZ1_low: float
    EX1_up: float
    Qcross1_up: float


def poisson_gain(profile: YieldProfile, mu_A: float) -> tuple[float, float, float]:
    """Forward Poisson mixing ``sum_n Y_n mu^n e^-mu / n!`` for each class."""
    n = np.arange(profile.N + 1)
    tail = float(stats.poisson.sf(profile.N, mu_A)) if mu_A > 0 else 0.0
    if tail > TAIL_TOL:
        raise ValidationError(
            f"Poisson tail mass {tail:.3g} beyond N={profile.N} at mean {mu_A}"
        )
    w = stats.poisson.pmf(n, mu_A) if mu_A > 0 else (n == 0).astype(float)
    return (
        float(w @ profile.Y_Z),
        float(w @ profile.Y_X_err),
        float(w @ profile.Y_cross),
    )


def _check_pair(nu1: float, nu2: float) -> None:
    if not (nu1 > nu2 >= 0.0):
        raise ValidationError(f"need nu1 > nu2 >= 0, got nu1={nu1}, nu2={nu2}")


def lower_Y0(Q_at_nu1: float, Q_at_nu2: float, nu1: float, nu2: float) -> float:
    _check_pair(nu1, nu2)
    raw = (nu1 * Q_at_nu2 * math.exp(nu2) - nu2 * Q_at_nu1 * math.exp(nu1)) / (nu1 - nu2)
    return max(raw, 0.0)


def lower_Y1(
    Q_mu: float, Q_nu1: float, Q_nu2: float, Y0_low: float, mu: float, nu1: float, nu2: float
) -> float:
    _check_pair(nu1, nu2)
    if not nu1 + nu2 < mu:
        raise ValidationError(f"need nu1 + nu2 < mu, got {nu1} + {nu2} >= {mu}")
    pref = mu / (mu * nu1 - mu * nu2 - nu1**2 + nu2**2)
    raw = pref * (
        Q_nu1 * math.exp(nu1)
        - Q_nu2 * math.exp(nu2)
        - (nu1**2 - nu2**2) / mu**2 * (Q_mu * math.exp(mu) - Y0_low)
    )
    return max(raw, 0.0)


def upper_Y1_generic(F_nu1: float, F_nu2: float, nu1: float, nu2: float) -> float:
    """Upper bound on the single-photon yield of any Poisson-mixed event class."""
    _check_pair(nu1, nu2)
    return max((F_nu1 * math.exp(nu1) - F_nu2 * math.exp(nu2)) / (nu1 - nu2), 0.0)


def _need(table: Mapping[Intensity, float], name: str) -> tuple[float, float, float]:
    try:
        return tuple(table[t] for t in (Intensity.SIGNAL, Intensity.DECOY, Intensity.VACUUM))
    except KeyError as exc:
        raise ValidationError(f"{name} lacks intensity {exc.args[0].value!r}") from None


def estimate(obs: ObservedStats, src: SourceModel) -> DecoyEstimates:
    """The four bounds used by the key rate, decoy pair ``(nu, 0)``."""
    mu, nu = src.mu, src.nu
    qz_mu, qz_nu, qz_0 = _need(obs.Q_Z_given, "Q_Z_given")
    _, ex_nu, ex_0 = _need(obs.E_X_given, "E_X_given")
    _, qc_nu, qc_0 = _need(obs.Q_cross_given, "Q_cross_given")

    vac_weight = src.p_mu * math.exp(-mu) + src.p_nu * math.exp(-nu) + src.p_0
    one_weight = src.p_mu * math.exp(-mu) * mu + src.p_nu * math.exp(-nu) * nu

    y0 = lower_Y0(qz_nu, qz_0, nu, 0.0)
    return DecoyEstimates(
        QZ0_low=vac_weight * y0,
        QZ1_low=one_weight * lower_Y1(qz_mu, qz_nu, qz_0, y0, mu, nu, 0.0),
        EX1_up=one_weight * upper_Y1_generic(ex_nu, ex_0, nu, 0.0),
        Qcross1_up=one_weight * upper_Y1_generic(qc_nu, qc_0, nu, 0.0),
    )
