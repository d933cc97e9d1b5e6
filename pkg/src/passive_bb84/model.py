"""Protocol parameters and observed statistics.

Every other module consumes these value types. All of them are frozen
dataclasses, so a validated model can be shared freely between workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Any, Mapping


class ValidationError(ValueError):
    """Raised when a parameter lies outside its allowed range."""


class Intensity(str, enum.Enum):
    """Tag of the three source intensities; used as exact map keys."""

    SIGNAL = "signal"
    DECOY = "decoy"
    VACUUM = "vacuum"


INTENSITIES = (Intensity.SIGNAL, Intensity.DECOY, Intensity.VACUUM)


def _check_probability(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValidationError(f"{name}={value!r} is not a probability")


@dataclass(frozen=True)
class ReceiverModel:
    """Bob's passive receiver.

    Attributes:
        p_Z: splitting ratio towards the Z line (``p_X = 1 - p_Z``).
        d: dark-count probability per pulse per detector.
        eta_Z: overall Z-line transmittance including detector efficiency.
        eta_X: overall X-line transmittance including detector efficiency.
    """

    p_Z: float
    d: float
    eta_Z: float
    eta_X: float

    @property
    def p_X(self) -> float:
        return 1.0 - self.p_Z

    @property
    def r(self) -> float:
        """Transmittance asymmetry ``eta_X / eta_Z``."""
        return self.eta_X / self.eta_Z


@dataclass(frozen=True)
class SplittingProbs:
    """Splitting ratios of the virtual lossless three-way splitter."""

    pZp: float
    pXp: float
    pL: float


@dataclass(frozen=True)
class SourceModel:
    """Alice's weak coherent source.

    ``p_mu``, ``p_nu`` and ``p_0`` weight the intensities in the key rate.
    Setting ``p_mu = 1`` gives the asymptotic preset in which decoy rounds
    cost nothing but their gains are still observed.
    """

    mu: float
    nu: float
    p_mu: float = 1.0
    p_nu: float = 0.0
    p_0: float = 0.0
    p_Z_alice: float = 0.5

    @property
    def p_X_alice(self) -> float:
        return 1.0 - self.p_Z_alice

    def mean(self, tag: Intensity) -> float:
        return {Intensity.SIGNAL: self.mu, Intensity.DECOY: self.nu, Intensity.VACUUM: 0.0}[
            Intensity(tag)
        ]

    def weight(self, tag: Intensity) -> float:
        return {Intensity.SIGNAL: self.p_mu, Intensity.DECOY: self.p_nu, Intensity.VACUUM: self.p_0}[
            Intensity(tag)
        ]


@dataclass(frozen=True)
class ObservedStats:
    """Observed fractions per non-sampling round.

    ``Q_Z_given``, ``E_X_given`` and ``Q_cross_given`` are keyed by
    :class:`Intensity`. ``Q_Z_total`` is the sifted-key fraction over all
    intensities and ``e_Z`` the Z-basis bit-error rate.
    """

    Q_Z_given: Mapping[Intensity, float]
    E_X_given: Mapping[Intensity, float]
    Q_cross_given: Mapping[Intensity, float]
    Q_Z_total: float
    e_Z: float

    def __post_init__(self) -> None:
        for name in ("Q_Z_given", "E_X_given", "Q_cross_given"):
            table = {Intensity(k): float(v) for k, v in getattr(self, name).items()}
            for tag, value in table.items():
                _check_probability(f"{name}[{tag.value}]", value)
            object.__setattr__(self, name, table)
        _check_probability("Q_Z_total", self.Q_Z_total)
        _check_probability("e_Z", self.e_Z)

    def scaled(self, t: float) -> "ObservedStats":
        """All fractions multiplied by ``t`` (``e_Z`` is a ratio and stays)."""
        return ObservedStats(
            {k: t * v for k, v in self.Q_Z_given.items()},
            {k: t * v for k, v in self.E_X_given.items()},
            {k: t * v for k, v in self.Q_cross_given.items()},
            t * self.Q_Z_total,
            self.e_Z,
        )


def validate_receiver(raw: ReceiverModel) -> ReceiverModel:
    """Check the receiver constraints and return the model unchanged."""
    _check_probability("p_Z", raw.p_Z)
    _check_probability("d", raw.d)
    if raw.p_Z < 0.5 or raw.p_Z >= 1.0:
        raise ValidationError(f"p_Z={raw.p_Z!r} must satisfy 0.5 <= p_Z < 1")
    if not (0.0 < raw.eta_Z <= 1.0):
        raise ValidationError(f"eta_Z={raw.eta_Z!r} must lie in (0, 1]")
    if not (0.0 < raw.eta_X <= raw.eta_Z):
        raise ValidationError(f"eta_X={raw.eta_X!r} must lie in (0, eta_Z={raw.eta_Z!r}]")
    return raw


def validate_source(raw: SourceModel, *, nu2: float | None = None) -> SourceModel:
    """Check intensities and selection probabilities.

    ``nu2`` switches on the two-decoy premise ``nu > nu2 >= 0`` and
    ``nu + nu2 < mu``.
    """
    if not (raw.mu > raw.nu > 0.0):
        raise ValidationError(f"need mu > nu > 0, got mu={raw.mu!r}, nu={raw.nu!r}")
    for name in ("p_mu", "p_nu", "p_0", "p_Z_alice"):
        _check_probability(name, getattr(raw, name))
    if abs(raw.p_mu + raw.p_nu + raw.p_0 - 1.0) > 1e-12:
        raise ValidationError("p_mu + p_nu + p_0 must equal 1")
    if raw.p_Z_alice < 0.5:
        raise ValidationError(f"p_Z_alice={raw.p_Z_alice!r} must be >= 0.5")
    if nu2 is not None and not (raw.nu > nu2 >= 0.0 and raw.nu + nu2 < raw.mu):
        raise ValidationError("two-decoy premise violated: need nu > nu2 >= 0 and nu + nu2 < mu")
    return raw


def splitting_probs(m: ReceiverModel) -> SplittingProbs:
    pZp = m.p_Z
    pXp = m.p_X * m.r
    # 1 - pZp - pXp written so that r == 1 gives exactly zero
    pL = m.p_X * (1.0 - m.r)
    return SplittingProbs(pZp, pXp, pL)


def _from_mapping(cls: type, data: Mapping[str, Any]) -> Any:
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    try:
        return cls(**{k: float(v) for k, v in data.items()})
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


def receiver_from_dict(data: Mapping[str, Any]) -> ReceiverModel:
    return validate_receiver(_from_mapping(ReceiverModel, data))


def source_from_dict(data: Mapping[str, Any]) -> SourceModel:
    return validate_source(_from_mapping(SourceModel, data))
