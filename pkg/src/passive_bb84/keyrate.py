"""Key-rate engine: passive rate, virtual rate and an active comparator."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from passive_bb84.decoy import DecoyEstimates, estimate
from passive_bb84.model import ObservedStats, ReceiverModel, SourceModel, ValidationError
from passive_bb84.splitter_povm import AlphaUndefinedError, SiftingProbs, alpha, sifting_probs

C_EC_DEFAULT = 1.1


def binary_entropy(x: float) -> float:
    if not (0.0 <= x <= 1.0):
        raise ValidationError(f"binary entropy argument {x!r} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class RateReport:
    R: float
    f_PA: float
    f_EC: float
    h_arg: float
    valid: bool
    alpha_term: float
    QZ0_low: float
    effective_gain: float
    entropy_penalty: float
    kind: str = "passive"
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def validity(est: DecoyEstimates, sift: SiftingProbs, src: SourceModel, a: float) -> bool:
    """Sufficient condition keeping the entropy argument in ``[0, 1/2]``."""
    gain = est.QZ1_low - a * est.Qcross1_up
    if gain <= 0.0:
        return False
    lhs = src.p_Z_alice * sift.pt_Z / (src.p_X_alice * sift.pt_X) * est.EX1_up
    return lhs <= 0.5 * gain


def _assemble(
    est: DecoyEstimates,
    obs: ObservedStats,
    bias: float,
    penalty: float,
    c_EC: float,
    kind: str,
    reason: str = "",
) -> RateReport:
    """Common tail of every rate: ``bias`` multiplies the X-error bound."""
    f_EC = c_EC * obs.Q_Z_total * binary_entropy(obs.e_Z)
    gain = est.QZ1_low - penalty
    if reason:
        return RateReport(0.0, obs.Q_Z_total, f_EC, math.nan, False, penalty,
                          est.QZ0_low, gain, math.nan, kind, reason)
    if gain <= 0.0:
        return RateReport(0.0, obs.Q_Z_total, f_EC, math.nan, False, penalty,
                          est.QZ0_low, gain, math.nan, kind, "nonpositive effective gain")
    h_arg = bias * est.EX1_up / gain
    if h_arg > 0.5:
        return RateReport(0.0, obs.Q_Z_total, f_EC, h_arg, False, penalty,
                          est.QZ0_low, gain, math.nan, kind, "entropy argument above 1/2")
    ent = gain * binary_entropy(h_arg)
    R = est.QZ0_low + gain - ent - f_EC
    f_PA = obs.Q_Z_total - est.QZ0_low - gain + ent
    if R <= 0.0:
        return RateReport(0.0, f_PA, f_EC, h_arg, False, penalty,
                          est.QZ0_low, gain, ent, kind, "nonpositive rate")
    return RateReport(R, f_PA, f_EC, h_arg, True, penalty, est.QZ0_low, gain, ent, kind)


def passive_rate(
    obs: ObservedStats,
    m: ReceiverModel,
    src: SourceModel,
    c_EC: float = C_EC_DEFAULT,
    *,
    virtual: bool = False,
) -> RateReport:
    """Rate per non-sampling round; failures are reported with ``R = 0``."""
    est = estimate(obs, src)
    kind = "virtual" if virtual else "passive"
    try:
        a = alpha(m, src.p_Z_alice)
        sift = sifting_probs(m)
    except (AlphaUndefinedError, ValidationError) as exc:
        return _assemble(est, obs, math.nan, 0.0, c_EC, kind, str(exc))
    bias = src.p_Z_alice * sift.pt_Z / (src.p_X_alice * sift.pt_X)
    penalty = 0.0 if virtual else a * est.Qcross1_up
    return _assemble(est, obs, bias, penalty, c_EC, kind)


def virtual_rate(
    obs: ObservedStats, m: ReceiverModel, src: SourceModel, c_EC: float = C_EC_DEFAULT
) -> RateReport:
    """Same as :func:`passive_rate` without the multi-photon penalty."""
    return passive_rate(obs, m, src, c_EC, virtual=True)


def active_rate(
    obs: ObservedStats, src: SourceModel, c_EC: float = C_EC_DEFAULT, p_Z_bob: float | None = None
) -> RateReport:
    """Comparator rate of an active-biased receiver (reconstruction).

    Uses the same decoy bounds with Bob's own basis probabilities in place
    of the passive effective ones and no cross-click penalty.
    """
    pzb = src.p_Z_alice if p_Z_bob is None else p_Z_bob
    est = estimate(obs, src)
    bias = src.p_Z_alice * pzb / (src.p_X_alice * (1.0 - pzb))
    return _assemble(est, obs, bias, 0.0, c_EC, "active (reconstructed)")
