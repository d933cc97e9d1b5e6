import pytest
from hypothesis import given, strategies as st

from passive_bb84.model import (
    Intensity,
    ObservedStats,
    ReceiverModel,
    SourceModel,
    ValidationError,
    splitting_probs,
    validate_receiver,
    validate_source,
)


def test_preset_receiver_is_valid():
    m = validate_receiver(ReceiverModel(p_Z=0.9, d=1e-7, eta_Z=0.7, eta_X=0.7))
    assert m.r == 1.0


def test_balanced_boundary_is_valid():
    m = validate_receiver(ReceiverModel(p_Z=0.5, d=0.0, eta_Z=1.0, eta_X=1.0))
    assert m.r == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(p_Z=0.4, d=0.0, eta_Z=1.0, eta_X=1.0),
        dict(p_Z=1.0, d=0.0, eta_Z=1.0, eta_X=1.0),
        dict(p_Z=0.9, d=1.5, eta_Z=1.0, eta_X=1.0),
        dict(p_Z=0.9, d=0.0, eta_Z=0.5, eta_X=0.7),
        dict(p_Z=0.9, d=0.0, eta_Z=1.0, eta_X=0.0),
        dict(p_Z=0.9, d=0.0, eta_Z=1.2, eta_X=1.0),
    ],
)
def test_invalid_receivers_rejected(kwargs):
    with pytest.raises(ValidationError):
        validate_receiver(ReceiverModel(**kwargs))


@pytest.mark.parametrize(
    "p_Z, r, expected",
    [
        (0.9, 1.0, (0.9, 0.1, 0.0)),
        (0.9, 0.5, (0.9, 0.05, 0.05)),
        (0.5, 0.5, (0.5, 0.25, 0.25)),
    ],
)
def test_splitting_probs_examples(p_Z, r, expected):
    s = splitting_probs(ReceiverModel(p_Z=p_Z, d=0.0, eta_Z=1.0, eta_X=r))
    assert (s.pZp, s.pXp, s.pL) == pytest.approx(expected, abs=1e-15)


models = st.builds(
    lambda p, r, eta, d: ReceiverModel(p_Z=p, d=d, eta_Z=eta, eta_X=eta * r),
    st.floats(0.5, 0.999),
    st.floats(1e-6, 1.0),
    st.floats(1e-3, 1.0),
    st.floats(0.0, 1.0),
)


@given(models)
def test_splitting_sums_to_one(m):
    s = splitting_probs(validate_receiver(m))
    assert abs(s.pZp + s.pXp + s.pL - 1.0) <= 1e-15
    assert min(s.pZp, s.pXp, s.pL) >= 0.0
    assert s.pZp >= s.pXp


@given(st.floats(0.5, 0.999))
def test_unit_r_has_no_loss_line(p_Z):
    assert splitting_probs(ReceiverModel(p_Z, 0.0, 0.8, 0.8)).pL == 0.0


def test_source_validation():
    validate_source(SourceModel(mu=0.5, nu=0.05, p_mu=0.8, p_nu=0.1, p_0=0.1))
    with pytest.raises(ValidationError):
        validate_source(SourceModel(mu=0.05, nu=0.5))
    with pytest.raises(ValidationError):
        validate_source(SourceModel(mu=0.5, nu=0.05, p_mu=0.5, p_nu=0.1, p_0=0.1))
    with pytest.raises(ValidationError):
        validate_source(SourceModel(mu=0.5, nu=0.3), nu2=0.25)
    validate_source(SourceModel(mu=0.5, nu=0.3), nu2=0.1)


def test_stats_keys_are_tags():
    obs = ObservedStats({"signal": 0.1, "decoy": 0.01, "vacuum": 0.0}, {}, {}, 0.1, 0.02)
    assert obs.Q_Z_given[Intensity.DECOY] == 0.01
    with pytest.raises(ValidationError):
        ObservedStats({"signal": 1.5}, {}, {}, 0.1, 0.02)
