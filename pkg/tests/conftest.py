import pytest

from passive_bb84.model import ReceiverModel, SourceModel


@pytest.fixture
def preset_receiver() -> ReceiverModel:
    return ReceiverModel(p_Z=0.9, d=1e-7, eta_Z=0.7, eta_X=0.7)


@pytest.fixture
def preset_source() -> SourceModel:
    return SourceModel(mu=0.5, nu=0.05, p_Z_alice=0.9)
