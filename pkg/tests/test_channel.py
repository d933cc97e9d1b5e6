import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from passive_bb84.channel import (
    ChannelModel,
    active_expected_stats,
    click_prob,
    expected_stats,
    fiber_transmittance,
)
from passive_bb84.model import INTENSITIES, Intensity, ReceiverModel, SourceModel, ValidationError


def test_fiber_transmittance():
    assert fiber_transmittance(0) == 1.0
    assert fiber_transmittance(50) == pytest.approx(0.1, rel=1e-15)
    assert fiber_transmittance(100) == pytest.approx(0.01, rel=1e-15)
    assert ChannelModel(100.0).eta_ch == pytest.approx(0.01, rel=1e-15)
    with pytest.raises(ValidationError):
        fiber_transmittance(-1)


def test_channel_model_validation():
    with pytest.raises(ValidationError):
        ChannelModel(-5.0)
    with pytest.raises(ValidationError):
        ChannelModel(0.0, e_ch=0.6)


def test_click_prob():
    assert click_prob(0.0, 0.0) == 0.0
    assert click_prob(0.0, 1e-3) == pytest.approx(1e-3, rel=1e-12)
    assert click_prob(math.log(2), 0.0) == pytest.approx(0.5, rel=1e-15)


def test_vacuum_source_dark():
    m = ReceiverModel(p_Z=0.9, d=0.0, eta_Z=0.7, eta_X=0.7)
    src = SourceModel(mu=0.5, nu=0.05)
    obs = expected_stats(ChannelModel(0.0), m, src)
    v = Intensity.VACUUM
    assert obs.Q_Z_given[v] == obs.E_X_given[v] == obs.Q_cross_given[v] == 0.0


def test_noiseless_channel():
    m = ReceiverModel(p_Z=0.8, d=0.0, eta_Z=0.7, eta_X=0.6)
    src = SourceModel(mu=0.5, nu=0.05, p_Z_alice=0.8)
    ch = ChannelModel(10.0, e_ch=0.0)
    obs = expected_stats(ch, m, src)
    assert obs.e_Z == 0.0
    lam_z = ch.eta_ch * m.p_Z * m.eta_Z
    lam_x = ch.eta_ch * m.p_X * m.eta_X
    for tag in INTENSITIES:
        assert obs.E_X_given[tag] == 0.0
        mu = src.mean(tag)
        want = (1 - math.exp(-mu * lam_z)) * (1 - math.exp(-mu * lam_x))
        assert obs.Q_cross_given[tag] == pytest.approx(want, rel=1e-12, abs=1e-300)
        if mu > 0:
            assert obs.Q_cross_given[tag] > 0


def test_active_examples():
    m = ReceiverModel(p_Z=0.85, d=0.0, eta_Z=0.7, eta_X=0.7)
    src = SourceModel(mu=0.5, nu=0.05, p_Z_alice=0.9)
    ch = ChannelModel(20.0, e_ch=0.0)
    obs = active_expected_stats(ch, m, src, p_Z_bob=0.8)
    for tag in INTENSITIES:
        want = 0.9 * 0.8 * (1 - math.exp(-src.mean(tag) * ch.eta_ch * 0.7))
        assert obs.Q_Z_given[tag] == pytest.approx(want, rel=1e-12, abs=1e-300)
        assert obs.Q_cross_given[tag] == 0.0
    assert active_expected_stats(ch, m, src).Q_Z_given[Intensity.VACUUM] == 0.0
    depol = active_expected_stats(ChannelModel(20.0, e_ch=0.5), m, src)
    assert depol.e_Z == pytest.approx(0.5, rel=1e-12)


def test_passive_and_active_agree_for_weak_light():
    m = ReceiverModel(p_Z=0.9, d=0.0, eta_Z=0.7, eta_X=0.7)
    src = SourceModel(mu=1e-4, nu=1e-5, p_Z_alice=0.9)
    ch = ChannelModel(0.0)
    p = expected_stats(ch, m, src).Q_Z_given[Intensity.SIGNAL]
    a = active_expected_stats(ch, m, src).Q_Z_given[Intensity.SIGNAL]
    assert p == pytest.approx(a, rel=1e-4)


@settings(deadline=None, max_examples=60)
@given(st.floats(0.5, 0.99), st.floats(0.01, 1.0), st.floats(0.0, 0.1),
       st.floats(0.0, 0.5), st.floats(0.06, 2.0))
def test_fractions_bounded_and_monotone(p_Z, r, d, e_ch, mu):
    m = ReceiverModel(p_Z=p_Z, d=d, eta_Z=0.7, eta_X=0.7 * r)
    src = SourceModel(mu=mu, nu=0.05, p_Z_alice=p_Z)
    prev = None
    for l in np.linspace(0, 300, 13):
        obs = expected_stats(ChannelModel(float(l), e_ch), m, src)
        for tag in INTENSITIES:
            for table in (obs.Q_Z_given, obs.E_X_given, obs.Q_cross_given):
                assert 0.0 <= table[tag] <= 1.0
        assert 0.0 <= obs.e_Z <= 1.0
        if prev is not None:
            for tag in INTENSITIES:
                assert obs.Q_Z_given[tag] <= prev.Q_Z_given[tag] * (1 + 1e-12) + 1e-18
        prev = obs


def test_cross_floor_is_dark_counts():
    d = 1e-5
    m = ReceiverModel(p_Z=0.9, d=d, eta_Z=0.7, eta_X=0.7)
    obs = expected_stats(ChannelModel(2000.0), m, SourceModel(0.5, 0.05))
    floor = (1 - (1 - d) ** 2) ** 2
    assert obs.Q_cross_given[Intensity.SIGNAL] == pytest.approx(floor, rel=1e-6)
