import dataclasses
import math

import numpy as np
import pytest

from passive_bb84.channel import ChannelModel, expected_stats
from passive_bb84.montecarlo import (
    EVENT_CLASSES,
    SimConfig,
    class_probabilities,
    compare,
    fixed_photon_ratio,
    rate_sigma,
    simulate,
)
from passive_bb84.model import INTENSITIES, Intensity, ReceiverModel, SourceModel, ValidationError

THIRDS = (1 / 3, 1 / 3, 1 / 3)


def test_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(0)
    with pytest.raises(ValidationError):
        SimConfig(10, resolve_photon_numbers=True, aggregated=True)


@pytest.mark.parametrize("aggregated", [True, False])
def test_deterministic(preset_receiver, preset_source, aggregated):
    cfg = SimConfig(20_000, seed=11, aggregated=aggregated, intensity_probs=THIRDS)
    ch = ChannelModel(10.0)
    a = simulate(cfg, ch, preset_receiver, preset_source)
    b = simulate(cfg, ch, preset_receiver, preset_source)
    assert a.counts == b.counts and a.stats == b.stats
    c = simulate(dataclasses.replace(cfg, seed=12), ch, preset_receiver, preset_source)
    assert c.counts != a.counts


@pytest.mark.parametrize("aggregated", [True, False])
def test_event_classes_partition_rounds(preset_receiver, preset_source, aggregated):
    cfg = SimConfig(50_001, seed=3, aggregated=aggregated, intensity_probs=THIRDS)
    res = simulate(cfg, ChannelModel(0.0), preset_receiver, preset_source)
    assert sum(res.rounds.values()) == 50_001
    for tag in INTENSITIES:
        total = sum(sum(res.counts[tag][b].values()) for b in ("Z", "X"))
        assert total == res.rounds[tag]
        assert set(res.counts[tag]["Z"]) == set(EVENT_CLASSES)


def test_class_probabilities_sum_to_one(preset_receiver):
    for basis in ("Z", "X"):
        p = class_probabilities(0.3, basis, 0.03, preset_receiver)
        assert p.sum() == pytest.approx(1.0, abs=1e-15)
        assert (p >= 0).all()


def test_vacuum_like_source():
    m = ReceiverModel(p_Z=0.9, d=0.0, eta_Z=0.7, eta_X=0.7)
    src = SourceModel(mu=1e-6, nu=5e-7)
    res = simulate(SimConfig(1_000_000, seed=1, aggregated=False), ChannelModel(0.0), m, src)
    clicks = sum(
        res.counts[t][b][k] for t in INTENSITIES for b in ("Z", "X")
        for k in EVENT_CLASSES if k != "no_click"
    )
    assert clicks <= 10


def test_per_round_matches_expected(preset_receiver, preset_source):
    ch = ChannelModel(0.0)
    cfg = SimConfig(1_000_000, seed=5, aggregated=False, intensity_probs=THIRDS)
    res = simulate(cfg, ch, preset_receiver, preset_source)
    zs = compare(res, expected_stats(ch, preset_receiver, preset_source), preset_source)
    assert not any(z.flagged for z in zs)
    assert max(abs(z.z) for z in zs) < 4.5


def test_per_round_and_aggregated_agree(preset_receiver, preset_source):
    ch = ChannelModel(20.0)
    n = 1_000_000
    a = simulate(SimConfig(n, seed=9, intensity_probs=THIRDS), ch, preset_receiver, preset_source)
    b = simulate(SimConfig(n, seed=9, aggregated=False, intensity_probs=THIRDS), ch,
                 preset_receiver, preset_source)
    for tag in INTENSITIES:
        for name in ("Q_Z_given", "Q_cross_given", "E_X_given"):
            pa, pb = getattr(a.stats, name)[tag], getattr(b.stats, name)[tag]
            pooled = (pa + pb) / 2
            sigma = math.sqrt(pooled * (1 - pooled) * (1 / a.rounds[tag] + 1 / b.rounds[tag]))
            if sigma > 0:
                assert abs(pa - pb) < 5 * sigma


def test_compare_flags_perturbed_cell(preset_receiver, preset_source):
    ch = ChannelModel(0.0)
    res = simulate(SimConfig(10_000_000, seed=2, intensity_probs=THIRDS), ch,
                   preset_receiver, preset_source)
    exp = expected_stats(ch, preset_receiver, preset_source)
    base = compare(res, exp, preset_source)
    assert all(math.isfinite(z.z) for z in base)
    assert not any(z.flagged for z in base)
    sig = next(z for z in base if z.name == "Q_Z[signal]").sigma
    q = dict(exp.Q_Z_given)
    q[Intensity.SIGNAL] += 10 * sig
    bumped = dataclasses.replace(exp, Q_Z_given=q)
    flagged = {z.name for z in compare(res, bumped, preset_source) if z.flagged}
    assert "Q_Z[signal]" in flagged


def test_compare_zero_variance_mismatch(preset_receiver, preset_source):
    ch = ChannelModel(0.0)
    m = dataclasses.replace(preset_receiver, d=0.0)
    res = simulate(SimConfig(1000, seed=2, intensity_probs=THIRDS), ch, m, preset_source)
    exp = expected_stats(ch, m, preset_source)
    q = dict(exp.Q_cross_given)
    assert q[Intensity.VACUUM] == 0.0
    bogus = dict(res.stats.Q_cross_given)
    bogus[Intensity.VACUUM] = 0.5
    sim = dataclasses.replace(res, stats=dataclasses.replace(res.stats, Q_cross_given=bogus))
    with pytest.raises(ValidationError):
        compare(sim, exp, preset_source)


def test_resolved_diagnostics(preset_receiver, preset_source):
    cfg = SimConfig(200_000, seed=4, aggregated=False, resolve_photon_numbers=True,
                    intensity_probs=THIRDS)
    res = simulate(cfg, ChannelModel(0.0), preset_receiver, preset_source)
    assert sum(res.diagnostics.values()) == 200_000
    assert all(n_B <= n_A for n_A, n_B, _ in res.diagnostics)


@pytest.mark.parametrize("n_B", [1, 2])
def test_fixed_photon_ratio_law(n_B):
    m = ReceiverModel(p_Z=0.7, d=0.0, eta_Z=1.0, eta_X=1.0)
    diag = fixed_photon_ratio(n_B, m, 0.7, 400_000, seed=n_B)
    assert diag.predicted == pytest.approx((0.7 / 0.3) ** (n_B + 1))
    assert abs(diag.z) < 4


def test_rate_sigma_positive_and_small(preset_receiver, preset_source):
    from passive_bb84.keyrate import passive_rate

    ch = ChannelModel(0.0)
    exp = expected_stats(ch, preset_receiver, preset_source)
    rounds = dict.fromkeys(INTENSITIES, 10**8)
    s = rate_sigma(exp, rounds, preset_source,
                   lambda st: passive_rate(st, preset_receiver, preset_source).R)
    assert 0 < s < 1e-3
