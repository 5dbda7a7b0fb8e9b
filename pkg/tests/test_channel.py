"""Channel model: decay profile, pathloss, tap statistics, substreams."""

import numpy as np
import pytest
from scipy import stats

from rakepower import (ApdpProfile, ChannelRealization, NetworkTopology,
                       sample_channel, sample_channel_bank, sample_topology,
                       substream, tap_variance)


def test_apdp_log_linear_decay():
    prof = ApdpProfile(path_count=200, decay_ratio=10.0)
    var = prof.tap_variances(1.0)
    assert var[0] == 1.0
    assert var[-1] == pytest.approx(0.1, rel=1e-12)
    # constant ratio between consecutive taps
    ratios = var[1:] / var[:-1]
    assert np.allclose(ratios, 10.0 ** (-1.0 / 199.0), rtol=1e-12)


def test_apdp_flat_profile():
    var = ApdpProfile(50, 1.0).tap_variances(0.7)
    assert np.allclose(var, 0.7, rtol=0, atol=0)


def test_apdp_single_path():
    assert ApdpProfile(1, 1.0).tap_variances(2.0) == pytest.approx([2.0])
    assert tap_variance(ApdpProfile(1), 2.0, 1) == 2.0


def test_tap_variance_matches_vector():
    prof = ApdpProfile(17, 31.0)
    var = prof.tap_variances(0.3)
    for l in range(1, 18):
        assert tap_variance(prof, 0.3, l) == pytest.approx(var[l - 1], rel=1e-15)
    with pytest.raises(IndexError):
        tap_variance(prof, 0.3, 18)
    with pytest.raises(IndexError):
        tap_variance(prof, 0.3, 0)


def test_apdp_rejects_increasing_profile():
    with pytest.raises(ValueError):
        ApdpProfile(10, 0.5)


def test_topology_pathloss_law():
    topo = NetworkTopology(distances=np.array([3.0, 10.0, 20.0]))
    assert np.allclose(topo.user_variances, 0.3 * topo.distances ** -2.0)
    assert topo.user_count == 3


def test_sample_topology_bounds():
    topo = sample_topology(500, 3.0, 20.0, substream(99, 0))
    assert topo.user_count == 500
    assert topo.distances.min() >= 3.0
    assert topo.distances.max() <= 20.0


def test_channel_gain_is_energy():
    ch = ChannelRealization(gains=np.array([3 + 4j, 1.0]))
    assert ch.channel_gain == pytest.approx(26.0)
    assert ch.path_count == 2


def test_substream_determinism_and_independence():
    a = substream(42, 3, 1).standard_normal(8)
    b = substream(42, 3, 1).standard_normal(8)
    c = substream(42, 3, 2).standard_normal(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_bank_determinism_and_trial_decorrelation():
    prof = ApdpProfile(32, 10.0)
    topo = NetworkTopology(distances=np.array([5.0, 12.0]))
    bank1 = sample_channel_bank(prof, topo, 7, trial=4)
    bank2 = sample_channel_bank(prof, topo, 7, trial=4)
    bank3 = sample_channel_bank(prof, topo, 7, trial=5)
    for c1, c2, c3 in zip(bank1, bank2, bank3):
        assert np.array_equal(c1.gains, c2.gains)
        assert not np.array_equal(c1.gains, c3.gains)


def test_bank_draws_match_per_user_substreams():
    # user k's channel comes from the (trial, k) substream regardless of K
    prof = ApdpProfile(16, 4.0)
    topo = NetworkTopology(distances=np.array([5.0, 12.0, 8.0]))
    bank = sample_channel_bank(prof, topo, 123, trial=2)
    for k in range(3):
        direct = sample_channel(prof, topo, k, substream(123, 2, k))
        assert np.array_equal(bank[k].gains, direct.gains)


def test_channel_draw_order_real_then_imag():
    prof = ApdpProfile(6, 2.0)
    topo = NetworkTopology(distances=np.array([4.0]))
    ch = sample_channel(prof, topo, 0, substream(11, 0, 0))
    rng = substream(11, 0, 0)
    re = rng.standard_normal(6)
    im = rng.standard_normal(6)
    scale = np.sqrt(prof.tap_variances(topo.user_variances[0]) / 2.0)
    assert np.array_equal(ch.gains, scale * (re + 1j * im))


def test_tap_moments():
    # aggregate over taps and draws; per-tap SE of the variance is var/sqrt(n)
    prof = ApdpProfile(8, 10.0)
    topo = NetworkTopology(distances=np.array([5.0]))
    var = prof.tap_variances(topo.user_variances[0])
    n = 4000
    draws = np.array([
        sample_channel(prof, topo, 0, substream(5, t, 0)).gains for t in range(n)
    ])
    assert np.allclose(draws.mean(axis=0), 0.0, atol=5.0 * np.sqrt(var / n))
    emp = np.mean(np.abs(draws) ** 2, axis=0)
    assert np.allclose(emp, var, rtol=0, atol=5.0 * var / np.sqrt(n))
    # circularity: E[g^2] = 0 for proper complex Gaussians
    assert np.allclose(np.mean(draws ** 2, axis=0), 0.0, atol=5.0 * var / np.sqrt(n))


def test_tap_envelope_is_rayleigh():
    prof = ApdpProfile(4, 10.0)
    topo = NetworkTopology(distances=np.array([5.0]))
    var = prof.tap_variances(topo.user_variances[0])
    draws = np.array([
        sample_channel(prof, topo, 0, substream(17, t, 0)).gains for t in range(3000)
    ])
    for l in range(4):
        env = np.abs(draws[:, l])
        _, pvalue = stats.kstest(env, "rayleigh", args=(0.0, np.sqrt(var[l] / 2.0)))
        assert pvalue > 0.01


def test_variance_scale_covariance():
    # doubling the per-user variance scales every draw by sqrt(2)
    base = NetworkTopology(distances=np.array([6.0]), path_variance_scale=0.3)
    doubled = NetworkTopology(distances=np.array([6.0]), path_variance_scale=0.6)
    prof = ApdpProfile(12, 10.0)
    g1 = sample_channel(prof, base, 0, substream(3, 0, 0)).gains
    g2 = sample_channel(prof, doubled, 0, substream(3, 0, 0)).gains
    assert np.allclose(g2, np.sqrt(2.0) * g1, rtol=1e-12)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        NetworkTopology(distances=np.array([-1.0]))
    with pytest.raises(ValueError):
        sample_topology(0, 3.0, 20.0, substream(0))
    with pytest.raises(ValueError):
        sample_topology(2, 20.0, 3.0, substream(0))
    topo = NetworkTopology(distances=np.array([5.0]))
    with pytest.raises(IndexError):
        sample_channel(ApdpProfile(4), topo, 1, substream(0))
