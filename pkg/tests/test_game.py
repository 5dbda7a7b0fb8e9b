"""Power-control game: target solver, best responses, equilibrium."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from rakepower import (ApdpProfile, LinkGains, NetworkTopology, RakeSelector,
                       SpreadingConfig, UtilityParams, best_response,
                       closed_form_equilibrium_power, efficiency, feasibility,
                       gamma_star, link_gains, sample_channel_bank, sinr,
                       solve_equilibrium, substream, utilities)

GAMMA_INF = 12.949200759178689  # solves (M/2) g = e^(g/2) - 1 at M = 100


def _bisect_target(varsigma, M=100):
    """Independent root of (M/2) g (1 - g/varsigma) = e^(g/2) - 1."""
    def f(g):
        return 0.5 * M * g * (1.0 - g / varsigma) - math.expm1(g / 2.0)
    lo, hi = 1e-12, min(varsigma * (1.0 - 1e-13), 400.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _gains(K=3, L=40, rho=10.0, beta=0.5, frames=20, chips=25, seed=55,
           sigma_sq=5e-16, distances=None, shared=False):
    prof = ApdpProfile(L, rho)
    if distances is None:
        distances = substream(seed, 0).uniform(3.0, 20.0, K)
    topo = NetworkTopology(distances=np.asarray(distances, dtype=float))
    bank = sample_channel_bank(prof, topo, seed, 0)
    if shared:
        bank = [bank[0]] * K
    return link_gains(bank, RakeSelector(beta), SpreadingConfig(frames, chips),
                      sigma_sq)


def test_efficiency_shape():
    assert efficiency(0.0) == 0.0
    assert efficiency(1e9) == pytest.approx(1.0)
    g = np.linspace(0.1, 40.0, 200)
    f = efficiency(g)
    assert np.all(np.diff(f) > 0)
    assert np.all((f > 0) & (f < 1))
    # scalar in, scalar out; array in, array out
    assert isinstance(efficiency(3.0), float)
    assert efficiency(np.array([3.0])).shape == (1,)


def test_efficiency_packet_length():
    # longer packets demand higher SINR for the same success rate
    assert efficiency(10.0, packet_bits=1000) < efficiency(10.0, packet_bits=100)


def test_gamma_star_interference_free_limit():
    assert gamma_star(math.inf) == pytest.approx(GAMMA_INF, abs=1e-10)
    assert gamma_star(1e12) == pytest.approx(GAMMA_INF, rel=1e-9)


def test_gamma_star_against_bisection():
    for vs in (1.0, 2.0, 5.0, 10.0, 100.0, 1000.0, 10000.0, 330.04):
        assert gamma_star(vs) == pytest.approx(_bisect_target(vs), rel=1e-9)


def test_gamma_star_monotone_and_bounded():
    grid = [1.0, 2.0, 5.0, 10.0, 1e2, 1e3, 1e4]
    vals = [gamma_star(v) for v in grid]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    for v, g in zip(grid, vals):
        assert 0.0 < g < v
        assert g < GAMMA_INF


def test_gamma_star_rejects_bad_input():
    with pytest.raises(ValueError):
        gamma_star(0.0)
    with pytest.raises(ValueError):
        gamma_star(-2.0)


def test_gamma_star_cache_keys_on_packet_bits():
    g100 = gamma_star(50.0, packet_bits=100)
    g20 = gamma_star(50.0, packet_bits=20)
    assert g20 < g100
    assert gamma_star(50.0, packet_bits=100) == g100


def test_best_response_maximizes_utility():
    gains = _gains()
    params = UtilityParams()
    p = np.full(3, 2e-8)
    for k in range(3):
        br = best_response(gains, p, k, params)
        trial = p.copy()

        def neg_u(x, k=k, trial=trial):
            trial[k] = x
            return -utilities(gains, trial, params)[k]

        base = -neg_u(br)
        for factor in (0.9, 0.99, 1.01, 1.1):
            assert -neg_u(br * factor) <= base * (1.0 + 1e-12)


def test_best_response_clamps_at_cap():
    gains = _gains(sigma_sq=1.0)  # absurd noise forces the cap
    params = UtilityParams(max_power=1e-6)
    br = best_response(gains, np.zeros(3), 0, params)
    assert br == params.max_power


def test_single_user_equilibrium_closed_form():
    gains = _gains(K=1)
    params = UtilityParams()
    out = solve_equilibrium(gains, params)
    vs = float(gains.si_ratio[0])
    gam = gamma_star(vs)
    expected = gains.sigma_sq * gam / (gains.h_sp[0] * (1.0 - gam / vs))
    assert out.converged and not out.any_clamped
    assert out.powers[0] == pytest.approx(expected, rel=1e-10)
    assert out.sinrs[0] == pytest.approx(gam, rel=1e-10)


def test_single_user_single_path():
    # no multipath: no self-interference, target is the free-space one
    bank = [np.array([0.02 + 0.01j])]
    gains = link_gains(bank, RakeSelector(1.0), SpreadingConfig(5, 10), 5e-16)
    assert gains.h_si[0] == 0.0
    out = solve_equilibrium(gains, UtilityParams())
    expected = 5e-16 * GAMMA_INF / gains.h_sp[0]
    assert out.powers[0] == pytest.approx(expected, rel=1e-9)
    p = np.array([3e-10])
    assert sinr(gains, p, 0) == pytest.approx(gains.h_sp[0] * 3e-10 / 5e-16, rel=1e-12)


def test_equilibrium_against_scan_oracle():
    # derivative-free per-user maximization must land on the same point
    gains = _gains(K=2, L=30, seed=97)
    params = UtilityParams()
    out = solve_equilibrium(gains, params)
    assert out.converged and not out.any_clamped

    p = np.array([1e-10, 1e-10])
    for _ in range(400):
        for k in range(2):
            res = minimize_scalar(
                lambda x, k=k: -utilities(gains, np.where(np.arange(2) == k, x, p),
                                          params)[k],
                bounds=(1e-14, params.max_power), method="bounded",
                options={"xatol": 1e-18})
            p[k] = res.x
    assert np.allclose(out.powers, p, rtol=1e-6)


def test_equilibrium_iteration_monotone_from_zero():
    gains = _gains(K=4, L=50, seed=14)
    params = UtilityParams()
    # replicate the synchronous iteration and watch monotonicity
    gam = np.array([gamma_star(float(v)) for v in gains.si_ratio])
    scale = gam / (gains.h_sp * (1.0 - gam / gains.si_ratio))
    p = np.zeros(4)
    for _ in range(200):
        p_next = np.minimum(scale * (gains.h_mai @ p + gains.sigma_sq), params.max_power)
        assert np.all(p_next >= p - 1e-30)
        p = p_next
    out = solve_equilibrium(gains, params)
    assert np.allclose(out.powers, p, rtol=1e-8)


def test_equilibrium_fixed_point_reapplication():
    gains = _gains(K=6, L=60, seed=2)
    params = UtilityParams()
    out = solve_equilibrium(gains, params)
    assert out.converged
    for k in range(6):
        br = best_response(gains, out.powers, k, params)
        assert br == pytest.approx(out.powers[k], rel=1e-9)


def test_equilibrium_sinrs_hit_targets():
    gains = _gains(K=5, L=80, seed=8)
    out = solve_equilibrium(gains, UtilityParams())
    assert out.converged and not out.any_clamped
    for k in range(5):
        assert out.sinrs[k] == pytest.approx(gamma_star(float(gains.si_ratio[k])),
                                             rel=1e-9)


def test_closed_form_exact_for_shared_realization():
    gains = _gains(K=5, L=60, seed=41, shared=True,
                   distances=np.full(5, 9.0))
    params = UtilityParams()
    out = solve_equilibrium(gains, params)
    closed = closed_form_equilibrium_power(gains, params)
    assert out.converged and not out.any_clamped
    assert np.allclose(out.powers, closed, rtol=1e-10)


def test_closed_form_gap_for_heterogeneous_bank():
    # with per-user channels the ratio form is only the leading-order
    # reduction; the iterate settles elsewhere by a visible margin
    gains = _gains(K=8, L=200, beta=0.3, chips=50, frames=20, seed=303)
    params = UtilityParams()
    out = solve_equilibrium(gains, params)
    closed = closed_form_equilibrium_power(gains, params)
    assert out.converged and not out.any_clamped
    gap = np.max(np.abs(closed - out.powers) / out.powers)
    assert 1e-4 < gap < 0.2


def test_infeasible_system_pins_users_at_cap():
    # one chip per frame, single frame: the interference budget cannot close
    prof = ApdpProfile(8, 10.0)
    topo = NetworkTopology(distances=np.full(6, 10.0))
    bank = sample_channel_bank(prof, topo, 5, 0)
    gains = link_gains(bank, RakeSelector(1.0), SpreadingConfig(1, 1), 5e-16)
    assert not np.all(feasibility(gains))
    out = solve_equilibrium(gains, UtilityParams())
    assert out.any_clamped
    with pytest.raises(ValueError):
        closed_form_equilibrium_power(gains, UtilityParams())


def test_feasibility_margins():
    gains = _gains(K=4, L=60, seed=6)
    assert np.all(feasibility(gains))
    # reported per user as a boolean vector
    assert feasibility(gains).shape == (4,)


def test_utilities_zero_power():
    gains = _gains(K=2, L=20, seed=3)
    u = utilities(gains, np.array([0.0, 1e-9]), UtilityParams())
    assert u[0] == 0.0
    assert u[1] > 0.0
