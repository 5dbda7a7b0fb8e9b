"""Distributed power control as a non-cooperative game.

Each user picks transmit power to maximize bits delivered per joule:
u_k = (D/M) R f(gamma_k) / p_k with packet success f(gamma) =
(1 - e^(-gamma/2))^M. With rake gains fixed, the best response drives the
output SINR to the target gamma* solving
(M/2) gamma (1 - gamma / varsigma) = e^(gamma/2) - 1,
where varsigma is the user's self-interference ratio h_sp / h_si. The
simultaneous best-response iteration from zero power climbs monotonically
to the unique fixed point whenever one exists inside the power limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .gains import LinkGains, sinr


@dataclass(frozen=True)
class UtilityParams:
    """Throughput-per-energy utility: packet size, payload, rate, power cap."""

    packet_bits: int = 100
    data_bits: int = 100
    rate_bps: float = 100e3
    max_power: float = 1e-6

    def __post_init__(self):
        if self.packet_bits < 2:
            raise ValueError("packet_bits must be >= 2")
        if not 0 < self.data_bits <= self.packet_bits:
            raise ValueError("data_bits must be in 1..packet_bits")
        if self.rate_bps <= 0:
            raise ValueError("rate_bps must be positive")
        if self.max_power <= 0:
            raise ValueError("max_power must be positive")

    @property
    def throughput_scale(self) -> float:
        return self.data_bits / self.packet_bits * self.rate_bps


def efficiency(gamma, packet_bits: int = 100):
    """Packet success rate (1 - e^(-gamma/2))^M; accepts scalars or arrays."""
    g = np.asarray(gamma, dtype=float)
    out = (-np.expm1(-g / 2.0)) ** packet_bits
    return float(out) if np.isscalar(gamma) or g.ndim == 0 else out


@lru_cache(maxsize=None)
def _gamma_star_cached(varsigma: float, packet_bits: int) -> float:
    M = packet_bits

    def g(x: float) -> float:
        return 0.5 * M * x * (1.0 - x / varsigma) - math.expm1(x / 2.0)

    lo = 1e-9
    hi = 4.0 * M if math.isinf(varsigma) else min(varsigma * (1.0 - 1e-12), 4.0 * M)
    if hi <= lo or g(lo) <= 0 or g(hi) >= 0:
        raise ValueError(f"no SINR target exists for varsigma={varsigma}, M={M}")
    return float(brentq(g, lo, hi, xtol=1e-13))


def gamma_star(varsigma: float, packet_bits: int = 100) -> float:
    """Best-response SINR target for self-interference ratio varsigma.

    varsigma = inf recovers the interference-free target (about 12.9492
    for 100-bit packets); finite varsigma pulls the target below it.
    """
    v = float(varsigma)
    if not v > 0:
        raise ValueError("varsigma must be positive")
    return _gamma_star_cached(v, int(packet_bits))


def utilities(gains: LinkGains, powers: np.ndarray,
              params: UtilityParams) -> np.ndarray:
    """Per-user utility at a power vector; zero utility at zero power."""
    p = np.asarray(powers, dtype=float)
    out = np.zeros(gains.user_count)
    for k in range(gains.user_count):
        if p[k] > 0:
            out[k] = params.throughput_scale \
                * efficiency(sinr(gains, p, k), params.packet_bits) / p[k]
    return out


def best_response(gains: LinkGains, powers: np.ndarray, k: int,
                  params: UtilityParams) -> float:
    """Utility-maximizing power for user k against fixed other-user powers."""
    p = np.asarray(powers, dtype=float)
    varsigma = float(gains.si_ratio[k])
    gam = gamma_star(varsigma, params.packet_bits)
    interference = float(gains.h_mai[k] @ p) + gains.sigma_sq
    slack = 1.0 - (0.0 if math.isinf(varsigma) else gam / varsigma)
    unclamped = gam * interference / (gains.h_sp[k] * slack)
    return min(unclamped, params.max_power)


def feasibility(gains: LinkGains, packet_bits: int = 100) -> np.ndarray:
    """Whether each user's target is supportable with finite positive power.

    User k is feasible when gamma*(varsigma_k) (1/varsigma_k + zeta_k) < 1,
    zeta_k being the sum over j != k of h_mai[k, j] / h_sp[j].
    """
    varsigma = gains.si_ratio
    zeta = gains.mai_ratio_inv
    margins = np.array([
        gamma_star(float(varsigma[k]), packet_bits)
        * ((0.0 if math.isinf(varsigma[k]) else 1.0 / varsigma[k]) + zeta[k])
        for k in range(gains.user_count)
    ])
    return margins < 1.0


def closed_form_equilibrium_power(gains: LinkGains,
                                  params: UtilityParams) -> np.ndarray:
    """Unclamped equilibrium powers from the gain ratios alone.

    p_k = sigma^2 gamma*_k / (h_sp[k] (1 - gamma*_k (1/varsigma_k + zeta_k))).
    Exact whenever every user's interference profile is built from the same
    gain bank (in particular for a common channel realization); with fully
    heterogeneous banks it is the leading-order reduction of the fixed
    point rather than the fixed point itself.
    """
    varsigma = gains.si_ratio
    zeta = gains.mai_ratio_inv
    p = np.empty(gains.user_count)
    for k in range(gains.user_count):
        gam = gamma_star(float(varsigma[k]), params.packet_bits)
        inv_vs = 0.0 if math.isinf(varsigma[k]) else 1.0 / varsigma[k]
        denom = gains.h_sp[k] * (1.0 - gam * (inv_vs + zeta[k]))
        if denom <= 0:
            raise ValueError(f"user {k} is infeasible: no positive equilibrium power")
        p[k] = gains.sigma_sq * gam / denom
    return p


@dataclass(frozen=True)
class EquilibriumOutcome:
    """Fixed point of the simultaneous best-response iteration."""

    powers: np.ndarray
    sinrs: np.ndarray
    utilities: np.ndarray
    converged: bool
    iterations: int
    clamped: np.ndarray

    @property
    def any_clamped(self) -> bool:
        return bool(np.any(self.clamped))


def solve_equilibrium(gains: LinkGains, params: UtilityParams,
                      tol: float = 1e-10, max_iter: int = 10000) -> EquilibriumOutcome:
    """Iterate simultaneous best responses from zero power until stationary.

    Powers are non-decreasing along the iteration, so non-convergence within
    max_iter means the unclamped fixed point is out of reach; the outcome is
    returned with converged=False rather than raising.
    """
    K = gains.user_count
    gam = np.array([gamma_star(float(v), params.packet_bits) for v in gains.si_ratio])
    slack = 1.0 - np.where(np.isinf(gains.si_ratio), 0.0, gam / gains.si_ratio)
    gain_scale = gam / (gains.h_sp * slack)

    p = np.zeros(K)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        p_new = np.minimum(gain_scale * (gains.h_mai @ p + gains.sigma_sq),
                           params.max_power)
        delta = np.abs(p_new - p)
        scale = np.maximum(np.abs(p_new), np.finfo(float).tiny)
        p = p_new
        if np.all(delta <= tol * scale):
            converged = True
            break

    sinrs = np.array([sinr(gains, p, k) if p[k] > 0 else 0.0 for k in range(K)])
    return EquilibriumOutcome(
        powers=p,
        sinrs=sinrs,
        utilities=utilities(gains, p, params),
        converged=converged,
        iterations=iterations,
        clamped=p >= params.max_power,
    )
