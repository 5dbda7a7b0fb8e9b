"""Large-system closed forms for rake power control.

As the number of paths, chips, and users grow with fixed ratios, the
per-realization interference coefficients concentrate: the cross-user
coefficient tends to mu / N per interferer and the self-interference
coefficient to nu / N, where mu depends only on the profile decay ratio
and the combined-finger fraction, and nu additionally on the load (chips
per frame relative to channel length). Everything downstream of the
simulation layer - equilibrium power and utility predictions, the
partial-versus-full combining utility loss, and the minimum frame count
that keeps the network feasible - is a closed-form function of (mu, nu).

mu and nu have removable singularities at a flat profile (decay ratio 1)
and at full combining (finger fraction 1), where the generic expressions
cancel catastrophically; evaluation dispatches to dedicated limit forms
near those points. nu is piecewise in the load with five analytic
branches that agree at the region boundaries.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .game import UtilityParams, efficiency, gamma_star
from .gains import SpreadingConfig

logger = logging.getLogger(__name__)

_FLAT_RHO_TOL = 1e-6
_ARAKE_BETA_TOL = 1e-9


def _check_rho(rho: float):
    if not rho >= 1:
        raise ValueError("decay ratio must be >= 1")


def _check_beta(beta: float):
    if not 0 < beta <= 1:
        raise ValueError("finger fraction must be in (0, 1]")


def _check_load(load: float):
    if not load > 0:
        raise ValueError("load must be positive")


def mu_flat(beta: float) -> float:
    """Cross-gain coefficient for a flat profile: 1 / beta."""
    _check_beta(beta)
    return 1.0 / beta


def mu_arake(rho: float) -> float:
    """Cross-gain coefficient under full combining: exactly 1."""
    _check_rho(rho)
    return 1.0


def mu_flat_arake() -> float:
    return 1.0


def mu(rho: float, beta: float) -> float:
    """Limiting ratio of total channel energy to combined energy, times beta recip.

    mu(rho, beta) = (rho - 1) rho^(beta - 1) / (rho^beta - 1), with the
    removable limits mu -> 1/beta as rho -> 1 and mu = 1 at beta = 1.
    Scales the per-interferer cross gain: h_mai -> mu / N.
    """
    _check_rho(rho)
    _check_beta(beta)
    if 1.0 - beta < _ARAKE_BETA_TOL:
        return mu_arake(rho)
    if abs(rho - 1.0) < _FLAT_RHO_TOL:
        return mu_flat(beta)
    lr = math.log(rho)
    return (rho - 1.0) * rho ** (beta - 1.0) / math.expm1(beta * lr)


def _region(beta: float, load: float) -> int:
    lo, hi = min(beta, 1.0 - beta), max(beta, 1.0 - beta)
    if load < lo:
        return 1
    if load <= hi:
        return 2 if beta <= 0.5 else 3
    if load <= 1.0:
        return 4
    return 5


def nu_flat_arake(load: float) -> float:
    """Self-interference coefficient, flat profile and full combining."""
    _check_load(load)
    if load <= 1.0:
        return (2.0 / 3.0) * (load * load - 3.0 * load + 3.0)
    return 2.0 / (3.0 * load)


def nu_arake(rho: float, load: float) -> float:
    """Self-interference coefficient under full combining."""
    _check_rho(rho)
    _check_load(load)
    if abs(rho - 1.0) < _FLAT_RHO_TOL:
        return nu_flat_arake(load)
    r, lam = rho, load
    lr = math.log(r)
    if lam <= 1.0:
        num = 2.0 * (r * r - 1.0 + r ** lam - r ** (2.0 - lam) - 2.0 * r * lam * lr)
    else:
        num = 2.0 * (r * r - 1.0 - 2.0 * r * lr)
    return num / ((r - 1.0) ** 2 * lam * lr)


def nu_flat(beta: float, load: float) -> float:
    """Self-interference coefficient for a flat profile."""
    _check_beta(beta)
    _check_load(load)
    if 1.0 - beta < _ARAKE_BETA_TOL:
        return nu_flat_arake(load)
    b, lam = beta, load
    region = _region(b, lam)
    if region == 1:
        return (2.0 * b * b + 2.0 * b - 4.0 * lam * b + lam * lam) / (2.0 * b * b)
    if region == 2:
        return ((2.0 - lam) / b + b / lam - 1.0) / 2.0
    if region == 3:
        return (b ** 3 + b * b * (9.0 * lam - 3.0) + b * (3.0 - 9.0 * lam * lam)
                + 4.0 * lam ** 3 - 3.0 * lam * lam + 3.0 * lam - 1.0) / (6.0 * lam * b * b)
    if region == 4:
        return (4.0 * b ** 3 - 3.0 * b * b + 3.0 * b + (lam - 1.0) ** 3) / (6.0 * lam * b * b)
    return (4.0 * b * b - 3.0 * b + 3.0) / (6.0 * lam * b)


def nu(rho: float, beta: float, load: float) -> float:
    """Limiting self-interference coefficient: h_si -> nu / N.

    Piecewise-analytic in the load with breakpoints at min(beta, 1 - beta),
    max(beta, 1 - beta), and 1; continuous across all of them. Near the
    removable singularities at rho = 1 and beta = 1 the generic branches
    cancel catastrophically, so evaluation switches to the flat-profile and
    full-combining limit forms there.
    """
    _check_rho(rho)
    _check_beta(beta)
    _check_load(load)
    if 1.0 - beta < _ARAKE_BETA_TOL:
        return nu_arake(rho, load)
    if abs(rho - 1.0) < _FLAT_RHO_TOL:
        return nu_flat(beta, load)
    return _nu_branch(rho, beta, load, _region(beta, load))


def _nu_branch(rho: float, beta: float, load: float, region: int) -> float:
    """One analytic branch of nu, evaluated without the region dispatch.

    Branches stay finite slightly outside their own region, which lets the
    continuity of the piecewise definition be checked at the breakpoints.
    """
    r, b, lam = rho, beta, load
    lr = math.log(r)
    if region == 1:
        num = r * (r ** lam - 1.0) * (4.0 * r ** (2.0 * b) + 3.0 * r ** lam - 1.0) \
            - 2.0 * r ** (b + lam) * (r ** b + 3.0 * r - 1.0) * lam * lr
        den = 2.0 * (r ** b - 1.0) ** 2 * lam * r ** (1.0 + lam) * lr
    elif region == 2:
        num = r * (4.0 * r ** lam - 1.0) * (r ** (2.0 * b) - 1.0) \
            - 2.0 * r ** (b + lam) * (3.0 * r * b - lam + r ** b * lam) * lr
        den = 2.0 * (r ** b - 1.0) ** 2 * lam * r ** (1.0 + lam) * lr
    elif region == 3:
        num = -4.0 * r ** (2.0 + 2.0 * b) - 4.0 * r ** (2.0 + lam) \
            + r ** (2.0 * (b + lam)) + 4.0 * r ** (2.0 + 2.0 * b + lam) \
            + 3.0 * r ** (2.0 + 2.0 * lam) \
            - 2.0 * r ** (1.0 + b + lam) * (b + 3.0 * r * lam + r ** b * lam - 1.0) * lr
        den = 2.0 * (r ** b - 1.0) ** 2 * lam * r ** (2.0 + lam) * lr
    elif region == 4:
        num = -(r ** (2.0 + 2.0 * b)) - 4.0 * r ** (2.0 + lam) \
            + r ** (2.0 * (b + lam)) + 4.0 * r ** (2.0 + 2.0 * b + lam) \
            - 2.0 * r ** (1.0 + b + lam) * (b + 3.0 * r * b + r ** b * lam - 1.0) * lr
        den = 2.0 * (r ** b - 1.0) ** 2 * lam * r ** (2.0 + lam) * lr
    else:
        num = 2.0 * r * (r ** (2.0 * b) - 1.0) \
            - (r ** b + b + 3.0 * r * b - 1.0) * r ** b * lr
        den = (r ** b - 1.0) ** 2 * lam * r * lr
    return num / den


@dataclass(frozen=True)
class LsaParams:
    """Operating point for the large-system predictions.

    load is chips per frame over path count; gain is the total processing
    gain (frames times chips per frame). chips_per_frame is only needed by
    the frame-count design rule and may be omitted otherwise.
    """

    rho: float
    beta: float
    load: float
    gain: int
    users: int
    sigma_sq: float
    utility: UtilityParams = UtilityParams()
    chips_per_frame: int | None = None

    def __post_init__(self):
        _check_rho(self.rho)
        _check_beta(self.beta)
        _check_load(self.load)
        if self.gain < 1:
            raise ValueError("processing gain must be >= 1")
        if self.users < 1:
            raise ValueError("users must be >= 1")
        if self.sigma_sq <= 0:
            raise ValueError("sigma_sq must be positive")

    @classmethod
    def from_spreading(cls, spreading: SpreadingConfig, path_count: int,
                       rho: float, beta: float, users: int, sigma_sq: float,
                       utility: UtilityParams = UtilityParams()) -> "LsaParams":
        return cls(rho=rho, beta=beta, load=spreading.load_factor(path_count),
                   gain=spreading.processing_gain, users=users,
                   sigma_sq=sigma_sq, utility=utility,
                   chips_per_frame=spreading.chips_per_frame)

    @property
    def mu(self) -> float:
        return mu(self.rho, self.beta)

    @property
    def nu(self) -> float:
        return nu(self.rho, self.beta, self.load)

    @property
    def target_sinr(self) -> float:
        """Equilibrium SINR target at this finite processing gain."""
        return gamma_star(self.gain / self.nu, self.utility.packet_bits)


def _interference_budget(params: LsaParams, gam: float) -> float:
    """N minus the SINR-weighted interference mass; must stay positive."""
    return params.gain - gam * ((params.users - 1) * params.mu + params.nu)


def predict_power(params: LsaParams, h_sp) -> float | np.ndarray:
    """Predicted equilibrium transmit power for combined gain h_sp."""
    gam = params.target_sinr
    budget = _interference_budget(params, gam)
    if budget <= 0:
        raise ValueError("infeasible operating point: interference mass exceeds gain")
    h = np.asarray(h_sp, dtype=float)
    out = params.gain * params.sigma_sq * gam / (h * budget)
    return float(out) if out.ndim == 0 else out


def predict_utility(params: LsaParams, h_sp) -> float | np.ndarray:
    """Predicted equilibrium utility for combined gain h_sp."""
    gam = params.target_sinr
    budget = _interference_budget(params, gam)
    if budget <= 0:
        raise ValueError("infeasible operating point: interference mass exceeds gain")
    h = np.asarray(h_sp, dtype=float)
    scale = params.utility.throughput_scale * efficiency(gam, params.utility.packet_bits)
    out = scale * h * budget / (params.gain * params.sigma_sq * gam)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LsaPrediction:
    """Bundle of the large-system outputs at one operating point."""

    mu: float
    nu: float
    target_sinr: float
    power: float | np.ndarray
    utility: float | np.ndarray
    ber: float


def lsa_prediction(params: LsaParams, h_sp) -> LsaPrediction:
    gam = params.target_sinr
    return LsaPrediction(
        mu=params.mu,
        nu=params.nu,
        target_sinr=gam,
        power=predict_power(params, h_sp),
        utility=predict_utility(params, h_sp),
        ber=ber_estimate(gam),
    )


def ber_estimate(gamma) -> float | np.ndarray:
    """Gaussian-tail bit error estimate Q(sqrt(gamma))."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be non-negative")
    out = 0.5 * erfc(np.sqrt(g / 2.0))
    return float(out) if out.ndim == 0 else out


def min_frames(params: LsaParams) -> int:
    """Fewest frames per symbol keeping every user's target supportable.

    Feasibility requires the processing gain to exceed the interference
    mass gamma ((K - 1) mu + nu) at the interference-free target, which
    the frame count controls linearly; the rule is the ceiling of that
    ratio over chips per frame. Counts below 5 are allowed but flagged,
    since the limiting coefficients are least accurate for very short
    spreading.
    """
    if params.chips_per_frame is None:
        raise ValueError("min_frames needs chips_per_frame")
    gam = gamma_star(math.inf, params.utility.packet_bits)
    mass = gam * ((params.users - 1) * params.mu + params.nu)
    raw = mass / params.chips_per_frame
    frames = max(1, math.ceil(raw))
    if frames == raw:
        frames += 1
    if frames < 5:
        logger.warning(
            "minimum frame count %d is below 5; the limiting coefficients "
            "are rough at such short spreading", frames)
    return frames


def loss_db(params: LsaParams, asymptotic_target: bool = True) -> float:
    """Utility penalty of partial combining relative to full, in dB.

    The ratio of full-combining to partial-combining equilibrium utility
    for the same total channel energy is
    mu (f(g_A)/f(g_P)) (g_P/g_A) (N - g_A[(K-1) + nu_A]) / (N - g_P[(K-1) mu + nu]).
    With asymptotic_target=True both targets are evaluated in the
    infinite-gain limit, where the efficiency and SINR ratios drop out;
    otherwise each receiver uses its own finite-gain target. Full
    combining gives exactly 0 dB either way.
    """
    m = params.mu
    nv = params.nu
    nv_a = nu_arake(params.rho, params.load)
    M = params.utility.packet_bits
    if asymptotic_target:
        g_p = g_a = gamma_star(math.inf, M)
        eff_ratio = 1.0
        sinr_ratio = 1.0
    else:
        g_p = gamma_star(params.gain / nv, M)
        g_a = gamma_star(params.gain / nv_a, M)
        eff_ratio = efficiency(g_a, M) / efficiency(g_p, M)
        sinr_ratio = g_p / g_a
    budget_a = params.gain - g_a * ((params.users - 1) + nv_a)
    budget_p = params.gain - g_p * ((params.users - 1) * m + nv)
    if budget_a <= 0 or budget_p <= 0:
        raise ValueError("infeasible operating point: interference mass exceeds gain")
    ratio = m * eff_ratio * sinr_ratio * budget_a / budget_p
    return 10.0 * math.log10(ratio)


def invert_loss(target_db: float, params: LsaParams, beta_min: float = 0.01,
                asymptotic_target: bool = True) -> float:
    """Finger fraction whose utility penalty matches a target, in dB.

    Bisects the monotone decreasing penalty curve over [beta_min, 1] until
    within 0.01 dB of the target. Fractions too small to support the load
    count as infinite penalty, so the search walks back into the feasible
    range by itself. Raises if the target is negative or no fraction in
    the range meets it.
    """
    if target_db < 0:
        raise ValueError("target penalty must be non-negative")

    def penalty(beta: float) -> float:
        try:
            return loss_db(dataclasses.replace(params, beta=beta), asymptotic_target)
        except ValueError:
            return math.inf

    hi_loss = penalty(beta_min)
    if target_db > hi_loss:
        raise ValueError(
            f"target {target_db} dB exceeds the {hi_loss:.4f} dB penalty at beta={beta_min}")
    lo, hi = beta_min, 1.0
    val = penalty(lo)
    beta = lo
    for _ in range(200):
        beta = 0.5 * (lo + hi)
        val = penalty(beta)
        if abs(val - target_db) < 0.01:
            break
        if val > target_db:
            lo = beta
        else:
            hi = beta
    if not abs(val - target_db) < 0.01:
        raise ValueError(f"no fraction in [{beta_min}, 1] reaches {target_db} dB")
    return beta
