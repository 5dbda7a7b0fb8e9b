"""Effective link gains for rake reception under time-hopping spreading.

For each user the rake output SINR separates into three deterministic
coefficients of the transmit powers: the combining gain on the desired
symbol (h_sp), a self-interference gain from inter-path leakage of the
user's own signal (h_si), and a cross-gain matrix from every other user's
signal (h_mai). All three are exact functions of the realized path gains,
the set of combined fingers, and the processing gain; no Gaussian or
large-system approximation is involved here.

The lag structure of the leakage enters through two banded L x (L-1)
matrices per vector x: column i of the matrix holds the last i entries of
x shifted to the top. Products against those matrices are plain
correlation lags, so the default evaluation path never materializes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import ChannelRealization


@dataclass(frozen=True)
class RakeSelector:
    """Which fraction of the resolvable paths the receiver combines.

    finger_fraction = 1 combines every path (all-rake); smaller fractions
    combine only the first fingers (partial rake). Combining is
    maximal-ratio: the weight on a combined finger is the path gain itself.
    """

    finger_fraction: float
    combining: str = "mrc"

    def __post_init__(self):
        if not 0 < self.finger_fraction <= 1:
            raise ValueError("finger_fraction must be in (0, 1]")
        if self.combining != "mrc":
            raise ValueError("only maximal-ratio combining is implemented")

    def finger_count(self, path_count: int) -> int:
        """Number of combined fingers for a channel with path_count paths.

        The product finger_fraction * path_count is nudged before flooring
        so that fractions with no exact binary representation (0.3 * 200)
        still select the intended finger count.
        """
        if path_count < 1:
            raise ValueError("path_count must be >= 1")
        return max(1, math.floor(self.finger_fraction * path_count + 1e-9))


@dataclass(frozen=True)
class SpreadingConfig:
    """Time-hopping frame structure: frames per symbol, chips per frame."""

    frames: int
    chips_per_frame: int

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.chips_per_frame < 1:
            raise ValueError("chips_per_frame must be >= 1")

    @property
    def processing_gain(self) -> int:
        return self.frames * self.chips_per_frame

    def load_factor(self, path_count: int) -> float:
        """Chips per frame relative to the channel length."""
        if path_count < 1:
            raise ValueError("path_count must be >= 1")
        return self.chips_per_frame / path_count


def rake_weights(alpha: ChannelRealization | np.ndarray,
                 selector: RakeSelector) -> np.ndarray:
    """Combining weight vector: the path gains on the combined fingers, zero after."""
    a = alpha.gains if isinstance(alpha, ChannelRealization) else np.asarray(alpha, dtype=complex)
    c = np.zeros_like(a)
    fingers = selector.finger_count(a.size)
    c[:fingers] = a[:fingers]
    return c


def phi_coefficient(l: int, chips_per_frame: int, path_count: int) -> float:
    """Chip-collision weight on lag l, sqrt(min(L - l, N_c) / N_c).

    Lags longer than a frame can only collide with min(L - l, N_c) chip
    positions, which discounts the corresponding leakage term.
    """
    if not 1 <= l <= path_count - 1:
        raise IndexError(f"lag {l} outside 1..{path_count - 1}")
    return math.sqrt(min(path_count - l, chips_per_frame) / chips_per_frame)


def _phi_squared(chips_per_frame: int, path_count: int) -> np.ndarray:
    """phi_l^2 for l = 1..L-1 as a vector."""
    lags = np.arange(1, path_count)
    return np.minimum(path_count - lags, chips_per_frame) / chips_per_frame


def interference_matrices(alpha: ChannelRealization | np.ndarray,
                          c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Banded lag matrices (A, B) built from the path gains and the weights.

    Entry (l, i) of A is alpha_{L+l-i} when l <= i and zero otherwise
    (1-based); B has the same pattern built from c. Only the dense
    evaluation path and the tests use these; link_gains defaults to the
    equivalent correlation form.
    """
    a = alpha.gains if isinstance(alpha, ChannelRealization) else np.asarray(alpha, dtype=complex)
    return _lag_matrix(a), _lag_matrix(np.asarray(c, dtype=complex))


def _lag_matrix(x: np.ndarray) -> np.ndarray:
    L = x.size
    if L == 1:
        return np.zeros((1, 0), dtype=complex)
    l_idx = np.arange(1, L + 1)[:, None]
    i_idx = np.arange(1, L)[None, :]
    mask = l_idx <= i_idx
    src = np.clip(L + l_idx - i_idx - 1, 0, L - 1)
    return np.where(mask, x[src], 0.0 + 0.0j)


def _corr_lags(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """r[d] = sum_m x[m] conj(y[m + d]) for d = 1..L-1.

    Equals the lag-matrix product (A_y^H x) read in descending-i order;
    norms are order-invariant so sums of |r|^2 need no reversal.
    """
    L = x.size
    if L == 1:
        return np.zeros(0, dtype=complex)
    full = np.correlate(x, y, mode="full")
    return full[L - 2::-1]


@dataclass(frozen=True)
class LinkGains:
    """Per-realization gain coefficients for a bank of K users.

    h_sp[k] scales user k's own power in the SINR numerator, h_si[k] its
    self-interference, and h_mai[k, j] the interference user k receives
    from user j (diagonal identically zero). sigma_sq is the noise power
    at the rake output.
    """

    h_sp: np.ndarray
    h_si: np.ndarray
    h_mai: np.ndarray
    sigma_sq: float

    def __post_init__(self):
        h_sp = np.atleast_1d(np.asarray(self.h_sp, dtype=float))
        h_si = np.atleast_1d(np.asarray(self.h_si, dtype=float))
        h_mai = np.asarray(self.h_mai, dtype=float)
        object.__setattr__(self, "h_sp", h_sp)
        object.__setattr__(self, "h_si", h_si)
        object.__setattr__(self, "h_mai", h_mai)
        K = h_sp.size
        if h_si.shape != (K,) or h_mai.shape != (K, K):
            raise ValueError("inconsistent gain shapes")
        if np.any(h_sp <= 0):
            raise ValueError("h_sp must be positive")
        if np.any(h_si < 0) or np.any(h_mai < 0):
            raise ValueError("interference gains must be non-negative")
        if np.any(np.diag(h_mai) != 0):
            raise ValueError("h_mai diagonal must be zero")
        if self.sigma_sq < 0:
            raise ValueError("sigma_sq must be non-negative")

    @property
    def user_count(self) -> int:
        return self.h_sp.size

    @property
    def si_ratio(self) -> np.ndarray:
        """h_sp / h_si per user; infinite when there is no self-interference."""
        with np.errstate(divide="ignore"):
            return np.where(self.h_si > 0, self.h_sp / np.where(self.h_si > 0, self.h_si, 1.0), np.inf)

    @property
    def mai_ratio_inv(self) -> np.ndarray:
        """Sum over j != k of h_mai[k, j] / h_sp[j]."""
        return (self.h_mai / self.h_sp[None, :]).sum(axis=1)


def link_gains(alphas: Sequence[ChannelRealization | np.ndarray],
               selector: RakeSelector,
               spreading: SpreadingConfig,
               sigma_sq: float,
               method: str = "banded") -> LinkGains:
    """Exact gain bank for K users sharing the channel.

    method="banded" evaluates the lag sums as correlations; "dense"
    materializes the lag matrices and multiplies them out. Both give the
    same numbers to roundoff; dense exists as an independent check and is
    quadratically more expensive.
    """
    if method not in ("banded", "dense"):
        raise ValueError(f"unknown method {method!r}")
    gains = [a.gains if isinstance(a, ChannelRealization) else np.asarray(a, dtype=complex)
             for a in alphas]
    K = len(gains)
    if K < 1:
        raise ValueError("need at least one user")
    L = gains[0].size
    if any(g.size != L for g in gains):
        raise ValueError("all users must share the same path count")

    weights = [rake_weights(a, selector) for a in gains]
    N = spreading.processing_gain
    phi_sq = _phi_squared(spreading.chips_per_frame, L)

    h_sp = np.empty(K)
    for k, (a, c) in enumerate(zip(gains, weights)):
        hs = np.vdot(c, a)
        if abs(hs.imag) > 1e-12 * max(1.0, abs(hs.real)):
            raise ValueError("combining gain has a non-negligible imaginary part")
        if hs.real <= 0:
            raise ValueError(f"user {k} has zero combining gain")
        h_sp[k] = hs.real

    h_si = np.empty(K)
    h_mai = np.zeros((K, K))
    if method == "banded":
        for k, (a, c) in enumerate(zip(gains, weights)):
            v = _corr_lags(a, c) + _corr_lags(c, a)
            h_si[k] = float(phi_sq[::-1] @ np.abs(v) ** 2) / (N * h_sp[k])
            for j, aj in enumerate(gains):
                if j == k:
                    continue
                t1 = _corr_lags(aj, c)
                t2 = _corr_lags(c, aj)
                cross = np.sum(np.abs(t1) ** 2) + np.sum(np.abs(t2) ** 2) \
                    + abs(np.vdot(c, aj)) ** 2
                h_mai[k, j] = cross / (N * h_sp[k])
    else:
        mats = [interference_matrices(a, c) for a, c in zip(gains, weights)]
        for k, (a, c) in enumerate(zip(gains, weights)):
            A_k, B_k = mats[k]
            v = B_k.conj().T @ a + A_k.conj().T @ c
            h_si[k] = float(phi_sq @ np.abs(v) ** 2) / (N * h_sp[k])
            for j, aj in enumerate(gains):
                if j == k:
                    continue
                A_j = mats[j][0]
                cross = np.sum(np.abs(B_k.conj().T @ aj) ** 2) \
                    + np.sum(np.abs(A_j.conj().T @ c) ** 2) \
                    + abs(np.vdot(c, aj)) ** 2
                h_mai[k, j] = cross / (N * h_sp[k])

    return LinkGains(h_sp=h_sp, h_si=h_si, h_mai=h_mai, sigma_sq=sigma_sq)


def sinr(gains: LinkGains, powers: np.ndarray, k: int) -> float:
    """Output SINR of user k at the given power vector."""
    p = np.asarray(powers, dtype=float)
    if p.shape != (gains.user_count,):
        raise ValueError("powers must have one entry per user")
    if not 0 <= k < gains.user_count:
        raise IndexError(f"user index {k} outside 0..{gains.user_count - 1}")
    denom = gains.h_si[k] * p[k] + float(gains.h_mai[k] @ p) + gains.sigma_sq
    return gains.h_sp[k] * p[k] / denom
