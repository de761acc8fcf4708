"""Weighted-particle beliefs, SIR updates and the particle entropy reward."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .observation import LIK_FLOOR

#: source x, y columns of a world-state particle row
SOURCE_XY = (4, 5)

_LOG_FLOOR = -700.0


@dataclass(eq=False)
class ParticleSet:
    states: np.ndarray
    weights: np.ndarray
    generation: int = 0
    degenerate: bool = False

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.states.shape[0] < 1 or self.states.shape[0] != self.weights.shape[0]:
            raise ValueError("need I >= 1 particles and one weight per particle")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")

    @classmethod
    def uniform(cls, states, generation: int = 0) -> ParticleSet:
        states = np.asarray(states, dtype=float)
        n = states.shape[0]
        return cls(states, np.full(n, 1.0 / n), generation)

    def __len__(self):
        return self.states.shape[0]


@dataclass(frozen=True)
class Reward:
    raw: float
    normalized: float


class RewardNormalizer:
    """Affine map of raw rewards (negative entropies) onto [-1, 0].

    ``raw = -h_hi`` maps to -1 and ``raw = -h_lo`` to 0; values outside
    are clamped.
    """

    def __init__(self, h_lo: float, h_hi: float):
        if not h_hi > h_lo:
            raise ValueError(f"h_hi ({h_hi}) must exceed h_lo ({h_lo})")
        self.h_lo = float(h_lo)
        self.h_hi = float(h_hi)

    @classmethod
    def for_room(cls, width: float, height: float, sigma_v: float,
                 sigma_floor: float = 0.05) -> RewardNormalizer:
        """Bounds from a uniform-over-room belief down to a localization floor."""
        h_hi = math.log(width * height) + math.log(360.0)
        if sigma_v > 0:
            h_hi += 0.5 * math.log(2 * math.pi * math.e * sigma_v ** 2)
        h_lo = math.log(2 * math.pi * math.e * sigma_floor ** 2)
        return cls(h_lo, h_hi)

    def __call__(self, raw: float) -> float:
        frac = (raw + self.h_hi) / (self.h_hi - self.h_lo)
        return min(max(frac, 0.0), 1.0) - 1.0

    def reward(self, raw: float) -> Reward:
        return Reward(raw, self(raw))


def systematic_resample(weights, rng: np.random.Generator | None = None,
                        offset: float | None = None, size: int | None = None) -> np.ndarray:
    """Parent indices from one uniform offset and an evenly spaced comb.

    ``offset`` is the comb start in [0, 1/size); drawn from ``rng`` when
    not given. ``size`` defaults to ``len(weights)``.
    """
    w = np.asarray(weights, dtype=float)
    n = w.size if size is None else int(size)
    if offset is None:
        offset = rng.random() / n
    if not 0 <= offset < 1.0 / n:
        raise ValueError("offset must lie in [0, 1/n)")
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    positions = offset + np.arange(n) / n
    idx = np.searchsorted(cdf, positions, side="right")
    return np.minimum(idx, w.size - 1)


def downsample(belief: ParticleSet, size: int, rng: np.random.Generator) -> ParticleSet:
    idx = systematic_resample(belief.weights, rng, size=size)
    return ParticleSet.uniform(belief.states[idx], belief.generation)


def point_estimate(belief: ParticleSet, cols=SOURCE_XY) -> tuple[float, float]:
    """Weighted mean of the source position."""
    xy = belief.states[:, list(cols)]
    est = belief.weights @ xy
    return float(est[0]), float(est[1])


def entropy_from_mixture(lik: np.ndarray, log_mix: np.ndarray, w_prev: np.ndarray,
                         w_new: np.ndarray) -> float:
    """Raw reward (negative differential entropy) from one filter step.

    ``lik[i]`` is the observation likelihood of propagated particle i,
    ``log_mix[i]`` the log of the predictive mixture
    ``sum_j p(x_i | x_j, u) * w_prev[j]``, ``w_prev`` the previous weights
    (indexed consistently with the propagated particles) and ``w_new`` the
    normalized post-update weights.
    """
    lik = np.maximum(np.asarray(lik, dtype=float), LIK_FLOOR)
    evidence = float(np.dot(lik, w_prev))
    mix = np.maximum(log_mix, _LOG_FLOOR)
    keep = w_new > 0
    fit = float(np.dot(w_new[keep], np.log(lik[keep]) + mix[keep]))
    return -math.log(max(evidence, LIK_FLOOR)) + fit


def log_mixture(log_trans: np.ndarray, w_prev: np.ndarray) -> np.ndarray:
    """Row-wise ``log sum_j exp(log_trans[i, j]) * w_prev[j]``."""
    with np.errstate(divide="ignore"):
        log_w = np.log(w_prev)
    return logsumexp(log_trans + log_w[None, :], axis=1)


def entropy_estimate(lik: np.ndarray, log_trans: np.ndarray, w_prev: np.ndarray,
                     w_new: np.ndarray) -> float:
    """As :func:`entropy_from_mixture`, from the full pairwise log-density matrix
    ``log_trans[i, j] = log p(x_i | x_j, u)``."""
    return entropy_from_mixture(lik, log_mixture(log_trans, w_prev), w_prev, w_new)


@dataclass
class SirResult:
    belief: ParticleSet
    raw_reward: float | None
    degenerate: bool


def sir_step(belief: ParticleSet,
             propagate: Callable[[np.ndarray, np.random.Generator], np.ndarray],
             likelihood: Callable[[np.ndarray], np.ndarray],
             mixture: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None,
             rng: np.random.Generator) -> SirResult:
    """One propagate / reweight / resample cycle for an arbitrary model.

    ``mixture(moved, prev, w_prev)`` returns the per-particle log
    predictive mixture (see :func:`log_mixture`). The entropy reward is
    evaluated before resampling and only when ``mixture`` is supplied.
    """
    prev = belief.states
    w_prev = belief.weights
    moved = propagate(prev, rng)
    lik = np.maximum(likelihood(moved), LIK_FLOOR)
    degenerate = bool(np.all(lik <= LIK_FLOOR))
    if degenerate:
        w_new = np.full(len(w_prev), 1.0 / len(w_prev))
    else:
        w_new = w_prev * lik
        w_new = w_new / w_new.sum()
    raw = None
    if mixture is not None:
        raw = entropy_from_mixture(lik, mixture(moved, prev, w_prev), w_prev, w_new)
    idx = systematic_resample(w_new, rng)
    out = ParticleSet.uniform(moved[idx], belief.generation + 1)
    out.degenerate = degenerate
    return SirResult(out, raw, degenerate)


def sir_update(belief: ParticleSet, action, z, model, rng: np.random.Generator,
               robot_state: np.ndarray | None = None,
               compute_reward: bool = True) -> tuple[ParticleSet, Reward | None]:
    """SIR update of a tracking belief with one (action, observation) pair.

    ``model`` supplies ``propagate``, ``likelihood`` and ``log_mixture``
    over world-state rows (see :class:`activetrack.tracking.TrackingModel`).
    With ``robot_state`` given, every particle's robot part is set to that
    known state and the reward covers the source part only.
    """
    bin_index = getattr(z, "bin_index", z)

    def propagate(states, rng):
        return model.propagate(states, action, rng, robot_state=robot_state)

    def lik(states):
        return model.likelihood(states, bin_index)

    def mixture(nxt, prev, w_prev):
        return model.log_mixture(nxt, prev, w_prev, action, include_robot=robot_state is None)

    res = sir_step(belief, propagate, lik, mixture if compute_reward else None, rng)
    reward = model.normalizer.reward(res.raw_reward) if compute_reward else None
    return res.belief, reward
