"""Agent state and the stochastic constant-velocity motion model.

Angles are in degrees throughout and live in the half-open range
[-180, 180). Agent states are stored as rows ``[x, y, theta, v]`` when
handled in bulk, which is how the particle filter and planner use them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

X, Y, THETA, V = 0, 1, 2, 3

#: tolerance for coordinates whose noise standard deviation is zero
DET_TOL = 1e-9

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _wrap(arr: np.ndarray) -> np.ndarray:
    out = np.mod(arr + 180.0, 360.0) - 180.0
    # np.mod can round tiny negatives up to the modulus
    out[out >= 180.0] -= 360.0
    return out


def wrap_angle(a):
    """Wrap an angle (scalar or array, degrees) into [-180, 180)."""
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("wrap_angle: non-finite angle")
    out = _wrap(np.atleast_1d(arr))
    if arr.ndim == 0:
        return float(out[0])
    return out


@dataclass(frozen=True)
class AgentState:
    x: float
    y: float
    theta: float
    v: float

    def __post_init__(self):
        if self.v < 0:
            raise ValueError(f"speed must be >= 0, got {self.v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.v], dtype=float)

    @classmethod
    def from_array(cls, row) -> AgentState:
        return cls(float(row[X]), float(row[Y]), float(row[THETA]), float(row[V]))


@dataclass(frozen=True)
class WorldState:
    robot: AgentState
    source: AgentState

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.robot.as_array(), self.source.as_array()])

    @classmethod
    def from_array(cls, row) -> WorldState:
        return cls(AgentState.from_array(row[:4]), AgentState.from_array(row[4:8]))


@dataclass(frozen=True)
class Action:
    """A robot command: an angular speed in deg/s.

    ``stop`` marks the "stay in place" command: the agent does not move
    during that step but keeps its speed for the next one.
    """

    index: int
    angular_speed: float
    stop: bool = False


#: the source is never controlled
SOURCE_ACTION = Action(index=-1, angular_speed=0.0)


def default_actions(include_stop: bool = True) -> list[Action]:
    speeds = [-45.0, 0.0, 45.0]
    actions = []
    if include_stop:
        actions.append(Action(0, 0.0, stop=True))
    for s in speeds:
        actions.append(Action(len(actions), s))
    return actions


@dataclass(frozen=True)
class MotionNoise:
    sigma_x: float = 0.0
    sigma_y: float = 0.0
    sigma_v: float = 0.0
    sigma_theta: float = 0.0

    def __post_init__(self):
        for name in ("sigma_x", "sigma_y", "sigma_v", "sigma_theta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class Room:
    width: float = 7.0
    height: float = 5.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("room dimensions must be > 0")

    def corners(self) -> list[tuple[float, float]]:
        return [(0.0, 0.0), (self.width, 0.0), (0.0, self.height), (self.width, self.height)]

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height


def confine(states: np.ndarray, room: Room) -> np.ndarray:
    """Clamp ``[x, y, theta, v]`` rows into the room, mirroring headings off walls.

    Accepts a single row or an ``(n, 4)`` array; returns a new array.
    """
    s = np.array(states, dtype=float)
    rows = s.reshape(-1, 4)
    hit_x = (rows[:, X] < 0.0) | (rows[:, X] > room.width)
    hit_y = (rows[:, Y] < 0.0) | (rows[:, Y] > room.height)
    if hit_x.any() or hit_y.any():
        theta = rows[:, THETA]
        theta = np.where(hit_x, 180.0 - theta, theta)
        theta = np.where(hit_y, -theta, theta)
        rows[:, THETA] = _wrap(theta)
        np.clip(rows[:, X], 0.0, room.width, out=rows[:, X])
        np.clip(rows[:, Y], 0.0, room.height, out=rows[:, Y])
    return s


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")


def propagate(states: np.ndarray, action: Action, noise: MotionNoise, dt: float,
              rng: np.random.Generator) -> np.ndarray:
    """Sample one transition for every row of an ``(n, 4)`` state array.

    Heading is updated first, then speed, and the displacement uses the
    new heading and new speed. Noise draws are taken in the fixed order
    theta, v, x, y so results are reproducible for a given generator.
    """
    return propagate_rows(states, action.angular_speed, action.stop, noise, dt, rng)


def propagate_rows(states: np.ndarray, angular_speed, stop, noise: MotionNoise, dt: float,
                   rng: np.random.Generator) -> np.ndarray:
    """:func:`propagate` with per-row (or scalar) angular speeds and stop flags."""
    _check_dt(dt)
    states = np.asarray(states, dtype=float)
    n = states.shape[0]
    out = np.empty_like(states)
    w_theta = rng.normal(0.0, noise.sigma_theta, n) if noise.sigma_theta > 0 else 0.0
    w_v = rng.normal(0.0, noise.sigma_v, n) if noise.sigma_v > 0 else 0.0
    w_x = rng.normal(0.0, noise.sigma_x, n) if noise.sigma_x > 0 else 0.0
    w_y = rng.normal(0.0, noise.sigma_y, n) if noise.sigma_y > 0 else 0.0

    theta = _wrap(states[:, THETA] + np.multiply(angular_speed, dt) + w_theta)
    v = np.maximum(states[:, V] + w_v, 0.0)
    step = np.where(stop, 0.0, v * dt)
    rad = np.radians(theta)
    out[:, X] = states[:, X] + np.cos(rad) * step + w_x
    out[:, Y] = states[:, Y] + np.sin(rad) * step + w_y
    out[:, THETA] = theta
    out[:, V] = v
    return out


def sample_transition(s: AgentState, u: Action, noise: MotionNoise, dt: float,
                      rng: np.random.Generator) -> AgentState:
    row = propagate(s.as_array()[None, :], u, noise, dt, rng)[0]
    return AgentState.from_array(row)


def _gauss_logpdf(residual: np.ndarray, sigma: float, tol: float) -> np.ndarray:
    if sigma > 0:
        return -0.5 * (residual / sigma) ** 2 - math.log(sigma) - _LOG_SQRT_2PI
    return np.where(np.abs(residual) <= tol, 0.0, -np.inf)


def log_transition_matrix(nxt: np.ndarray, prev: np.ndarray, action: Action,
                          noise: MotionNoise, dt: float) -> np.ndarray:
    """Pairwise transition log-densities ``out[i, j] = log p(nxt_i | prev_j, u)``.

    Zero-variance coordinates contribute 0 when matched within
    ``DET_TOL`` and ``-inf`` otherwise. The heading term is evaluated at
    the nearest wrapped branch only.
    """
    _check_dt(dt)
    nxt = np.atleast_2d(np.asarray(nxt, dtype=float))
    prev = np.atleast_2d(np.asarray(prev, dtype=float))
    d_theta = wrap_angle(nxt[:, None, THETA] - prev[None, :, THETA] - action.angular_speed * dt)
    out = _gauss_logpdf(d_theta, noise.sigma_theta, DET_TOL)
    out = out + _gauss_logpdf(nxt[:, None, V] - prev[None, :, V], noise.sigma_v, DET_TOL)
    step = 0.0 if action.stop else nxt[:, V] * dt
    rad = np.radians(nxt[:, THETA])
    # position residuals use the new heading and speed, so the drift is per-row
    base_x = nxt[:, X] - np.cos(rad) * step
    base_y = nxt[:, Y] - np.sin(rad) * step
    out = out + _gauss_logpdf(base_x[:, None] - prev[None, :, X], noise.sigma_x, DET_TOL)
    out = out + _gauss_logpdf(base_y[:, None] - prev[None, :, Y], noise.sigma_y, DET_TOL)
    return out


def transition_log_density(s_next: AgentState, s_prev: AgentState, u: Action,
                           noise: MotionNoise, dt: float) -> float:
    """Log-density (nats) of one agent transition; ``-inf`` if impossible."""
    val = log_transition_matrix(s_next.as_array(), s_prev.as_array(), u, noise, dt)
    return float(val[0, 0])
