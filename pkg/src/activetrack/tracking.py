"""Bulk tracking model over world-state particles.

A world-state particle is a row ``[xr, yr, thr, vr, xs, ys, ths, vs]``:
robot state followed by source state. :class:`TrackingModel` bundles the
motion and observation models for the particle filter and exposes the
generative interface the planner drives (``step``, ``expand``,
``informed_action``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kinematics as kin
from ._kernels import log_mixture
from .belief import ParticleSet, RewardNormalizer, point_estimate, sir_update
from .kinematics import SOURCE_ACTION, Action, MotionNoise, Room, confine
from .observation import AoaGrid, ObservationTable, likelihood_batch, pmf_batch

ROBOT = slice(0, 4)
SOURCE = slice(4, 8)


@dataclass
class TrackingModel:
    table: ObservationTable
    grid: AoaGrid
    robot_noise: MotionNoise
    source_noise: MotionNoise
    normalizer: RewardNormalizer
    actions: list[Action] = field(default_factory=kin.default_actions)
    dt: float = 1.0
    room: Room | None = None

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    # -- particle filter hooks ---------------------------------------------

    def propagate(self, states: np.ndarray, action: Action, rng: np.random.Generator,
                  robot_state: np.ndarray | None = None) -> np.ndarray:
        out = np.empty_like(states)
        if robot_state is None:
            out[:, ROBOT] = kin.propagate(states[:, ROBOT], action, self.robot_noise, self.dt, rng)
            if self.room is not None:
                out[:, ROBOT] = confine(out[:, ROBOT], self.room)
        else:
            out[:, ROBOT] = robot_state
        out[:, SOURCE] = kin.propagate(states[:, SOURCE], SOURCE_ACTION, self.source_noise,
                                       self.dt, rng)
        if self.room is not None:
            out[:, SOURCE] = confine(out[:, SOURCE], self.room)
        return out

    def likelihood(self, states: np.ndarray, bin_index: int) -> np.ndarray:
        return likelihood_batch(self.table, self.grid, states[:, ROBOT], states[:, SOURCE],
                                bin_index)

    def log_transition(self, nxt: np.ndarray, prev: np.ndarray, action: Action,
                       include_robot: bool = True) -> np.ndarray:
        out = kin.log_transition_matrix(nxt[:, SOURCE], prev[:, SOURCE], SOURCE_ACTION,
                                        self.source_noise, self.dt)
        if include_robot:
            out = out + kin.log_transition_matrix(nxt[:, ROBOT], prev[:, ROBOT], action,
                                                  self.robot_noise, self.dt)
        return out

    def _noise_table(self, action: Action, include_robot: bool):
        def row(n):
            return [n.sigma_x, n.sigma_y, n.sigma_v, n.sigma_theta]
        if include_robot:
            return (np.array([row(self.robot_noise), row(self.source_noise)]),
                    np.array([action.angular_speed, 0.0]), np.array([action.stop, False]), ROBOT)
        return (np.array([row(self.source_noise)]), np.zeros(1), np.zeros(1, dtype=bool), SOURCE)

    def log_mixture(self, nxt: np.ndarray, prev: np.ndarray, w_prev: np.ndarray,
                    action: Action, include_robot: bool = True) -> np.ndarray:
        """``log sum_j p(nxt_i | prev_j, u) w_prev[j]`` for every row i.

        Same density as :meth:`log_transition`, evaluated by a compiled loop.
        """
        sig, ang, stop, _ = self._noise_table(action, include_robot)
        cols = slice(0, 8) if include_robot else SOURCE
        with np.errstate(divide="ignore"):
            log_w = np.log(w_prev)
        return log_mixture(np.ascontiguousarray(nxt[:, cols]), np.ascontiguousarray(prev[:, cols]),
                           log_w, sig, ang, stop, float(self.dt), kin.DET_TOL)

    # -- planner hooks -----------------------------------------------------

    def step(self, particle: np.ndarray, action_index: int, rng: np.random.Generator):
        """Sample a successor particle and a simulated observation bin."""
        action = self.actions[action_index]
        nxt = self.propagate(particle[None, :], action, rng)[0]
        pmf = pmf_batch(self.table, self.grid, nxt[ROBOT], nxt[SOURCE])
        cdf = np.cumsum(pmf)
        z = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return nxt, min(z, len(cdf) - 1)

    def expand(self, belief: ParticleSet, action_index: int, z: int, particle: np.ndarray,
               rng: np.random.Generator):
        """Child belief and normalized reward for a simulated (u, z).

        The robot is taken to be at the simulated particle's robot state,
        which is known to the robot in the hypothesized future.
        """
        child, reward = sir_update(belief, self.actions[action_index], z, self, rng,
                                   robot_state=particle[ROBOT])
        return child, reward.normalized

    def informed_action(self, particle: np.ndarray, belief: ParticleSet,
                        rng: np.random.Generator) -> int:
        """Action whose sampled robot move lands closest to the source estimate."""
        tx, ty = point_estimate(belief)
        robot = np.repeat(particle[None, ROBOT], self.num_actions, axis=0)
        moved = kin.propagate_rows(robot, self._speeds, self._stops, self.robot_noise, self.dt, rng)
        if self.room is not None:
            moved = confine(moved, self.room)
        d = np.hypot(moved[:, kin.X] - tx, moved[:, kin.Y] - ty)
        return int(np.argmin(d))

    @property
    def _speeds(self) -> np.ndarray:
        return np.array([a.angular_speed for a in self.actions])

    @property
    def _stops(self) -> np.ndarray:
        return np.array([a.stop for a in self.actions])
