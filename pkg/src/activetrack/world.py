"""Ground-truth simulation, baseline policies and single-episode runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kinematics as kin
from .belief import ParticleSet, point_estimate, sir_update
from .kinematics import SOURCE_ACTION, X, Y, Action, MotionNoise, Room, WorldState, confine
from .observation import AoaGrid, Observation, ObservationTable, observation_pmf, sample_observation
from .planner import Planner, PlannerConfig, PlannerStats
from .tracking import TrackingModel

#: index of the "angular velocity 0" action in the default action set
STRAIGHT = 2


@dataclass(frozen=True)
class WorldNoise:
    robot: MotionNoise
    source: MotionNoise


def step_world(w: WorldState, u: Action, room: Room, noise: WorldNoise, dt: float,
               rng: np.random.Generator, source_rng: np.random.Generator | None = None) -> WorldState:
    """Advance robot (under ``u``) and source (uncontrolled), then apply walls.

    ``source_rng`` lets the source path use its own stream so that it does
    not depend on the robot's policy.
    """
    robot = kin.propagate(w.robot.as_array()[None, :], u, noise.robot, dt, rng)[0]
    source = kin.propagate(w.source.as_array()[None, :], SOURCE_ACTION, noise.source, dt,
                           source_rng if source_rng is not None else rng)[0]
    return WorldState(kin.AgentState.from_array(confine(robot, room)),
                      kin.AgentState.from_array(confine(source, room)))


def observe_world(w: WorldState, table: ObservationTable, grid: AoaGrid,
                  rng: np.random.Generator) -> Observation:
    return sample_observation(observation_pmf(table, grid, w), rng, grid)


def random_policy(rng: np.random.Generator, num_actions: int) -> int:
    return int(rng.integers(num_actions))


@dataclass
class PatrolState:
    visited: set = field(default_factory=set)
    target: int | None = None


def patrol_policy(state: PatrolState, robot: kin.AgentState, room: Room, actions: list[Action],
                  dt: float, r_visit: float = 0.5) -> tuple[int, PatrolState]:
    """Head for the most distant corner not yet visited."""
    corners = room.corners()
    reached = {k for k, (cx, cy) in enumerate(corners)
               if math.hypot(robot.x - cx, robot.y - cy) <= r_visit}
    visited = set(state.visited) | reached
    if len(visited) == len(corners):
        # start a new round; the corner we are standing at counts as done
        visited = reached
    target = state.target
    if target is None or target in visited:
        open_corners = [k for k in range(len(corners)) if k not in visited]
        target = max(open_corners, key=lambda k: (math.hypot(robot.x - corners[k][0],
                                                             robot.y - corners[k][1]), -k))
    tx, ty = corners[target]
    still = kin.MotionNoise()
    here = robot.as_array()[None, :]
    best, best_d = 0, math.inf
    for a in actions:
        moved = kin.propagate(here, a, still, dt, None)[0]
        d = math.hypot(moved[X] - tx, moved[Y] - ty)
        if d < best_d:
            best, best_d = a.index, d
    return best, PatrolState(visited, target)


@dataclass
class EpisodeSetup:
    """Everything a single episode needs besides the policy and seed."""

    room: Room
    world_noise: WorldNoise
    model: TrackingModel
    num_particles: int
    steps: int
    speed_robot: float = 0.3
    speed_source: float = 0.3
    r_visit: float = 0.5
    fixed_actions: tuple[int, ...] = (STRAIGHT, STRAIGHT)


@dataclass
class Episode:
    true_states: list[WorldState]
    observations: list[Observation | None]
    actions: list[int | None]
    errors: list[float]
    seed: int
    planner_stats: PlannerStats | None = None


def episode_streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("init", "source", "robot", "observe", "filter", "policy")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


def initial_world(setup: EpisodeSetup, rng: np.random.Generator) -> WorldState:
    room = setup.room
    xr, yr, xs, ys = rng.uniform(0, 1, 4) * [room.width, room.height, room.width, room.height]
    thr, ths = rng.uniform(-180.0, 180.0, 2)
    return WorldState(kin.AgentState(xr, yr, kin.wrap_angle(thr), setup.speed_robot),
                      kin.AgentState(xs, ys, kin.wrap_angle(ths), setup.speed_source))


def initial_belief(setup: EpisodeSetup, robot: kin.AgentState,
                   rng: np.random.Generator) -> ParticleSet:
    n, room = setup.num_particles, setup.room
    states = np.empty((n, 8))
    states[:, 0:4] = robot.as_array()
    states[:, 4] = rng.uniform(0.0, room.width, n)
    states[:, 5] = rng.uniform(0.0, room.height, n)
    states[:, 6] = kin.wrap_angle(rng.uniform(-180.0, 180.0, n))
    states[:, 7] = setup.speed_source
    return ParticleSet.uniform(states)


def source_error(belief: ParticleSet, w: WorldState) -> float:
    ex, ey = point_estimate(belief)
    return math.hypot(ex - w.source.x, ey - w.source.y)


def run_episode(policy: str, setup: EpisodeSetup, seed: int,
                planner_cfg: PlannerConfig | None = None,
                record_returns: bool = False, log=None) -> Episode:
    """Simulate one episode and record the per-step source position error.

    ``policy`` is ``"random"``, ``"patrol"`` or ``"mcts"`` (which needs
    ``planner_cfg``). Step 0 is the initial belief; the first actions are
    the fixed ``setup.fixed_actions`` whatever the policy.
    """
    if policy not in ("random", "patrol", "mcts"):
        raise ValueError(f"unknown policy {policy!r}")
    if policy == "mcts" and planner_cfg is None:
        raise ValueError("mcts policy needs a planner config")
    rngs = episode_streams(seed)
    model = setup.model
    w = initial_world(setup, rngs["init"])
    belief = initial_belief(setup, w.robot, rngs["init"])
    planner = None
    if policy == "mcts":
        planner = Planner(model, planner_cfg, rngs["policy"])
        if record_returns:
            planner.stats.returns = []
    patrol = PatrolState()

    states, obs, actions = [w], [None], [None]
    errors = [source_error(belief, w)]
    for t in range(1, setup.steps):
        if t - 1 < len(setup.fixed_actions):
            u = setup.fixed_actions[t - 1]
        elif policy == "random":
            u = random_policy(rngs["policy"], model.num_actions)
        elif policy == "patrol":
            u, patrol = patrol_policy(patrol, w.robot, setup.room, model.actions, model.dt,
                                      setup.r_visit)
        else:
            u = planner.plan(belief)
        w = step_world(w, model.actions[u], setup.room, setup.world_noise, model.dt,
                       rngs["robot"], rngs["source"])
        z = observe_world(w, model.table, model.grid, rngs["observe"])
        robot = w.robot.as_array()
        if planner is not None:
            belief = planner.advance(u, z.bin_index, belief, rngs["filter"], robot_state=robot)
        else:
            belief, _ = sir_update(belief, model.actions[u], z, model, rngs["filter"],
                                   robot_state=robot, compute_reward=False)
        states.append(w)
        obs.append(z)
        actions.append(u)
        errors.append(source_error(belief, w))
        if log is not None:
            log(t, u, z, w, errors[-1])
    return Episode(states, obs, actions, errors, seed,
                   planner.stats if planner is not None else None)
