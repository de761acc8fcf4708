"""Monte Carlo tree search over action-observation histories.

The planner is model-agnostic. A model provides

- ``num_actions``
- ``step(particle, u, rng) -> (next_particle, z)``: sample a transition
  and an observation bin
- ``expand(belief, u, z, particle, rng) -> (child_belief, reward)``:
  filter update for a simulated history, reward already in [-1, 0]
- ``informed_action(particle, belief, rng) -> u``: the heuristic half of
  the default policy

:class:`activetrack.tracking.TrackingModel` is the production model; the
tests also drive a small tabular one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .belief import ParticleSet, downsample, sir_update


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 5
    budget: int = 500
    gamma: float = 0.9
    c: float = 1.75
    epsilon: float = 1e-6
    plan_particles: int = 200

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("planner.horizon must be >= 0")
        if self.budget < 1:
            raise ValueError("planner.budget must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("planner.gamma must lie in [0, 1]")
        if not self.c >= 0:
            raise ValueError("planner.c must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("planner.epsilon must be > 0")
        if self.plan_particles < 1:
            raise ValueError("planner.plan_particles must be >= 1")

    def return_bounds(self) -> tuple[float, float]:
        """Range every backed-up return must fall in, given rewards in [-1, 0]."""
        if self.gamma == 1.0:
            return -float(self.horizon), 0.0
        return -(1.0 - self.gamma ** self.horizon) / (1.0 - self.gamma), 0.0


class TreeNode:
    __slots__ = ("belief", "reward", "visits", "action_visits", "values", "children")

    def __init__(self, belief, num_actions: int, reward: float | None = None):
        self.belief = belief
        self.reward = reward
        self.visits = 0
        self.action_visits = [0] * num_actions
        self.values = [0.0] * num_actions
        self.children: dict[tuple[int, int], TreeNode] = {}


def iter_tree(node: TreeNode, key: tuple = ()) -> Iterator[tuple[tuple, TreeNode]]:
    """Yield ``(history_key, node)`` pairs, keys relative to ``node``."""
    yield key, node
    for edge, child in node.children.items():
        yield from iter_tree(child, key + (edge,))


def ucb_select(node: TreeNode, c: float, epsilon: float) -> int:
    """Upper-confidence action choice; ties go to the lowest index."""
    log_n = math.log(node.visits) if node.visits > 0 else 0.0
    best, best_score = 0, -math.inf
    for u, (value, n_u) in enumerate(zip(node.values, node.action_visits)):
        score = value + c * math.sqrt(log_n / (n_u + epsilon))
        if score > best_score:
            best, best_score = u, score
    return best


def greedy_action(node: TreeNode) -> int:
    """Best estimated action among those tried; ties go to the lowest index.

    Untried actions hold no estimate (their stored 0 would beat every
    negative return), so they only count when nothing was tried.
    """
    values = node.values
    tried = [u for u, n in enumerate(node.action_visits) if n > 0] or range(len(values))
    return max(tried, key=lambda u: (values[u], -u))


@dataclass
class PlannerStats:
    simulations: int = 0
    expansions: int = 0
    return_min: float = math.inf
    return_max: float = -math.inf
    returns: list[float] | None = None

    def record(self, g: float) -> None:
        if g < self.return_min:
            self.return_min = g
        if g > self.return_max:
            self.return_max = g
        if self.returns is not None:
            self.returns.append(g)


@dataclass
class Planner:
    model: object
    cfg: PlannerConfig
    rng: np.random.Generator
    root: TreeNode | None = None
    stats: PlannerStats = field(default_factory=PlannerStats)

    def plan(self, belief: ParticleSet) -> int:
        """Run ``budget`` simulations from ``belief`` and return the best action.

        Root particles are drawn with replacement from ``belief``; a fresh
        root node holds a ``plan_particles``-sized resample of it.
        """
        if self.root is None:
            self.root = self.new_root(belief)
        idx = self.rng.choice(len(belief), size=self.cfg.budget, p=belief.weights)
        for i in idx:
            self.simulate(belief.states[i], self.root, 0)
            self.stats.simulations += 1
        return greedy_action(self.root)

    def new_root(self, belief: ParticleSet) -> TreeNode:
        if len(belief) != self.cfg.plan_particles:
            belief = downsample(belief, self.cfg.plan_particles, self.rng)
        return TreeNode(belief, self.model.num_actions)

    def simulate(self, particle, node: TreeNode, k: int) -> float:
        cfg = self.cfg
        if k >= cfg.horizon:
            return 0.0
        u = ucb_select(node, cfg.c, cfg.epsilon)
        nxt, z = self.model.step(particle, u, self.rng)
        child = node.children.get((u, z))
        if child is not None:
            g = child.reward + cfg.gamma * self.simulate(nxt, child, k + 1)
        else:
            belief, reward = self.model.expand(node.belief, u, z, nxt, self.rng)
            child = TreeNode(belief, self.model.num_actions, reward)
            node.children[(u, z)] = child
            self.stats.expansions += 1
            g = reward + cfg.gamma * self.default_rollout(nxt, belief, k + 1)
        node.visits += 1
        node.action_visits[u] += 1
        n_u = node.action_visits[u]
        node.values[u] = (1.0 - 1.0 / n_u) * node.values[u] + g / n_u
        self.stats.record(g)
        return g

    def default_rollout(self, particle, belief: ParticleSet, k: int) -> float:
        """Discounted return of the 50/50 random-or-informed policy; adds no nodes."""
        cfg = self.cfg
        g, discount = 0.0, 1.0
        while k < cfg.horizon:
            if self.rng.random() < 0.5:
                u = int(self.rng.integers(self.model.num_actions))
            else:
                u = self.model.informed_action(particle, belief, self.rng)
            particle, z = self.model.step(particle, u, self.rng)
            belief, reward = self.model.expand(belief, u, z, particle, self.rng)
            g += discount * reward
            discount *= cfg.gamma
            k += 1
        return g

    def advance(self, action: int, z: int, tracking_belief: ParticleSet,
                rng: np.random.Generator, robot_state=None) -> ParticleSet:
        """Move the tree to the executed history and update the tracking belief.

        The subtree under ``(action, z)`` becomes the new root; everything
        else is dropped. An unseen history starts a fresh tree on the next
        :meth:`plan` call.
        """
        new_belief, _ = sir_update(tracking_belief, self.model.actions[action], z, self.model,
                                   rng, robot_state=robot_state, compute_reward=False)
        child = None if self.root is None else self.root.children.get((action, z))
        self.root = child
        return new_belief
