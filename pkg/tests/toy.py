"""A tabular planning problem with an exact expectimax solution.

Histories are encoded in the particle as ``[depth, code]``; the reward of
a (u, z) step and the observation probabilities depend on the whole
history, so nothing is special about the tree structure.
"""

from __future__ import annotations

import bisect
import itertools

import numpy as np

from activetrack.belief import ParticleSet


class ToyModel:
    def __init__(self, num_actions=2, num_obs=2, horizon=2, seed=0, informed=0):
        gen = np.random.default_rng(seed)
        self.num_actions = num_actions
        self.num_obs = num_obs
        self.horizon = horizon
        self.informed = informed
        self.p_obs = {}
        self.reward = {}
        for h in self.histories(horizon):
            for u in range(num_actions):
                p = gen.dirichlet(np.ones(num_obs))
                self.p_obs[h + (u,)] = p
                for z in range(num_obs):
                    self.reward[h + (u, z)] = -float(gen.uniform(0.0, 1.0))
        self._cdf = {k: list(np.cumsum(p)) for k, p in self.p_obs.items()}

    def histories(self, depth):
        steps = list(itertools.product(range(self.num_actions), range(self.num_obs)))
        for k in range(depth):
            for path in itertools.product(steps, repeat=k):
                yield tuple(x for step in path for x in step)

    def root_belief(self):
        return ParticleSet(np.zeros((1, 1)), np.ones(1))

    # planner interface; the particle is the history tuple
    def step(self, particle, u, rng):
        # root particles come from the belief array and carry no history
        h = () if isinstance(particle, np.ndarray) else particle
        cdf = self._cdf[h + (u,)]
        z = bisect.bisect_right(cdf, rng.random() * cdf[-1])
        return h + (u, min(z, self.num_obs - 1)), z

    def expand(self, belief, u, z, particle, rng):
        return belief, self.reward[particle]

    def informed_action(self, particle, belief, rng):
        return self.informed

    def exact_values(self, gamma):
        """Expectimax action values at the root."""
        def value(h, k):
            if k == self.horizon:
                return 0.0
            return max(q(h, u, k) for u in range(self.num_actions))

        def q(h, u, k):
            p = self.p_obs[h + (u,)]
            return sum(p[z] * (self.reward[h + (u, z)] + gamma * value(h + (u, z), k + 1))
                       for z in range(self.num_obs))

        return [q((), u, 0) for u in range(self.num_actions)]
