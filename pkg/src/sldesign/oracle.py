"""Exact transition probabilities for small CTMC state spaces by uniformization.

Used as an independent likelihood oracle: the synthetic-likelihood machinery
never touches this module.
"""

from collections import deque
from functools import lru_cache

import numpy as np
from scipy import special

from . import _kernels
from ._validation import check_positive, check_theta

MAX_STATES = 10_000
TAIL_MASS = 1e-12
LAMBDA_INFLATION = 1.05


class StateSpace:
    """Reachable states of a model and the reaction graph between them."""

    def __init__(self, model, max_states=MAX_STATES):
        start = tuple(int(v) for v in model.initial_state)
        index = {start: 0}
        states = [start]
        edges = []
        queue = deque([start])
        stoich = model.stoichiometry
        while queue:
            x = queue.popleft()
            row = []
            for r in range(stoich.shape[0]):
                y = tuple(int(a + b) for a, b in zip(x, stoich[r]))
                if min(y) < 0:
                    row.append(-1)
                    continue
                if y not in index:
                    if len(states) >= max_states:
                        raise ValueError(
                            f"state space of {model.id} exceeds {max_states} states")
                    index[y] = len(states)
                    states.append(y)
                    queue.append(y)
                row.append(index[y])
            edges.append(row)
        self.model = model
        self.states = np.array(states, dtype=np.int64)
        self.targets = np.array(edges, dtype=np.int64)
        self.index = index
        obs = model.observed_index
        self.observed_index = {}
        for i, s in enumerate(self.states):
            key = tuple(s[obs])
            self.observed_index.setdefault(key, []).append(i)

    def __len__(self):
        return self.states.shape[0]

    def rates(self, theta):
        m = self.model
        table = _kernels.propensity_table(m.code, self.states, theta,
                                          float(m.population), m.n_reactions)
        table[self.targets < 0] = 0.0
        return table

    def state_of_observation(self, obs):
        idx = self.observed_index.get(tuple(int(v) for v in obs))
        if idx is None:
            return None
        if len(idx) > 1:
            raise ValueError(
                f"observations of {self.model.id} do not identify the full state")
        return idx[0]


@lru_cache(maxsize=32)
def _cached_space(model):
    return StateSpace(model)


def state_space(model):
    """Enumerate (and cache) the states reachable from ``model.initial_state``."""
    return _cached_space(_ModelKey(model))


class _ModelKey:
    # hashable wrapper: ModelSpec holds arrays
    def __init__(self, model):
        self.model = model
        self._key = (model.id, model.population, tuple(model.initial_state.tolist()))

    def __hash__(self):
        return hash(self._key)

    def __eq__(self, other):
        return self._key == other._key

    def __getattr__(self, name):
        return getattr(self.model, name)


def _poisson_weights(mean):
    if mean == 0:
        return np.ones(1)
    k = np.arange(int(np.ceil(mean + 12 * np.sqrt(mean) + 40)))
    w = np.exp(k * np.log(mean) - mean - special.gammaln(k + 1))
    # drop the upper tail once its mass is below TAIL_MASS
    tail = 1.0 - np.cumsum(w)
    cut = np.searchsorted(-tail, -TAIL_MASS) + 1
    return w[:cut + 1]


def _propagate(space, rates, dt, rows):
    lam = LAMBDA_INFLATION * rates.sum(axis=1).max()
    if lam == 0 or dt == 0:
        return rows.copy()
    weights = _poisson_weights(lam * dt)
    return _kernels.uniformized_propagate(rows, space.targets, rates, lam, weights)


def exact_transition_matrix(model, theta, dt):
    """Row-stochastic matrix P(dt) over the states of :func:`state_space`.

    Computed as ``sum_k Poisson(k; lam dt) (I + Q/lam)^k`` with
    ``lam = 1.05 * max exit rate``, truncated once the Poisson tail mass is
    below 1e-12.
    """
    theta = check_theta(theta, model.n_params)
    dt = check_positive(dt, "dt", strict=False)
    space = state_space(model)
    return _propagate(space, space.rates(theta), dt, np.eye(len(space)))


def exact_log_likelihood(model, theta, traj, times=None):
    """Markov-factorized log-likelihood of observed counts.

    The process starts from ``model.initial_state`` at t = 0.  Returns
    ``-inf`` for data the chain cannot produce.
    """
    theta = check_theta(theta, model.n_params)
    if times is None:
        times = traj.design.times
        obs = traj.observations
    else:
        obs = np.asarray(traj)
    times = np.asarray(times, dtype=float)
    space = state_space(model)
    rates = space.rates(theta)
    prev = 0
    t_prev = 0.0
    total = 0.0
    for t, y in zip(times, obs):
        j = space.state_of_observation(y)
        if j is None:
            return -np.inf
        row = np.zeros((1, len(space)))
        row[0, prev] = 1.0
        p = _propagate(space, rates, t - t_prev, row)[0, j]
        if p <= 0:
            return -np.inf
        total += np.log(p)
        prev, t_prev = j, t
    return total
