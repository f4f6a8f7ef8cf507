"""Continuous-time Markov chain models and their stochastic simulators.

Five models are registered: the pure-birth ``death`` model, the ``si``
model, ``sir`` and ``seir`` epidemics, and a Lotka-Volterra model with
logistic prey growth (``lv``).  Death and SI carry the susceptible count
explicitly as a first species so that the population bound ``I <= N`` is a
plain nonnegativity constraint.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from ._validation import check_positive, check_theta, check_times, replicate_seeds


@dataclass(frozen=True)
class ModelSpec:
    """A CTMC with mass-action style reactions.

    Attributes
    ----------
    id : str
        Registry key (``death``, ``si``, ``sir``, ``seir`` or ``lv``).
    species : tuple of str
    initial_state : ndarray of int
    stoichiometry : ndarray of int, shape (n_reactions, n_species)
    param_names : tuple of str
    population : int
        Closed population size ``N`` (0 when not applicable).
    observed : tuple of bool
        Which species are recorded at the observation times.
    """

    id: str
    species: tuple
    initial_state: np.ndarray
    stoichiometry: np.ndarray
    param_names: tuple
    population: int
    observed: tuple
    code: int = field(repr=False, default=-1)

    @property
    def n_params(self):
        return len(self.param_names)

    @property
    def n_species(self):
        return len(self.species)

    @property
    def n_reactions(self):
        return self.stoichiometry.shape[0]

    @property
    def observed_index(self):
        return np.flatnonzero(np.asarray(self.observed)).astype(np.int64)

    @property
    def observed_species(self):
        return tuple(s for s, o in zip(self.species, self.observed) if o)

    def with_initial_state(self, state):
        state = np.asarray(state, dtype=np.int64)
        if state.shape != (self.n_species,) or np.any(state < 0):
            raise ValueError(f"initial state must be {self.n_species} nonnegative counts")
        if self.population and self.id != "lv" and state.sum() != self.population:
            raise ValueError("initial state must sum to the population size")
        return replace(self, initial_state=state)

    def propensities(self, state, theta):
        """Reaction propensities at one state, as a float vector."""
        theta = check_theta(theta, self.n_params)
        a = np.empty(self.n_reactions)
        _kernels.propensities(self.code, np.asarray(state, dtype=float), theta,
                              float(self.population), a)
        return a


def death_model(N=50, infected=0):
    return ModelSpec(
        id="death", species=("S", "I"),
        initial_state=np.array([N - infected, infected], dtype=np.int64),
        stoichiometry=np.array([[-1, 1]], dtype=np.int64),
        param_names=("beta1",), population=N, observed=(False, True),
        code=_kernels.DEATH)


def si_model(N=50, infected=0):
    return ModelSpec(
        id="si", species=("S", "I"),
        initial_state=np.array([N - infected, infected], dtype=np.int64),
        stoichiometry=np.array([[-1, 1]], dtype=np.int64),
        param_names=("beta1", "beta2"), population=N, observed=(False, True),
        code=_kernels.SI)


def sir_model(N=50, infected=5):
    return ModelSpec(
        id="sir", species=("S", "I", "R"),
        initial_state=np.array([N - infected, infected, 0], dtype=np.int64),
        stoichiometry=np.array([[-1, 1, 0], [0, -1, 1]], dtype=np.int64),
        param_names=("beta", "alpha"), population=N, observed=(False, True, True),
        code=_kernels.SIR)


def seir_model(N=50, infected=5):
    # the exposed class is never observed
    return ModelSpec(
        id="seir", species=("S", "E", "I", "R"),
        initial_state=np.array([N - infected, 0, infected, 0], dtype=np.int64),
        stoichiometry=np.array([[-1, 1, 0, 0], [0, -1, 1, 0], [0, 0, -1, 1]],
                               dtype=np.int64),
        param_names=("beta", "alpha_E", "alpha_I"), population=N,
        observed=(False, False, True, True), code=_kernels.SEIR)


def lv_model(prey=90, predators=35):
    return ModelSpec(
        id="lv", species=("prey", "predator"),
        initial_state=np.array([prey, predators], dtype=np.int64),
        stoichiometry=np.array([[1, 0], [-1, 0], [-1, 1], [0, -1]], dtype=np.int64),
        param_names=("K", "a", "b", "c"), population=0, observed=(True, True),
        code=_kernels.LV)


MODELS = {
    "death": death_model,
    "si": si_model,
    "sir": sir_model,
    "seir": seir_model,
    "lv": lv_model,
}


def get_model(model_id, **kwargs):
    try:
        factory = MODELS[model_id]
    except KeyError:
        raise ValueError(f"unknown model id {model_id!r}; expected one of {sorted(MODELS)}")
    return factory(**kwargs)


@dataclass(frozen=True)
class Design:
    """Ordered observation times inside a window with a minimum spacing."""

    times: np.ndarray
    window: tuple = (0.0, np.inf)
    min_spacing: float = 0.0

    def __post_init__(self):
        times = check_times(self.times)
        lo, hi = float(self.window[0]), float(self.window[1])
        tol = 1e-9
        if times[0] < lo - tol or times[-1] > hi + tol:
            raise ValueError(f"design times must lie in [{lo}, {hi}]")
        if times.size > 1 and np.min(np.diff(times)) < self.min_spacing - tol:
            raise ValueError(f"design gaps must be at least {self.min_spacing}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "window", (lo, hi))

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class Trajectory:
    """Observed counts (L x observed species) at the design times."""

    design: Design
    observations: np.ndarray
    species: tuple = ()

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", *self.species])
            for t, row in zip(self.design.times, self.observations):
                writer.writerow([repr(float(t)), *(int(v) for v in row)])


def _as_times(design):
    return design.times if isinstance(design, Design) else check_times(design)


def simulate_paths(model, thetas, times, seeds, method="ssa", tau=0.05):
    """Batched simulation; one row of ``thetas`` and one seed per replicate.

    Returns an array of shape (n, L, n_observed) of float counts.
    """
    thetas = np.ascontiguousarray(np.atleast_2d(thetas), dtype=float)
    seeds = np.asarray(seeds, dtype=np.uint64)
    if thetas.shape[0] != seeds.shape[0]:
        raise ValueError("need one seed per parameter row")
    if thetas.shape[1] != model.n_params:
        raise ValueError(f"{model.id} takes {model.n_params} parameters")
    if np.any(thetas < 0) or not np.all(np.isfinite(thetas)):
        raise ValueError("rate parameters must be finite and nonnegative")
    times = np.ascontiguousarray(times, dtype=float)
    args = (model.code, model.stoichiometry, model.initial_state, thetas,
            float(model.population), times, model.observed_index)
    if method == "ssa":
        return _kernels.ssa_batch(*args, seeds)
    if method == "tau":
        check_positive(tau, "tau")
        return _kernels.leap_batch(*args, float(tau), seeds)
    raise ValueError(f"unknown simulation method {method!r}")


def simulate_ssa(model, theta, design, seed):
    """Exact (Gillespie) realization of ``model`` recorded at the design times."""
    theta = check_theta(theta, model.n_params)
    times = _as_times(design)
    obs = simulate_paths(model, theta[None], times, replicate_seeds(seed, 1))[0]
    if not isinstance(design, Design):
        design = Design(times)
    return Trajectory(design, obs.astype(np.int64), model.observed_species)


def simulate_tau_leap(model, theta, design, tau, seed):
    """Explicit tau-leap realization with reaction counts clamped to feasibility."""
    tau = float(tau)
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    theta = check_theta(theta, model.n_params)
    times = _as_times(design)
    obs = simulate_paths(model, theta[None], times, replicate_seeds(seed, 1),
                         method="tau", tau=tau)[0]
    if not isinstance(design, Design):
        design = Design(times)
    return Trajectory(design, obs.astype(np.int64), model.observed_species)
