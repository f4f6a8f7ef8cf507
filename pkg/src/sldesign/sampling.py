"""Prior specification, Owen-scrambled Sobol points and prior-predictive draws."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import qmc

from ._validation import check_seed, replicate_seeds
from .kinetics import Design, Trajectory, simulate_paths

MAX_SOBOL_DIM = 64
_BITS = 32
_TWO32 = float(2**_BITS)


@dataclass(frozen=True)
class PriorSpec:
    """Independent normal priors on the log rate parameters.

    Parameters
    ----------
    mean, sd : array_like
        Per-parameter normal mean and standard deviation on the log scale.
    names : tuple of str, optional
    """

    mean: np.ndarray
    sd: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        sd = np.atleast_1d(np.asarray(self.sd, dtype=float))
        if mean.shape != sd.shape or mean.ndim != 1:
            raise ValueError("prior mean and sd must be vectors of equal length")
        if np.any(sd <= 0) or not np.all(np.isfinite(sd)):
            raise ValueError("prior sds must be positive and finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sd", sd)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def dim(self):
        return self.mean.size

    @property
    def precision(self):
        return np.diag(1.0 / self.sd**2)

    @property
    def covariance(self):
        return np.diag(self.sd**2)

    def logpdf_log(self, phi):
        """Normal log density of log-parameters ``phi`` (last axis = parameters)."""
        z = (np.asarray(phi, dtype=float) - self.mean) / self.sd
        return np.sum(-0.5 * z**2 - np.log(self.sd) - 0.5 * np.log(2 * np.pi), axis=-1)


def check_model_prior(probs, K):
    probs = np.full(K, 1.0 / K) if probs is None else np.asarray(probs, dtype=float)
    if probs.shape != (K,):
        raise ValueError(f"model prior must have {K} entries")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("model prior probabilities must be nonnegative and sum to 1")
    return probs


@dataclass(frozen=True)
class PointBatch:
    points: np.ndarray
    method: str
    seed: object


def _hash64(x):
    # splitmix64 finalizer on uint64 arrays (wrapping arithmetic)
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _sobol_integers(dim, Q):
    engine = qmc.Sobol(dim, scramble=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        pts = engine.random(Q)
    bits = engine.bits if hasattr(engine, "bits") else 30
    return (np.rint(pts * 2.0**bits).astype(np.uint64) << np.uint64(_BITS - bits))


def owen_scramble(ints, keys):
    """Nested uniform scramble of 32-bit digit expansions.

    Digit ``b`` of coordinate ``j`` is flipped by a pseudo-random bit keyed on
    ``(keys[j], b, leading b original digits)``, i.e. one independent random
    permutation per node of the base-2 digit tree.
    """
    out = np.zeros_like(ints)
    for b in range(_BITS):
        shift = np.uint64(_BITS - b)
        prefix = (ints >> shift) if b else np.zeros_like(ints)
        node = prefix | (np.uint64(1) << np.uint64(b))
        flip = _hash64(node * np.uint64(0x9E3779B97F4A7C15) ^ keys) >> np.uint64(63)
        digit = (ints >> np.uint64(_BITS - 1 - b)) & np.uint64(1)
        out |= (digit ^ flip) << np.uint64(_BITS - 1 - b)
    return out


def sobol_owen(dim, Q, seed):
    """First ``Q`` points of a ``dim``-dimensional Owen-scrambled Sobol sequence.

    Points lie in the open unit cube.  Each seed gives an independent
    randomization; the digits below 2**-32 are filled with uniform noise so
    every coordinate is exactly uniform marginally.
    """
    dim, Q = int(dim), int(Q)
    if not 1 <= dim <= MAX_SOBOL_DIM:
        raise ValueError(f"dim must be in [1, {MAX_SOBOL_DIM}], got {dim}")
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    ss = check_seed(seed)
    key_seq, jitter_seq = ss.spawn(2)
    keys = key_seq.generate_state(dim, dtype=np.uint64)
    with np.errstate(over="ignore"):
        scrambled = owen_scramble(_sobol_integers(dim, Q), keys[None, :])
    jitter = np.random.default_rng(jitter_seq).random((Q, dim))
    u = (scrambled.astype(float) + jitter) / _TWO32
    u = np.clip(u, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    return PointBatch(u, "rqmc", seed)


def prior_sample(prior, u):
    """Map unit-interval points to natural-scale parameters through the prior."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != prior.dim:
        raise ValueError(f"expected {prior.dim} coordinates, got {u.shape[-1]}")
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("unit-interval coordinates must lie in (0, 1)")
    return np.exp(prior.mean + prior.sd * special.ndtri(u))


def prior_log_density(prior, theta, scale="log"):
    """Prior log density of natural-scale ``theta``.

    ``scale="log"`` gives the normal density of ``log theta`` (the workspace
    used by every posterior computation); ``scale="natural"`` gives the
    log-normal density of ``theta`` itself.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        return -np.inf
    phi = np.log(theta)
    lp = prior.logpdf_log(phi)
    if scale == "log":
        return lp
    if scale == "natural":
        return lp - np.sum(phi, axis=-1)
    raise ValueError(f"scale must be 'log' or 'natural', got {scale!r}")


def draw_log_params(prior, Q, method, seed):
    """``Q`` log-parameter draws from the prior, by plain MC or RQMC."""
    if method == "mc":
        z = np.random.default_rng(check_seed(seed)).standard_normal((Q, prior.dim))
        return prior.mean + prior.sd * z
    if method == "rqmc":
        u = sobol_owen(prior.dim, Q, seed).points
        return prior.mean + prior.sd * special.ndtri(u)
    raise ValueError(f"method must be 'mc' or 'rqmc', got {method!r}")


def prior_predictive(model, prior, design, Q, method="mc", seed=0,
                     simulator="ssa", tau=0.05):
    """``Q`` pairs (theta, Trajectory) from the joint prior predictive.

    Parameters come from the leading (Sobol) dimensions under ``rqmc``; the
    simulation noise always comes from per-draw counter-based streams.
    """
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    if not isinstance(design, Design):
        design = Design(design)
    param_seq, noise_seq = check_seed(seed).spawn(2)
    thetas = np.exp(draw_log_params(prior, Q, method, param_seq))
    obs = simulate_paths(model, thetas, design.times, replicate_seeds(noise_seq, Q),
                         method=simulator, tau=tau)
    return [(theta, Trajectory(design, o.astype(np.int64), model.observed_species))
            for theta, o in zip(thetas, obs)]


def quantile_bands(trajectories, levels=(0.1, 0.5, 0.9)):
    """Pointwise quantiles over a list of trajectories; shape (levels, L, species)."""
    stack = np.stack([t.observations for t in trajectories])
    return np.quantile(stack, levels, axis=0)

