"""Input validation helpers shared by the public entry points."""

import numbers

import numpy as np


def check_seed(seed):
    """Turn ``seed`` into a :class:`numpy.random.SeedSequence`."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required for reproducibility")
    if isinstance(seed, numbers.Integral):
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        return np.random.SeedSequence(int(seed))
    raise TypeError(f"seed must be an int or SeedSequence, got {type(seed).__name__}")


def replicate_seeds(seed, n):
    """``n`` uint64 per-replicate seeds derived from ``seed``."""
    return check_seed(seed).generate_state(n, dtype=np.uint64)


def spawn(seed, n):
    return check_seed(seed).spawn(n)


def check_positive(value, name, strict=True):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_times(times):
    """Validate a strictly increasing vector of observation times."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("observation times must be a nonempty 1-d vector")
    if not np.all(np.isfinite(times)):
        raise ValueError("observation times must be finite")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("observation times must be strictly increasing")
    if times[0] < 0:
        raise ValueError("observation times must be nonnegative")
    return times


def check_theta(theta, n_params):
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != n_params:
        raise ValueError(f"expected {n_params} parameters, got {theta.size}")
    if np.any(~np.isfinite(theta)) or np.any(theta < 0):
        raise ValueError("rate parameters must be finite and nonnegative")
    return theta
