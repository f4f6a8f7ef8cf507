"""Design spaces, baseline designs and approximate coordinate exchange."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_seed, replicate_seeds
from .kinetics import Design

NUGGET_FLOOR = 1e-6
_TOL = 1e-9


@dataclass(frozen=True)
class DesignSpace:
    """``L`` ordered observation times in ``window`` at least ``min_spacing`` apart."""

    window: tuple
    L: int
    min_spacing: float = 0.0

    def __post_init__(self):
        lo, hi = (float(v) for v in self.window)
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo < 0 or hi <= lo:
            raise ValueError(f"window must satisfy 0 <= lo < hi < inf, got {self.window}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.min_spacing < 0:
            raise ValueError("min_spacing must be nonnegative")
        if hi - lo < (self.L - 1) * self.min_spacing - _TOL:
            raise ValueError(f"window too short for {self.L} points spaced "
                             f"{self.min_spacing} apart")
        object.__setattr__(self, "window", (lo, hi))

    def contains(self, times):
        t = np.asarray(times, dtype=float)
        lo, hi = self.window
        return bool(t.size == self.L and t[0] >= lo - _TOL and t[-1] <= hi + _TOL
                    and np.all(np.diff(t) >= self.min_spacing - _TOL)
                    and np.all(np.diff(t) > 0))

    def design(self, times):
        return Design(np.asarray(times, dtype=float), self.window, self.min_spacing)

    def feasible_interval(self, times, k):
        """Range coordinate ``k`` may move in with the others held fixed."""
        lo, hi = self.window
        left = times[k - 1] + self.min_spacing if k > 0 else lo
        right = times[k + 1] - self.min_spacing if k < len(times) - 1 else hi
        return max(left, lo), min(right, hi)


def equally_spaced(space):
    """``L`` equally spaced times from the start to the end of the window."""
    lo, hi = space.window
    times = np.array([lo]) if space.L == 1 else np.linspace(lo, hi, space.L)
    return space.design(times)


def random_design(space, rng):
    """Uniformly random feasible design (sorted uniforms on the slack interval)."""
    lo, hi = space.window
    slack = (hi - lo) - (space.L - 1) * space.min_spacing
    u = np.sort(rng.uniform(0.0, slack, space.L))
    times = lo + u + space.min_spacing * np.arange(space.L)
    # strictly increasing even when min_spacing is zero
    if space.L > 1 and np.any(np.diff(times) <= 0):
        return random_design(space, rng)
    return space.design(np.minimum(times, hi))


def _cubic_residual_variance(x, y):
    deg = min(3, len(x) - 1)
    coef = np.polyfit(x, y, deg)
    resid = y - np.polyval(coef, x)
    dof = max(len(x) - deg - 1, 1)
    return float(resid @ resid / dof)


class GPEmulator1D(RegressorMixin, BaseEstimator):
    """Gaussian-process regression on one input with fixed hyperparameters.

    Squared-exponential kernel; lengthscale is the median pairwise distance
    of the training inputs, signal variance the sample variance of the
    targets, and the nugget the larger of 1e-6 and the residual variance of a
    cubic polynomial fit.  The prior mean is the target average.
    """

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if x.size != y.size:
            raise ValueError("X and y lengths differ")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("inputs must be finite")
        if np.unique(x).size < 5:
            raise ValueError("the emulator needs at least 5 distinct inputs")
        self.x_ = x
        self.mean_ = float(y.mean())
        self.lengthscale_ = float(np.median(pdist(x[:, None])))
        self.signal_var_ = float(y.var(ddof=1))
        self.nugget_ = max(NUGGET_FLOOR, _cubic_residual_variance(x, y))
        self.domain_ = (float(x.min()), float(x.max()))
        if self.signal_var_ == 0.0:
            self.alpha_ = np.zeros_like(x)
            return self
        K = self._kernel(x, x) + self.nugget_ * np.eye(x.size)
        self.alpha_ = linalg.cho_solve(linalg.cho_factor(K), y - self.mean_)
        return self

    def _kernel(self, a, b):
        d = (a[:, None] - b[None, :]) / self.lengthscale_
        return self.signal_var_ * np.exp(-0.5 * d * d)

    def predict(self, X):
        x = np.asarray(X, dtype=float).reshape(-1)
        return self.mean_ + self._kernel(x, self.x_) @ self.alpha_


def gp_emulate_1d(xs, ys):
    """Fitted :class:`GPEmulator1D`; call ``.predict`` for the posterior mean."""
    return GPEmulator1D().fit(xs, ys)


@dataclass
class ACEOptions:
    sweeps: int = 10
    Q_emulator: int = 500
    Q_test: int = 5000
    candidates_per_coord: int = 20
    grid_size: int = 200


@dataclass
class TraceEntry:
    sweep: int
    coordinate: int
    proposed: float
    accepted: bool
    utility: float
    design: list


@dataclass
class OptResult:
    """Best design found with the full exchange trace."""

    design: Design
    utility: float
    trace: list = field(default_factory=list)
    n_evaluations: int = 0

    def to_json(self, path=None):
        payload = {
            "design": [float(t) for t in self.design.times],
            "utility": float(self.utility),
            "n_evaluations": int(self.n_evaluations),
            "trace": [{"sweep": e.sweep, "coordinate": e.coordinate,
                       "proposed": float(e.proposed), "accepted": bool(e.accepted),
                       "utility": float(e.utility),
                       "design": [float(t) for t in e.design]} for e in self.trace],
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "time"])
            for i, t in enumerate(self.design.times):
                w.writerow([i, repr(float(t))])


def ace_optimize(objective, d0, space, opts=None, seed=0):
    """Approximate coordinate exchange.

    Parameters
    ----------
    objective : callable
        ``objective(times, Q, seed) -> float`` estimating the expected utility
        with ``Q`` draws; equal seeds must give common random numbers.
    d0 : Design or array_like
        Starting design, which must lie in ``space``.
    space : DesignSpace
    opts : ACEOptions

    Each coordinate in turn is emulated over its feasible interval from
    ``candidates_per_coord`` cheap evaluations, the emulator maximizer is
    proposed, and the proposal is kept only if it beats the current design
    on a paired comparison with ``Q_test`` draws.  The comparison seed is the
    same for the whole run.
    """
    opts = opts or ACEOptions()
    current = np.array(getattr(d0, "times", d0), dtype=float)
    if not space.contains(current):
        raise ValueError("starting design is outside the design space")
    emu_seeds = iter(replicate_seeds(check_seed(seed), opts.sweeps * space.L + 1))
    # one test seed for the whole run keeps every comparison paired and the
    # accepted utilities nondecreasing
    test_seed = int(next(emu_seeds))
    current_u = objective(current, opts.Q_test, test_seed)
    n_eval = 1
    trace = []
    for sweep in range(opts.sweeps):
        for k in range(space.L):
            lo, hi = space.feasible_interval(current, k)
            emu_seed = int(next(emu_seeds))
            if hi - lo <= _TOL:
                continue
            xs = np.linspace(lo, hi, opts.candidates_per_coord)
            ys = []
            for x in xs:
                trial = current.copy()
                trial[k] = x
                ys.append(objective(trial, opts.Q_emulator, emu_seed))
            n_eval += len(xs)
            grid = np.linspace(lo, hi, opts.grid_size)
            try:
                best = float(grid[np.argmax(gp_emulate_1d(xs, ys).predict(grid))])
            except ValueError:
                best = float(xs[int(np.argmax(ys))])
            proposal = current.copy()
            proposal[k] = best
            accepted = False
            if space.contains(proposal) and best != current[k]:
                u_new = objective(proposal, opts.Q_test, test_seed)
                n_eval += 1
                accepted = u_new - current_u > 0
                if accepted:
                    current, current_u = proposal, u_new
            trace.append(TraceEntry(sweep, k, best, bool(accepted), current_u,
                                    current.tolist()))
    return OptResult(space.design(current), current_u, trace, n_eval)


class ACEOptimizer(BaseEstimator):
    """Estimator wrapper around :func:`ace_optimize`.

    ``fit(objective)`` runs the search from ``d0`` (default: equally spaced)
    and stores ``result_``, ``design_`` and ``utility_``.
    """

    def __init__(self, space, d0=None, sweeps=10, Q_emulator=500, Q_test=5000,
                 candidates_per_coord=20, seed=0):
        self.space = space
        self.d0 = d0
        self.sweeps = sweeps
        self.Q_emulator = Q_emulator
        self.Q_test = Q_test
        self.candidates_per_coord = candidates_per_coord
        self.seed = seed

    def fit(self, objective, y=None):
        d0 = self.d0 if self.d0 is not None else equally_spaced(self.space)
        opts = ACEOptions(self.sweeps, self.Q_emulator, self.Q_test,
                          self.candidates_per_coord)
        self.result_ = ace_optimize(objective, d0, self.space, opts, self.seed)
        self.design_ = self.result_.design
        self.utility_ = self.result_.utility
        return self
