"""Summary statistics of observed trajectories and their informativeness."""

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_seed, replicate_seeds
from .kinetics import Design, simulate_paths
from .sampling import draw_log_params

STATISTICS = ("mean", "variance", "log-variance", "median", "max")
_VARIANCE_TAGS = {"variance", "log-variance"}
LOG_VARIANCE_OFFSET = 0.5


def _statistic(tag, x):
    # x has shape (n, L); reductions over the time axis
    if tag == "mean":
        return x.mean(axis=1)
    if tag == "variance":
        return x.var(axis=1, ddof=1)
    if tag == "log-variance":
        return np.log(x.var(axis=1, ddof=1) + LOG_VARIANCE_OFFSET)
    if tag == "median":
        return np.median(x, axis=1)
    if tag == "max":
        return x.max(axis=1)
    raise ValueError(f"unknown statistic {tag!r}")


@dataclass(frozen=True)
class SummaryScheme:
    """Statistic tags applied to every observed species, species-major order."""

    tags: tuple

    def __post_init__(self):
        tags = tuple(self.tags)
        if not tags:
            raise ValueError("a summary scheme needs at least one statistic")
        bad = [t for t in tags if t not in STATISTICS]
        if bad:
            raise ValueError(f"unknown statistics {bad}; choose from {STATISTICS}")
        object.__setattr__(self, "tags", tags)

    def dim(self, n_species):
        return len(self.tags) * n_species

    def labels(self, species):
        return [f"{sp}:{tag}" for sp in species for tag in self.tags]

    def apply(self, obs):
        """Summaries of a batch of observations with shape (n, L, species)."""
        obs = np.asarray(obs, dtype=float)
        if obs.ndim == 2:
            obs = obs[None]
        if obs.shape[1] < 2 and _VARIANCE_TAGS & set(self.tags):
            raise ValueError("variance-type statistics need at least 2 observation times")
        cols = [_statistic(tag, obs[:, :, j])
                for j in range(obs.shape[2]) for tag in self.tags]
        return np.column_stack(cols)


def summarize(traj, scheme):
    """Summary vector of one :class:`~sldesign.kinetics.Trajectory`."""
    return scheme.apply(traj.observations[None])[0]


class SummaryTransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer from observation arrays to summary vectors.

    ``X`` is an array of shape (n_samples, L, n_species) or a list of
    trajectories.
    """

    def __init__(self, tags=("mean", "variance")):
        self.tags = tags

    def fit(self, X, y=None):
        self.scheme_ = SummaryScheme(self.tags)
        return self

    def transform(self, X):
        scheme = getattr(self, "scheme_", None) or SummaryScheme(self.tags)
        if isinstance(X, (list, tuple)) and X and hasattr(X[0], "observations"):
            X = np.stack([t.observations for t in X])
        return scheme.apply(X)


@dataclass
class InformativenessReport:
    param_names: list
    stat_labels: list
    log_params: np.ndarray
    summaries: np.ndarray
    pearson: np.ndarray
    spearman: np.ndarray

    @property
    def rows(self):
        return [(p, s, self.pearson[i, j], self.spearman[i, j])
                for i, p in enumerate(self.param_names)
                for j, s in enumerate(self.stat_labels)]

    def correlations_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "statistic", "pearson", "spearman"])
            for p, s, r, rho in self.rows:
                w.writerow([p, s, repr(float(r)), repr(float(rho))])

    def scatter_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["draw", "parameter", "log_value", "statistic", "value"])
            for k in range(self.log_params.shape[0]):
                for i, p in enumerate(self.param_names):
                    for j, s in enumerate(self.stat_labels):
                        w.writerow([k, p, repr(float(self.log_params[k, i])), s,
                                    repr(float(self.summaries[k, j]))])


def _corr(x, y, rank):
    if rank:
        x, y = stats.rankdata(x), stats.rankdata(y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def informativeness_report(model, prior, design, Q, scheme, seed,
                           simulator="ssa", tau=0.05):
    """Correlate each log-parameter with each summary over prior-predictive draws."""
    if Q < 100:
        raise ValueError(f"Q must be >= 100, got {Q}")
    times = design.times if isinstance(design, Design) else np.asarray(design, float)
    param_seq, noise_seq = check_seed(seed).spawn(2)
    phi = draw_log_params(prior, Q, "mc", param_seq)
    obs = simulate_paths(model, np.exp(phi), times, replicate_seeds(noise_seq, Q),
                         method=simulator, tau=tau)
    s = scheme.apply(obs)
    q, d = phi.shape[1], s.shape[1]
    pearson = np.array([[_corr(phi[:, i], s[:, j], False) for j in range(d)]
                        for i in range(q)])
    spearman = np.array([[_corr(phi[:, i], s[:, j], True) for j in range(d)]
                         for i in range(q)])
    names = list(prior.names) or list(model.param_names)
    return InformativenessReport(names, scheme.labels(model.observed_species),
                                 phi, s, pearson, spearman)
