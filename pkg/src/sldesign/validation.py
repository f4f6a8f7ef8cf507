"""Replicate studies comparing designs on posterior quality."""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_seed, replicate_seeds
from .laplace import (LaplaceOptions, exact_laplace_fit, laplace_fit, lis_posterior,
                      posterior_model_probs)
from .sampling import check_model_prior, draw_log_params


@dataclass
class ValidationReport:
    """Per-design, per-generating-model replicate results.

    ``prob_true[name][m]`` holds the posterior probability of model ``m`` for
    each of the ``R`` datasets it generated; ``logdet_precision[name][m]`` the
    log determinant of the inverse posterior covariance from Laplace
    importance sampling.  Failed replicates are NaN.
    """

    model_names: list
    R: int
    prob_true: dict = field(default_factory=dict)
    logdet_precision: dict = field(default_factory=dict)

    def medians(self):
        out = {}
        for name in self.prob_true:
            for m, model in enumerate(self.model_names):
                out[(name, model)] = (float(np.nanmedian(self.prob_true[name][m])),
                                      float(np.nanmedian(self.logdet_precision[name][m])))
        return out

    def failures(self, name):
        return int(np.sum(np.isnan(self.prob_true[name]))
                   + np.sum(np.isnan(self.logdet_precision[name])))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["design", "generating_model", "replicate", "prob_true_model",
                        "logdet_precision"])
            for name in self.prob_true:
                for m, model in enumerate(self.model_names):
                    for r in range(self.R):
                        w.writerow([name, model, r,
                                    repr(float(self.prob_true[name][m][r])),
                                    repr(float(self.logdet_precision[name][m][r]))])


def _replicate(models, m, phi, times, data_seed, fit_seeds, p, opts, n_is, inflation,
               likelihood):
    model = models[m]
    data = model.simulate_data(phi, times, data_seed)
    fits = []
    for k, other in enumerate(models):
        if likelihood == "exact":
            fits.append(exact_laplace_fit(other, data, times, opts))
        else:
            fits.append(laplace_fit(other, other.summarize(data), times, opts,
                                    int(fit_seeds[k])))
    prob = np.nan
    if all(f.passed for f in fits):
        prob = float(posterior_model_probs([f.log_evidence for f in fits], p).probs[m])
    logdet = np.nan
    if fits[m].passed:
        target = None
        if likelihood == "exact":
            def target(x):
                return model.exact_loglik(x, data, times)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                lis = lis_posterior(fits[m], model, model.summarize(data), times, n_is,
                                    int(fit_seeds[-1]), inflation, opts.n, target)
            logdet = lis.logdet_precision
        except (ValueError, np.linalg.LinAlgError):
            pass
    return prob, logdet


def validate_designs(models, designs, R=1000, seed=0, opts=None, model_prior=None,
                     n_is=500, inflation=1.2, likelihood="synthetic"):
    """Simulate ``R`` datasets per generating model for each named design.

    Parameters
    ----------
    models : list
        Summary models (see :class:`~sldesign.synlik.CTMCSummaryModel`).
    designs : dict
        Maps a design name to its observation times.
    likelihood : {"synthetic", "exact"}
        Likelihood used for both the Laplace fits and the importance weights.

    Every design sees the same parameter draws and simulation seeds, so
    differences between designs are paired.
    """
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if not designs:
        raise ValueError("at least one design is required")
    models = list(models)
    K = len(models)
    p = check_model_prior(model_prior, K)
    opts = opts or LaplaceOptions()
    report = ValidationReport([getattr(mod, "name", str(i)) for i, mod in
                               enumerate(models)], R)
    streams = []
    for m, ss in enumerate(check_seed(seed).spawn(K)):
        param_seq, data_seq, fit_seq = ss.spawn(3)
        streams.append((draw_log_params(models[m].prior, R, "mc", param_seq),
                        replicate_seeds(data_seq, R),
                        replicate_seeds(fit_seq, R * (K + 1)).reshape(R, K + 1)))
    for name, design in designs.items():
        times = np.asarray(getattr(design, "times", design), dtype=float)
        probs = np.full((K, R), np.nan)
        logdets = np.full((K, R), np.nan)
        for m in range(K):
            phis, data_seeds, fit_seeds = streams[m]
            for r in range(R):
                probs[m, r], logdets[m, r] = _replicate(
                    models, m, phis[r], times, int(data_seeds[r]), fit_seeds[r], p,
                    opts, n_is, inflation, likelihood)
        report.prob_true[name] = probs
        report.logdet_precision[name] = logdets
    return report
