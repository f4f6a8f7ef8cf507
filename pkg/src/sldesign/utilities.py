"""Per-dataset utilities and their Monte Carlo / RQMC expectation.

Utilities are oriented so that larger is better:

* SIGP  ``log q(phi | y) - log p(phi)``, information gained about the
  log-parameters of the generating model (``q`` is the Laplace posterior).
* NSEL  ``-||phi - mode||^2`` on the log scale.
* SIGM  ``log p(m | y)``, log posterior probability of the generating model.
* SIGT  SIGP + SIGM.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._validation import check_seed, replicate_seeds
from .laplace import LaplaceOptions, exact_laplace_fit, laplace_fit, posterior_model_probs
from .sampling import check_model_prior, draw_log_params, sobol_owen

UTILITY_KINDS = ("SIGP", "NSEL", "SIGM", "SIGT")
PROB_FLOOR = 1e-300


class AllScreenedOutError(RuntimeError):
    """Every utility evaluation in a batch failed screening."""


def u_sigp(prior, fit, phi):
    """Laplace posterior log density minus prior log density at ``phi``."""
    phi = np.asarray(phi, dtype=float)
    return float(fit.logpdf(phi) - prior.logpdf_log(phi))


def u_nsel(fit, phi):
    """Negative squared distance between ``phi`` and the posterior mode."""
    return -float(np.sum((np.asarray(phi, dtype=float) - fit.mode) ** 2))


def u_sigm(posterior, m_true):
    """Log posterior probability of the generating model, floored at 1e-300."""
    return float(np.log(max(float(posterior.probs[m_true]), PROB_FLOOR)))


def u_sigt(sigp_value, sigm_value):
    return sigp_value + sigm_value


def check_kind(kind):
    kind = str(kind).upper()
    if kind not in UTILITY_KINDS:
        raise ValueError(f"utility kind must be one of {UTILITY_KINDS}, got {kind!r}")
    return kind


@dataclass
class UtilityEstimate:
    """Expected-utility estimate for one design.

    ``values`` holds the per-draw utilities (after substitution) with shape
    (K, Q); ``components`` holds the SIGP and SIGM parts for SIGT.
    """

    mean: float
    se: float
    Q: int
    substituted: int
    method: str
    kind: str
    values: np.ndarray = field(repr=False)
    model_prior: np.ndarray = field(repr=False)
    components: dict = field(default_factory=dict, repr=False)

    def component_mean(self, name):
        return float(self.model_prior @ self.components[name].mean(axis=1))

    def to_dict(self):
        return {"kind": self.kind, "method": self.method, "mean": float(self.mean),
                "se": float(self.se), "Q": int(self.Q),
                "substituted": int(self.substituted),
                "evaluations": int(self.values.size)}


def _fit(model, data, times, opts, seed, likelihood):
    if likelihood == "synthetic":
        return laplace_fit(model, model.summarize(data), times, opts, seed)
    return exact_laplace_fit(model, data, times, opts)


def _evaluate(models, m, phi, data, times, kind, opts, seeds, model_prior, likelihood):
    """Utility components for one dataset, or None when screened out."""
    K = len(models)
    wanted = range(K) if kind in ("SIGM", "SIGT") else (m,)
    fits = {}
    for k in wanted:
        fit = _fit(models[k], data, times, opts, seeds[k], likelihood)
        if not fit.passed:
            return None
        fits[k] = fit
    out = {}
    if kind in ("SIGP", "SIGT"):
        out["SIGP"] = u_sigp(models[m].prior, fits[m], phi)
    if kind == "NSEL":
        out["NSEL"] = u_nsel(fits[m], phi)
    if kind in ("SIGM", "SIGT"):
        post = posterior_model_probs([fits[k].log_evidence for k in range(K)],
                                     model_prior)
        out["SIGM"] = u_sigm(post, m)
    if kind == "SIGT":
        out["SIGT"] = u_sigt(out["SIGP"], out["SIGM"])
    return out


def _draws(prior, Q, method, seed, n_randomizations):
    if method == "mc":
        return draw_log_params(prior, Q, "mc", seed)
    if method != "rqmc":
        raise ValueError(f"method must be 'mc' or 'rqmc', got {method!r}")
    size = Q // n_randomizations
    groups = check_seed(seed).spawn(n_randomizations)
    u = np.vstack([sobol_owen(prior.dim, size, g).points for g in groups])
    return prior.mean + prior.sd * special.ndtri(u)


def _standard_error(values, p, method, n_randomizations):
    K, Q = values.shape
    if method == "mc":
        var = values.var(axis=1, ddof=1) / Q
    else:
        means = values.reshape(K, n_randomizations, -1).mean(axis=2)
        var = means.var(axis=1, ddof=1) / n_randomizations
    return float(np.sqrt(np.sum(p**2 * var)))


def expected_utility(models, design, kind, Q, method="mc", seed=0, opts=None,
                     model_prior=None, likelihood="synthetic", n_randomizations=8,
                     threads=1):
    """Estimate the expected utility of a design.

    Parameters
    ----------
    models : list
        Summary models (one per candidate model), each with a ``prior``.
    design : Design or array_like
        Observation times.
    kind : {"SIGP", "NSEL", "SIGM", "SIGT"}
    Q : int
        Prior-predictive draws per model.
    method : {"mc", "rqmc"}
        Under ``rqmc`` the ``Q`` draws are ``n_randomizations`` independent
        Owen scrambles of ``Q / n_randomizations`` Sobol points each, and the
        standard error comes from the spread of the scramble means.
    likelihood : {"synthetic", "exact"}
        Laplace fits on the synthetic likelihood of summaries, or on the
        exact likelihood of the full observations.

    Screened-out evaluations are replaced by the smallest utility observed in
    the batch.  Raises :class:`AllScreenedOutError` when nothing passes.
    """
    kind = check_kind(kind)
    if Q < 2:
        raise ValueError(f"Q must be >= 2, got {Q}")
    if likelihood not in ("synthetic", "exact"):
        raise ValueError(f"likelihood must be 'synthetic' or 'exact', got {likelihood!r}")
    if method == "rqmc" and (n_randomizations < 2 or Q % n_randomizations):
        raise ValueError(f"rqmc needs Q divisible by n_randomizations >= 2, "
                         f"got Q={Q}, n_randomizations={n_randomizations}")
    models = list(models)
    K = len(models)
    p = check_model_prior(model_prior, K)
    opts = opts or LaplaceOptions()
    times = np.asarray(getattr(design, "times", design), dtype=float)

    tasks = []
    for m, ss in enumerate(check_seed(seed).spawn(K)):
        param_seq, data_seq, fit_seq = ss.spawn(3)
        phis = _draws(models[m].prior, Q, method, param_seq, n_randomizations)
        data_seeds = replicate_seeds(data_seq, Q)
        fit_seeds = replicate_seeds(fit_seq, Q * K).reshape(Q, K)
        for q in range(Q):
            tasks.append((m, phis[q], int(data_seeds[q]), fit_seeds[q]))

    def run(task):
        m, phi, data_seed, fseeds = task
        data = models[m].simulate_data(phi, times, data_seed)
        return _evaluate(models, m, phi, data, times, kind, opts,
                         [int(s) for s in fseeds], p, likelihood)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    names = ("SIGP", "SIGM", "SIGT") if kind == "SIGT" else (kind,)
    comps = {n: np.full((K, Q), np.nan) for n in names}
    for i, res in enumerate(results):
        if res is not None:
            for n in names:
                comps[n][i // Q, i % Q] = res[n]
    values = comps[kind]
    failed = np.isnan(values)
    if failed.all():
        raise AllScreenedOutError(f"all {values.size} utility evaluations were "
                                  "screened out")
    worst = np.unravel_index(np.nanargmin(values), values.shape)
    for n in names:
        comps[n][failed] = comps[n][worst]
    return UtilityEstimate(float(p @ values.mean(axis=1)),
                           _standard_error(values, p, method, n_randomizations), Q,
                           int(failed.sum()), method, kind, values, p,
                           comps if kind == "SIGT" else {})
