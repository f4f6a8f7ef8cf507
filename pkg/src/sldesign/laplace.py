"""Laplace posteriors built on the synthetic (or exact) likelihood.

Every mode search runs over log-parameters, where the priors are Gaussian.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special
from sklearn.base import BaseEstimator

from ._validation import check_seed
from .sampling import check_model_prior
from .synlik import (DEFAULT_THRESHOLDS, gauss_newton_hessian, local_jacobian,
                     screen_fit, synlik_logpdf)

LOG_2PI = np.log(2 * np.pi)


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_eval: int
    converged: bool


def nelder_mead_maximize(f, x0, max_iter=500, x_tol=1e-3, f_tol=1e-3, step=None):
    """Maximize ``f`` with the Nelder-Mead simplex method.

    Standard coefficients: reflection 1, expansion 2, contraction 0.5,
    shrink 0.5.  The initial simplex is ``x0`` plus one vertex per axis at
    distance ``step`` (default 0.1, or 0.00025 for zero coordinates).
    Stops when the simplex diameter drops below ``x_tol``, when the spread of
    vertex values drops below ``f_tol``, or after ``max_iter`` iterations.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    q = x0.size
    if step is None:
        step = np.where(x0 != 0, 0.1 * np.abs(x0), 0.00025)
    step = np.broadcast_to(np.asarray(step, dtype=float), (q,))
    fx0 = f(x0)
    if not np.isfinite(fx0):
        raise ValueError("objective must be finite at the starting point")

    n_eval = 1

    def g(x):
        nonlocal n_eval
        n_eval += 1
        v = f(x)
        return -v if np.isfinite(v) else np.inf

    simplex = np.vstack([x0, x0 + np.diag(step)])
    vals = np.array([-fx0] + [g(v) for v in simplex[1:]])
    it = 0
    converged = False
    while True:
        order = np.argsort(vals, kind="stable")
        simplex, vals = simplex[order], vals[order]
        diameter = np.max(np.abs(simplex[1:] - simplex[0]))
        if diameter < x_tol or vals[-1] - vals[0] < f_tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + (centroid - simplex[-1])
        fr = g(xr)
        if fr < vals[0]:
            xe = centroid + 2.0 * (centroid - simplex[-1])
            fe = g(xe)
            if fe < fr:
                simplex[-1], vals[-1] = xe, fe
            else:
                simplex[-1], vals[-1] = xr, fr
        elif fr < vals[-2]:
            simplex[-1], vals[-1] = xr, fr
        else:
            if fr < vals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = g(xc)
                accept = fc <= fr
            else:
                xc = centroid + 0.5 * (simplex[-1] - centroid)
                fc = g(xc)
                accept = fc < vals[-1]
            if accept:
                simplex[-1], vals[-1] = xc, fc
            else:
                simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
                vals[1:] = [g(v) for v in simplex[1:]]
    return NelderMeadResult(simplex[0].copy(), -vals[0], it, n_eval, converged)


@dataclass
class LaplaceOptions:
    """Tuning constants for one Laplace fit.

    ``perturb_sd`` may be a scalar, one value per parameter, or ``"prior"``
    to perturb each log-parameter by its prior sd.
    """

    n: int = 500
    n_loc: int = 200
    perturb_sd: float = 0.1
    x_tol: float = 1e-3
    f_tol: float = 1e-3
    max_iter: int = 500
    thresholds: tuple = DEFAULT_THRESHOLDS
    simplex_scale: float = 0.5
    restart: bool = True
    fd_step: float = 1e-3


@dataclass
class LaplaceFit:
    """Gaussian approximation ``MVN(mode, cov)`` to a log-parameter posterior."""

    mode: np.ndarray
    cov: np.ndarray
    log_evidence: float
    passed: bool
    n_iter: int
    loglik_at_mode: float = np.nan
    prior_at_mode: float = np.nan
    r2: np.ndarray = field(default=None)
    converged: bool = True

    def logpdf(self, phi):
        phi = np.asarray(phi, dtype=float)
        r = phi - self.mode
        chol = linalg.cholesky(self.cov, lower=True)
        z = linalg.solve_triangular(chol, r.T, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return -0.5 * (np.sum(z * z, axis=0) + logdet + self.mode.size * LOG_2PI)


def log_evidence(cov, loglik_at_mode, prior_at_mode, q):
    """Laplace evidence ``(q/2) log 2pi + (1/2) log|cov| + loglik + log prior``."""
    sign, logdet = np.linalg.slogdet(np.atleast_2d(cov))
    if sign <= 0:
        raise ValueError("posterior covariance must be positive definite")
    return 0.5 * q * LOG_2PI + 0.5 * logdet + loglik_at_mode + prior_at_mode


def _finalize(mode, H, loglik, prior_lp, n_iter, converged, r2, screened):
    q = mode.size
    neg_h = -np.atleast_2d(H)
    try:
        chol = linalg.cholesky(neg_h, lower=True)
    except linalg.LinAlgError:
        cov = np.full((q, q), np.nan)
        return LaplaceFit(mode, cov, np.nan, False, n_iter, loglik, prior_lp, r2,
                          converged)
    cov = linalg.cho_solve((chol, True), np.eye(q))
    cov = 0.5 * (cov + cov.T)
    ev = log_evidence(cov, loglik, prior_lp, q)
    passed = bool(converged and screened and np.isfinite(ev))
    return LaplaceFit(mode, cov, ev, passed, n_iter, loglik, prior_lp, r2, converged)


def _search(logpost, prior, opts, start):
    return nelder_mead_maximize(logpost, start, max_iter=opts.max_iter, x_tol=opts.x_tol,
                                f_tol=opts.f_tol, step=opts.simplex_scale * prior.sd)


def _restart_point(prior, first_mode):
    direction = np.sign(first_mode - prior.mean)
    direction[direction == 0] = 1.0
    return prior.mean + direction * prior.sd


def laplace_fit(model, s_obs, design, opts=None, seed=0):
    """Synthetic-likelihood Laplace approximation to ``p(log theta | s_obs)``.

    One simulation seed is reused for every parameter visited during the
    mode search (common random numbers), so the objective is deterministic.
    Curvature at the mode comes from local regressions and the Gauss-Newton
    Hessian; ``passed`` is False when the search did not converge, the R^2
    screen failed, or the Hessian is not negative definite.
    """
    opts = opts or LaplaceOptions()
    times = getattr(design, "times", design)
    prior = model.prior
    s_obs = np.asarray(s_obs, dtype=float)
    crn_seq, curv_seq = check_seed(seed).spawn(2)
    crn = int(crn_seq.generate_state(1)[0])
    perturb_sd = opts.perturb_sd
    if isinstance(perturb_sd, str):
        if perturb_sd != "prior":
            raise ValueError(f"perturb_sd must be numeric or 'prior', got {perturb_sd!r}")
        perturb_sd = prior.sd

    def logpost(phi):
        try:
            lik = synlik_logpdf(model.synthetic_fit(phi, times, opts.n, crn), s_obs)
        except ValueError:
            return -np.inf
        return lik + prior.logpdf_log(phi)

    def fit_from(start):
        res = _search(logpost, prior, opts, start)
        mode = res.x
        synfit = model.synthetic_fit(mode, times, opts.n, crn)
        lik = synlik_logpdf(synfit, s_obs)
        curv = local_jacobian(model, np.exp(mode), times, opts.n_loc, perturb_sd,
                              curv_seq)
        H = gauss_newton_hessian(curv, synfit, prior)
        screened = screen_fit(curv, prior.dim, opts.thresholds)
        return _finalize(mode, H, lik, prior.logpdf_log(mode), res.n_iter,
                         res.converged, curv.r2, screened)

    fit = fit_from(prior.mean.copy())
    if not fit.passed and opts.restart:
        second = fit_from(_restart_point(prior, fit.mode))
        if second.passed:
            return second
    return fit


def fd_hessian(f, x, h):
    """Central finite-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    q = x.size
    H = np.empty((q, q))
    f0 = f(x)
    E = np.eye(q) * h
    for i in range(q):
        H[i, i] = (f(x + E[i]) - 2 * f0 + f(x - E[i])) / h**2
        for j in range(i + 1, q):
            H[i, j] = H[j, i] = (f(x + E[i] + E[j]) - f(x + E[i] - E[j])
                                 - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4 * h * h)
    return H


def exact_laplace_fit(model, data, design, opts=None):
    """Laplace approximation built on the exact likelihood of full data.

    The Hessian is a central finite difference of the log posterior; there is
    no regression screen, so ``passed`` reflects convergence and definiteness.
    """
    opts = opts or LaplaceOptions()
    times = getattr(design, "times", design)
    prior = model.prior

    def logpost(phi):
        return model.exact_loglik(phi, data, times) + prior.logpdf_log(phi)

    start = prior.mean.copy()
    if not np.isfinite(logpost(start)):
        return LaplaceFit(start, np.full((prior.dim,) * 2, np.nan), np.nan, False, 0)
    res = _search(logpost, prior, opts, start)
    H = fd_hessian(logpost, res.x, opts.fd_step)
    if not np.all(np.isfinite(H)):
        return LaplaceFit(res.x, np.full((prior.dim,) * 2, np.nan), np.nan, False,
                          res.n_iter)
    lik = model.exact_loglik(res.x, data, times)
    return _finalize(res.x, H, lik, prior.logpdf_log(res.x), res.n_iter, res.converged,
                     None, True)


@dataclass
class ModelPosterior:
    log_evidences: np.ndarray
    probs: np.ndarray


def posterior_model_probs(log_evidences, model_prior=None):
    """Posterior model probabilities from log evidences and prior weights."""
    le = np.asarray(log_evidences, dtype=float)
    prior = check_model_prior(model_prior, le.size)
    if not np.all(np.isfinite(le)):
        raise ValueError("log evidences must be finite")
    with np.errstate(divide="ignore"):
        z = le + np.log(prior)
    probs = np.exp(z - special.logsumexp(z))
    return ModelPosterior(le, probs / probs.sum())


@dataclass
class LISResult:
    samples: np.ndarray
    weights: np.ndarray
    ess: float
    mean: np.ndarray
    cov: np.ndarray
    logdet_precision: float


def lis_posterior(fit, model, s_obs, design, n_is=1000, seed=0, inflation=1.2,
                  n=500, log_target=None, scale="natural"):
    """Laplace importance sampling of the posterior.

    Draws from ``MVN(mode, inflation * cov)`` on the log scale and weights by
    the synthetic likelihood (or ``log_target(phi)`` when given) times the
    prior.  The returned ``logdet_precision`` is ``-log det`` of the weighted
    posterior covariance of the parameters on ``scale``.
    """
    if n_is < 100:
        raise ValueError(f"n_is must be >= 100, got {n_is}")
    if not fit.passed:
        raise ValueError("LIS needs a Laplace fit that passed screening")
    times = getattr(design, "times", design)
    draw_seq, crn_seq = check_seed(seed).spawn(2)
    crn = int(crn_seq.generate_state(1)[0])
    prop_cov = inflation * fit.cov
    chol = linalg.cholesky(prop_cov, lower=True)
    z = np.random.default_rng(draw_seq).standard_normal((n_is, fit.mode.size))
    phis = fit.mode + z @ chol.T
    log_q = (-0.5 * np.sum(z * z, axis=1) - np.sum(np.log(np.diag(chol)))
             - 0.5 * fit.mode.size * LOG_2PI)
    if log_target is None:
        s_obs = np.asarray(s_obs, dtype=float)

        def log_target(phi):
            try:
                return synlik_logpdf(model.synthetic_fit(phi, times, n, crn), s_obs)
            except ValueError:
                return -np.inf
    log_p = np.array([log_target(p) for p in phis]) + model.prior.logpdf_log(phis)
    log_w = log_p - log_q
    if not np.any(np.isfinite(log_w)):
        raise ValueError("all importance weights are zero")
    w = np.exp(log_w - np.max(log_w))
    w /= w.sum()
    ess = 1.0 / np.sum(w**2)
    if ess < 0.05 * n_is:
        warnings.warn(f"LIS effective sample size {ess:.1f} is below 5% of {n_is}",
                      RuntimeWarning, stacklevel=2)
    values = np.exp(phis) if scale == "natural" else phis
    mean = w @ values
    centred = values - mean
    cov = (centred * w[:, None]).T @ centred
    sign, logdet = np.linalg.slogdet(np.atleast_2d(cov))
    return LISResult(phis, w, ess, mean, cov, -logdet if sign > 0 else np.nan)


class LaplacePosterior(BaseEstimator):
    """Estimator wrapper: ``fit(s_obs)`` locates the synthetic-likelihood mode.

    Parameters mirror :class:`LaplaceOptions`; fitted attributes are
    ``mode_``, ``covariance_``, ``log_evidence_`` and ``passed_``.
    """

    def __init__(self, model, design, n=500, n_loc=200, perturb_sd=0.1, x_tol=1e-3,
                 f_tol=1e-3, max_iter=500, thresholds=DEFAULT_THRESHOLDS, seed=0):
        self.model = model
        self.design = design
        self.n = n
        self.n_loc = n_loc
        self.perturb_sd = perturb_sd
        self.x_tol = x_tol
        self.f_tol = f_tol
        self.max_iter = max_iter
        self.thresholds = thresholds
        self.seed = seed

    def fit(self, s_obs, y=None):
        opts = LaplaceOptions(n=self.n, n_loc=self.n_loc, perturb_sd=self.perturb_sd,
                              x_tol=self.x_tol, f_tol=self.f_tol,
                              max_iter=self.max_iter, thresholds=tuple(self.thresholds))
        self.fit_ = laplace_fit(self.model, s_obs, self.design, opts, self.seed)
        self.mode_ = self.fit_.mode
        self.covariance_ = self.fit_.cov
        self.log_evidence_ = self.fit_.log_evidence
        self.passed_ = self.fit_.passed
        return self

    def score_samples(self, phi):
        """Laplace posterior log density at log-parameter points."""
        return self.fit_.logpdf(np.atleast_2d(phi))
