"""Synthetic likelihood: simulated summary moments, local regressions, screening.

All parameters handled here live on the log scale (``phi = log theta``).
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._validation import check_seed, replicate_seeds
from .kinetics import Design, simulate_paths
from .oracle import exact_log_likelihood

RIDGE_FACTOR = 1e-6
RIDGE_FLOOR = 1e-8
MIN_PERTURB_SD = 1e-6
DEFAULT_THRESHOLDS = (0.7, 0.1)


@dataclass
class SynLikFit:
    """Gaussian moments of simulated summaries at one parameter point."""

    mu_hat: np.ndarray
    Sigma_hat: np.ndarray
    n: int
    theta: np.ndarray = None
    times: np.ndarray = None

    @property
    def dim(self):
        return self.mu_hat.size


@dataclass
class CurvatureFit:
    J: np.ndarray
    r2: np.ndarray
    Sigma_hat: np.ndarray = None
    H: np.ndarray = None
    passed: bool = None


def regularize(cov):
    d = cov.shape[0]
    ridge = max(RIDGE_FACTOR * np.trace(cov) / d, RIDGE_FLOOR)
    return cov + ridge * np.eye(d)


def synlik_from_samples(S, theta=None, times=None):
    """Sample mean and ridge-regularized sample covariance of summaries ``S``."""
    S = np.asarray(S, dtype=float)
    n, d = S.shape
    if n < d + 2:
        raise ValueError(f"need at least {d + 2} simulations for {d} summaries, got {n}")
    mu = S.mean(axis=0)
    cov = np.atleast_2d(np.cov(S, rowvar=False))
    return SynLikFit(mu, regularize(0.5 * (cov + cov.T)), n, theta, times)


def synlik_logpdf(fit, s_obs):
    """Multivariate normal log density of ``s_obs`` under the fitted moments."""
    s_obs = np.asarray(s_obs, dtype=float).reshape(-1)
    if s_obs.size != fit.dim:
        raise ValueError(f"summary dimension {s_obs.size} != fitted dimension {fit.dim}")
    try:
        chol = linalg.cho_factor(fit.Sigma_hat, lower=True)
    except linalg.LinAlgError as exc:
        raise ValueError("synthetic covariance is not positive definite") from exc
    r = s_obs - fit.mu_hat
    maha = r @ linalg.cho_solve(chol, r)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    return -0.5 * (logdet + maha + fit.dim * np.log(2 * np.pi))


class CTMCSummaryModel:
    """A CTMC with its prior and summary scheme, simulated on the log scale.

    This is the unit the posterior and utility code works with: it can
    simulate data, reduce data to summaries, and estimate synthetic
    likelihood moments at any log-parameter point.
    """

    def __init__(self, model, prior, scheme, simulator="ssa", tau=0.05):
        if prior.dim != model.n_params:
            raise ValueError(f"prior has {prior.dim} parameters, {model.id} needs "
                             f"{model.n_params}")
        self.model = model
        self.prior = prior
        self.scheme = scheme
        self.simulator = simulator
        self.tau = tau

    @property
    def name(self):
        return self.model.id

    @property
    def n_params(self):
        return self.model.n_params

    def simulate_observations(self, phis, times, seeds):
        return simulate_paths(self.model, np.exp(np.atleast_2d(phis)), times, seeds,
                              method=self.simulator, tau=self.tau)

    def simulate_summaries(self, phis, times, seeds):
        return self.scheme.apply(self.simulate_observations(phis, times, seeds))

    def simulate_data(self, phi, times, seed):
        return self.simulate_observations(phi, times, replicate_seeds(seed, 1))[0]

    def summarize(self, data):
        return self.scheme.apply(np.asarray(data)[None])[0]

    def synthetic_fit(self, phi, times, n, seed):
        seeds = replicate_seeds(seed, n)
        phis = np.broadcast_to(np.asarray(phi, dtype=float), (n, self.n_params))
        return synlik_from_samples(self.simulate_summaries(phis, times, seeds),
                                   np.exp(phi), times)

    def exact_loglik(self, phi, data, times):
        return exact_log_likelihood(self.model, np.exp(phi), data, times)


def fit_synlik(model, theta, design, n, scheme, seed, simulator="ssa", tau=0.05):
    """Synthetic likelihood moments of ``scheme`` summaries from ``n`` simulations."""
    times = design.times if isinstance(design, Design) else np.asarray(design, float)
    d = scheme.dim(len(model.observed_species))
    if n < d + 2:
        raise ValueError(f"need at least {d + 2} simulations for {d} summaries, got {n}")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    obs = simulate_paths(model, np.broadcast_to(theta, (n, theta.size)), times,
                         replicate_seeds(seed, n), method=simulator, tau=tau)
    return synlik_from_samples(scheme.apply(obs), theta, times)


def _r2(y, X):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    tss = np.sum((y - y.mean()) ** 2)
    if tss == 0:
        return 0.0
    return float(np.clip(1.0 - resid @ resid / tss, 0.0, 1.0))


def local_regressions(phis, S, center):
    """Forward Jacobian and reverse-regression R^2 from perturbed simulations.

    ``phis`` (n, q) are log-parameter points and ``S`` (n, d) the summaries
    simulated at them.  Row j of the Jacobian comes from the least-squares fit
    of summary j on the centred log-parameters; the R^2 values come from
    regressing each log-parameter on all summaries.
    """
    n, q = phis.shape
    X = np.column_stack([np.ones(n), phis - center])
    if np.linalg.matrix_rank(X) < q + 1:
        raise ValueError("singular local regression design")
    coef, *_ = np.linalg.lstsq(X, S, rcond=None)
    J = coef[1:].T
    sd = S.std(axis=0)
    keep = sd > 0
    Z = (S[:, keep] - S[:, keep].mean(axis=0)) / sd[keep]
    Xr = np.column_stack([np.ones(n), Z])
    r2 = np.array([_r2(phis[:, i], Xr) for i in range(q)])
    return J, r2


def local_jacobian(model, theta, design, n_loc, perturb_sd, seed):
    """Local linear regressions of summaries around ``theta``.

    ``model`` is a summary model (e.g. :class:`CTMCSummaryModel`); ``theta``
    is given on the natural scale.  One trajectory is simulated at each of
    ``n_loc`` Gaussian perturbations of ``log theta``; ``perturb_sd`` is a
    scalar or one sd per parameter.
    """
    q = model.n_params
    perturb_sd = np.broadcast_to(np.asarray(perturb_sd, dtype=float), (q,))
    if np.any(perturb_sd < MIN_PERTURB_SD):
        raise ValueError(f"perturb_sd must be >= {MIN_PERTURB_SD}, got {perturb_sd}")
    if n_loc < 10 * q:
        raise ValueError(f"n_loc must be >= {10 * q}, got {n_loc}")
    times = design.times if isinstance(design, Design) else np.asarray(design, float)
    center = np.log(np.asarray(theta, dtype=float).reshape(-1))
    draw_seq, sim_seq = check_seed(seed).spawn(2)
    z = np.random.default_rng(draw_seq).standard_normal((n_loc, q))
    phis = center + perturb_sd * z
    S = model.simulate_summaries(phis, times, replicate_seeds(sim_seq, n_loc))
    J, r2 = local_regressions(phis, S, center)
    return CurvatureFit(J, r2)


def gauss_newton_hessian(curv, fit, prior):
    """Hessian of synthetic log-likelihood plus log prior (log scale).

    Curvature of the mean map is ignored and the covariance is held fixed,
    giving ``-J' Sigma^-1 J - prior precision``.
    """
    J = np.atleast_2d(curv.J)
    SinvJ = linalg.solve(fit.Sigma_hat, J, assume_a="pos")
    H = -(J.T @ SinvJ) - prior.precision
    return 0.5 * (H + H.T)


def screen_fit(curv, q, thresholds=DEFAULT_THRESHOLDS):
    """True when every reverse-regression R^2 clears the threshold for ``q``."""
    r2 = np.asarray(curv.r2, dtype=float)
    threshold = thresholds[0] if q == 1 else thresholds[1]
    return bool(np.min(r2) >= threshold)
