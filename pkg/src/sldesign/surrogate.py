"""Linear-Gaussian summary model with closed-form posteriors.

Summaries are ``s = A phi + b + eps`` with ``eps ~ N(0, Sigma)`` and a
Gaussian prior on ``phi``; ``A`` may grow with the design so the expected
information depends on the observation times.  It plugs into every place a
:class:`~sldesign.synlik.CTMCSummaryModel` does, which makes it the oracle
for the Laplace, evidence and expected-utility machinery.
"""

import numpy as np
from scipy import linalg, stats

from ._validation import replicate_seeds
from .synlik import SynLikFit


class LinearGaussianModel:
    """Conjugate surrogate.

    Parameters
    ----------
    A : array, shape (d, q)
    b : array, shape (d,)
    Sigma : array, shape (d, d)
    prior : PriorSpec
    design_scale : callable, optional
        Maps observation times to a multiplier applied to ``A``.
    noisy_regressions : bool
        If False the local-regression simulations return the exact mean,
        giving J = A and R^2 = 1.
    """

    def __init__(self, A, b, Sigma, prior, design_scale=None, noisy_regressions=False,
                 name="linear-gaussian"):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        self.Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
        self.prior = prior
        self.design_scale = design_scale
        self.noisy_regressions = noisy_regressions
        self.name = name
        if self.A.shape != (self.b.size, prior.dim):
            raise ValueError("A must have shape (len(b), prior.dim)")

    @property
    def n_params(self):
        return self.prior.dim

    def matrix(self, times):
        scale = 1.0 if self.design_scale is None else float(self.design_scale(times))
        return scale * self.A

    def mean(self, phi, times):
        return np.asarray(phi) @ self.matrix(times).T + self.b

    def _noise(self, n, seeds):
        chol = linalg.cholesky(self.Sigma, lower=True)
        z = np.stack([np.random.default_rng(int(s)).standard_normal(self.b.size)
                      for s in seeds]) if n else np.empty((0, self.b.size))
        return z @ chol.T

    def simulate_summaries(self, phis, times, seeds):
        phis = np.atleast_2d(phis)
        mu = self.mean(phis, times)
        if not self.noisy_regressions:
            return mu
        return mu + self._noise(len(phis), seeds)

    def simulate_data(self, phi, times, seed):
        return self.mean(np.asarray(phi)[None], times)[0] + self._noise(
            1, replicate_seeds(seed, 1))[0]

    def summarize(self, data):
        return np.asarray(data, dtype=float)

    def synthetic_fit(self, phi, times, n, seed):
        return SynLikFit(self.mean(np.asarray(phi)[None], times)[0], self.Sigma.copy(),
                         n, np.exp(phi), times)

    def exact_loglik(self, phi, data, times):
        return stats.multivariate_normal.logpdf(data, self.mean(np.asarray(phi)[None],
                                                                times)[0], self.Sigma)

    # closed forms

    def posterior(self, s, times):
        """Exact posterior mean and covariance of ``phi`` given summaries ``s``."""
        A = self.matrix(times)
        P0 = self.prior.precision
        Sinv = linalg.inv(self.Sigma)
        cov = linalg.inv(P0 + A.T @ Sinv @ A)
        mean = cov @ (P0 @ self.prior.mean + A.T @ Sinv @ (np.asarray(s) - self.b))
        return mean, cov

    def log_evidence(self, s, times):
        A = self.matrix(times)
        marg_cov = self.Sigma + A @ self.prior.covariance @ A.T
        return stats.multivariate_normal.logpdf(s, A @ self.prior.mean + self.b, marg_cov)

    def expected_information_gain(self, times):
        """Closed-form E[log p(phi|s) - log p(phi)] (mutual information)."""
        _, cov = self.posterior(self.b, times)
        return 0.5 * (np.linalg.slogdet(self.prior.covariance)[1]
                      - np.linalg.slogdet(cov)[1])


class PeakScale:
    """Design multiplier ``mean_t exp(-(t - peak)^2 / (2 width^2))``.

    Information is highest for observations at ``peak``, which gives the
    surrogate a known optimal design.
    """

    def __init__(self, peak, width=1.0):
        if width <= 0:
            raise ValueError(f"width must be positive, got {width}")
        self.peak = float(peak)
        self.width = float(width)

    def __call__(self, times):
        z = (np.asarray(times, dtype=float) - self.peak) / self.width
        return float(np.mean(np.exp(-0.5 * z * z)))
