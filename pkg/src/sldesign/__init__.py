"""Bayesian experimental design for stochastic kinetic models using synthetic
likelihood Laplace approximations."""

from .design import (ACEOptimizer, ACEOptions, DesignSpace, GPEmulator1D, OptResult,
                     ace_optimize, equally_spaced, gp_emulate_1d, random_design)
from .kinetics import (Design, ModelSpec, Trajectory, get_model, simulate_paths,
                       simulate_ssa, simulate_tau_leap)
from .laplace import (LaplaceFit, LaplaceOptions, LaplacePosterior, exact_laplace_fit,
                      laplace_fit, lis_posterior, log_evidence, nelder_mead_maximize,
                      posterior_model_probs)
from .oracle import exact_log_likelihood, exact_transition_matrix
from .sampling import (PriorSpec, prior_log_density, prior_predictive, prior_sample,
                       sobol_owen)
from .summaries import SummaryScheme, SummaryTransformer, informativeness_report
from .surrogate import LinearGaussianModel
from .synlik import (CTMCSummaryModel, fit_synlik, gauss_newton_hessian,
                     local_jacobian, screen_fit, synlik_logpdf)
from .utilities import (AllScreenedOutError, UtilityEstimate, expected_utility, u_nsel,
                        u_sigm, u_sigp, u_sigt)
from .validation import ValidationReport, validate_designs

__version__ = "0.1.0"
