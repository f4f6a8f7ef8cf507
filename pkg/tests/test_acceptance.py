"""Acceptance criteria; each test prints one PASS/FAIL line.

The long-running criteria (1, 5, 6, 7) are marked ``slow`` and run at the
reduced scales stated in their docstrings.
"""

import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml
from scipy import stats

from sldesign._validation import replicate_seeds
from sldesign.cli import main
from sldesign.config import load_preset
from sldesign.design import (ACEOptions, DesignSpace, ace_optimize, equally_spaced,
                             random_design)
from sldesign.kinetics import death_model, simulate_paths
from sldesign.laplace import LaplaceOptions, fd_hessian, laplace_fit
from sldesign.oracle import exact_transition_matrix
from sldesign.synlik import CurvatureFit, gauss_newton_hessian, local_jacobian, screen_fit
from sldesign.surrogate import LinearGaussianModel
from sldesign.utilities import AllScreenedOutError, expected_utility
from sldesign.validation import validate_designs

TESTS = Path(__file__).parent
S_OBS = np.array([0.4, -0.9, 0.7])

# optimization scale for criteria 6 and 7
ACE_SCALE = ACEOptions(sweeps=1, Q_emulator=20, Q_test=100, candidates_per_coord=8)
OPT_LAPLACE = LaplaceOptions(n=200, n_loc=100, perturb_sd="prior")
FINAL_Q = {"SIGP": 1000, "SIGT": 500, "SIGM": 500}


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return emit


# criterion 1

@pytest.mark.slow
def test_criterion_1_synthetic_tracks_exact_utility(report, death_summary_model):
    """20 random 8-point death designs, Q=200, mean of R=5 re-evaluations."""
    space = load_preset("death_si").design_space()
    rng = np.random.default_rng(101)
    designs = [random_design(space, rng).times for _ in range(20)]
    opts = LaplaceOptions(perturb_sd="prior")
    syn, exact = [], []
    for times in designs:
        runs = {"synthetic": [], "exact": []}
        for r in range(5):
            for route in runs:
                est = expected_utility([death_summary_model], times, "SIGP", 200, "mc",
                                       1000 + r, opts, likelihood=route)
                runs[route].append(est.mean)
        syn.append(np.mean(runs["synthetic"]))
        exact.append(np.mean(runs["exact"]))
    rho = stats.spearmanr(syn, exact).statistic
    report(1, rho >= 0.8, f"Spearman(synthetic, exact) = {rho:.3f} (need >= 0.8)")


# criterion 2

def test_criterion_2_conjugate_laplace_exact(report, conjugate):
    opts = LaplaceOptions(x_tol=1e-9, f_tol=1e-13, max_iter=5000)
    fit = laplace_fit(conjugate, S_OBS, [1.0], opts, 0)
    mean, cov = conjugate.posterior(S_OBS, [1.0])
    ev = conjugate.log_evidence(S_OBS, [1.0])
    err_mode = np.max(np.abs(fit.mode - mean) / np.abs(mean))
    err_cov = np.max(np.abs(fit.cov - cov) / np.abs(cov).max())
    err_ev = abs(fit.log_evidence - ev) / abs(ev)
    ok = max(err_mode, err_cov, err_ev) <= 1e-3
    report(2, ok, f"relative errors mode {err_mode:.1e}, cov {err_cov:.1e}, "
                  f"log evidence {err_ev:.1e} (need <= 1e-3)")


# criterion 3

def test_criterion_3_gauss_newton_hessian(report, conjugate):
    phi0 = np.array([0.2, -0.1])

    def logpost(model):
        def f(phi):
            mu = model.mean(phi[None], [1.0])[0]
            return (stats.multivariate_normal.logpdf(S_OBS, mu, model.Sigma)
                    + model.prior.logpdf_log(phi))
        return f

    ref = fd_hessian(logpost(conjugate), phi0, 1e-3)
    fit = conjugate.synthetic_fit(phi0, [1.0], 100, 0)

    def rel_err(model, n_loc, sd, seed):
        curv = local_jacobian(model, np.exp(phi0), [1.0], n_loc, sd, seed)
        H = gauss_newton_hessian(curv, fit, model.prior)
        return np.linalg.norm(H - ref) / np.linalg.norm(ref)

    exact_j = rel_err(conjugate, 40, 0.1, 0)
    noisy = LinearGaussianModel(conjugate.A, conjugate.b, conjugate.Sigma, conjugate.prior,
                                noisy_regressions=True)
    regressed = float(np.median([rel_err(noisy, 500, 1.0, s) for s in range(10)]))
    ok = exact_j <= 0.05 and regressed <= 0.05
    report(3, ok, f"relative Frobenius error {exact_j:.1e} (exact J), "
                  f"{regressed:.3f} (median of 10 regressed J) (need <= 0.05)")


# criterion 4

def test_criterion_4_oracle_consistency(report):
    model = death_model(50)
    beta = float(np.exp(-0.48))
    P = exact_transition_matrix(model, [beta], 1.0)
    p = 1.0 - np.exp(-beta)
    binom = np.zeros_like(P)
    for i in range(51):
        binom[i, i:] = stats.binom.pmf(np.arange(51 - i), 50 - i, p)
    err = np.max(np.abs(P - binom))
    R = 100_000
    obs = simulate_paths(model, np.full((R, 1), beta), [1.0], replicate_seeds(5, R))
    freq = np.bincount(obs[:, 0, 0].astype(int), minlength=51) / R
    tv = 0.5 * np.abs(freq - P[0]).sum()
    report(4, err <= 1e-8 and tv <= 0.01,
           f"binomial max error {err:.1e} (need <= 1e-8), SSA TV {tv:.4f} (need <= 0.01)")


# criterion 5

@pytest.mark.slow
def test_criterion_5_rqmc_beats_mc(report, death_summary_model):
    """100 seed pairs at Q=512 with n=200, n_loc=100."""
    times = equally_spaced(load_preset("death_si").design_space()).times
    opts = LaplaceOptions(n=200, n_loc=100, perturb_sd="prior")
    wins = 0
    for seed in range(100):
        se = {m: expected_utility([death_summary_model], times, "SIGP", 512, m, seed,
                                  opts).se for m in ("mc", "rqmc")}
        wins += se["rqmc"] < se["mc"]
    report(5, wins >= 70, f"rqmc se < mc se in {wins}/100 seed pairs (need >= 70)")


# criteria 6 and 7 share optimized designs

class _DeathSIStudy:
    def __init__(self):
        cfg = load_preset("death_si")
        self.models = cfg.build_models()
        self.window = tuple(cfg.design.window)
        self.delta = cfg.design.min_spacing
        self.designs = {}
        self.values = {}

    def space(self, L):
        return DesignSpace(self.window, L, self.delta)

    def objective(self, kind):
        def f(times, Q, seed):
            return expected_utility(self.models, times, kind, Q, "mc", seed,
                                    OPT_LAPLACE).mean
        return f

    def optimum(self, kind, L):
        if (kind, L) not in self.designs:
            space = self.space(L)
            res = ace_optimize(self.objective(kind), equally_spaced(space), space,
                               ACE_SCALE, seed=L)
            self.designs[kind, L] = res.design.times
            self.values[kind, L] = expected_utility(
                self.models, res.design.times, kind, FINAL_Q[kind], "mc", 2024,
                LaplaceOptions(perturb_sd="prior"))
        return self.designs[kind, L], self.values[kind, L]


@pytest.fixture(scope="module")
def study():
    return _DeathSIStudy()


@pytest.mark.slow
def test_criterion_6_optimum_ordering(report, study):
    """ACE with one sweep, 8 candidates, Q_emulator=20, Q_test=100; final
    estimates with Q=1000 (SIGP) and Q=500 (SIGT) per model on common seeds."""
    sigp = {L: study.optimum("SIGP", L)[1] for L in (8, 10, 15)}
    sigt = {L: study.optimum("SIGT", L)[1] for L in (8, 10, 15)}
    up = [sigp[L].mean for L in (8, 10, 15)]
    ut = [sigt[L].mean for L in (8, 10, 15)]
    monotone = bool(np.all(np.diff(up) >= 0))
    below = all(t < p for t, p in zip(ut, up))
    fmt = lambda u: ", ".join(f"{v:.3f}" for v in u)
    report(6, monotone and below,
           f"SIGP optima at |d|=8,10,15: {fmt(up)} (nondecreasing: {monotone}); "
           f"SIGT optima: {fmt(ut)} (all below SIGP: {below})")


@pytest.mark.slow
def test_criterion_7_validation_orderings(report, study):
    """R=200 replicates per generating model for three 8-point designs."""
    space = study.space(8)
    designs = {"equal": equally_spaced(space).times,
               "sigm": study.optimum("SIGM", 8)[0],
               "sigp": study.optimum("SIGP", 8)[0]}
    rep = validate_designs(study.models, designs, R=200, seed=7,
                           opts=LaplaceOptions(perturb_sd="prior"), n_is=500)
    med = rep.medians()
    lines, ok = [], True
    for name in rep.model_names:
        p_opt, p_eq = med["sigm", name][0], med["equal", name][0]
        l_opt, l_eq = med["sigp", name][1], med["equal", name][1]
        ok &= p_opt > p_eq and l_opt >= l_eq
        lines.append(f"{name}: P(true) {p_opt:.3f} vs {p_eq:.3f}, "
                     f"logdet {l_opt:.3f} vs {l_eq:.3f}")
    report(7, ok, "optimized vs equally spaced medians; " + "; ".join(lines))


# criterion 8

def test_criterion_8_screening(report, death_summary_model, si_summary_model, tmp_path):
    times = np.linspace(0.5, 9.5, 8)
    # perturb_sd 0.1 is narrower than the death posterior, so fits fail the
    # single-parameter screen
    narrow = expected_utility([death_summary_model, si_summary_model], times, "SIGP", 20,
                              "mc", 3, LaplaceOptions(n=200, n_loc=100))
    wide = expected_utility([death_summary_model, si_summary_model], times, "SIGP", 20,
                            "mc", 3, LaplaceOptions(n=200, n_loc=100, perturb_sd="prior"))
    rules = [screen_fit(CurvatureFit(np.zeros((1, q)), np.array(r2)), q)
             for q, r2 in ((1, [0.69]), (1, [0.7]), (2, [0.09, 0.5]), (2, [0.1, 0.1]))]
    try:
        expected_utility([death_summary_model], times, "SIGP", 10, "mc", 0,
                         LaplaceOptions(n=200, n_loc=100, thresholds=(1.0, 1.0)))
        raised = False
    except AllScreenedOutError:
        raised = True
    cfg = load_preset("death_si").to_dict()
    cfg["estimator"].update(Q=4, n=200, n_loc=100, thresholds=[1.0, 1.0])
    cfg["utility"] = "SIGP"
    (tmp_path / "bad.yaml").write_text(yaml.safe_dump(cfg))
    code = main(["evaluate", "--config", str(tmp_path / "bad.yaml"),
                 "--out", str(tmp_path / "out")])
    ok = (rules == [False, True, False, True] and narrow.substituted > 0
          and isinstance(wide.substituted, int) and raised and code == 3)
    report(8, ok, f"thresholds (0.7, 0.1) applied {rules == [False, True, False, True]}; "
                  f"substituted {narrow.substituted}/40 at perturb_sd 0.1, "
                  f"{wide.substituted}/40 at prior sds; all-screened-out raises {raised}, "
                  f"CLI exit {code}")


# criterion 9

def test_criterion_9_property_suites(report):
    proc = subprocess.run([sys.executable, "-m", "pytest", str(TESTS / "test_properties.py"),
                           "-q", "-p", "no:cacheprovider", "--hypothesis-show-statistics"],
                          capture_output=True, text=True, cwd=TESTS.parent)
    counts = [int(c) for c in re.findall(r"(\d+) passing examples", proc.stdout)]
    ok = proc.returncode == 0 and counts and min(counts) >= 1000
    report(9, ok, f"{len(counts)} properties, min examples {min(counts, default=0)} "
                  f"(need >= 1000), pytest exit {proc.returncode}")
