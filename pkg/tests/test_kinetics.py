import numpy as np
import pytest
from scipy import stats

from sldesign.kinetics import (Design, death_model, get_model, lv_model, seir_model,
                               si_model, simulate_paths, simulate_ssa, simulate_tau_leap,
                               sir_model)
from sldesign._validation import replicate_seeds

BETA1 = np.exp(-0.48)


class TestModelSpecs:
    def test_parameter_counts(self):
        counts = {"death": 1, "si": 2, "sir": 2, "seir": 3, "lv": 4}
        for mid, q in counts.items():
            assert get_model(mid).n_params == q

    def test_unknown_model_rejected(self):
        with pytest.raises(ValueError, match="unknown model"):
            get_model("sis")

    def test_seir_observes_infectious_and_recovered(self):
        assert seir_model().observed_species == ("I", "R")

    def test_death_and_si_propensities(self):
        m = death_model(N=50)
        np.testing.assert_allclose(m.propensities([40, 10], [0.3]), [0.3 * 40])
        s = si_model(N=50)
        np.testing.assert_allclose(s.propensities([40, 10], [0.3, 0.02]),
                                   [(0.3 + 0.02 * 10) * 40])

    def test_sir_seir_propensities(self):
        np.testing.assert_allclose(sir_model(N=50).propensities([40, 8, 2], [1.2, 0.3]),
                                   [1.2 * 40 * 8 / 50, 0.3 * 8])
        np.testing.assert_allclose(
            seir_model(N=50).propensities([40, 3, 5, 2], [1.5, 0.5, 0.25]),
            [1.5 * 40 * 5 / 50, 0.5 * 3, 0.25 * 5])

    def test_lv_propensities(self):
        K, a, b, c = 1000.0, 1.0, 0.01, 0.5
        np.testing.assert_allclose(lv_model().propensities([90, 35], [K, a, b, c]),
                                   [a * 90, a * 90**2 / K, b * 90 * 35, c * 35])

    def test_zero_propensity_at_boundary(self):
        for m in (death_model(), si_model(), sir_model(), seir_model(), lv_model()):
            zero = np.zeros(m.n_species, dtype=np.int64)
            assert np.all(m.propensities(zero, np.ones(m.n_params)) == 0)


class TestDesign:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            Design([1.0, 0.5])

    def test_rejects_window_and_spacing(self):
        with pytest.raises(ValueError):
            Design([0.1, 2.0], window=(0.25, 30))
        with pytest.raises(ValueError):
            Design([1.0, 1.1], min_spacing=0.25)


class TestSSA:
    def test_zero_rate_freezes_chain(self):
        m = death_model(N=50, infected=7)
        traj = simulate_ssa(m, [0.0], Design([0.5, 1.0, 5.0]), seed=3)
        assert np.all(traj.observations == 7)

    def test_deterministic_under_seed(self):
        m = si_model()
        d = Design(np.linspace(0.5, 5, 6))
        a = simulate_ssa(m, [0.3, 0.01], d, seed=11)
        b = simulate_ssa(m, [0.3, 0.01], d, seed=11)
        np.testing.assert_array_equal(a.observations, b.observations)

    def test_death_mean_at_t1(self):
        # pure birth of infections: I(1) ~ Binomial(N, 1 - exp(-beta1))
        N, R = 50, 100_000
        obs = simulate_paths(death_model(N), np.full((R, 1), BETA1), [1.0],
                             replicate_seeds(2024, R))[:, 0, 0]
        p = 1 - np.exp(-BETA1)
        se = np.sqrt(N * p * (1 - p) / R)
        assert abs(obs.mean() - N * p) < 3 * se

    def test_si_prior_predictive_monotone_and_bounded(self):
        rng = np.random.default_rng(5)
        thetas = np.exp(rng.normal([-1.1, -4.5], [0.4, 0.63], size=(2000, 2)))
        obs = simulate_paths(si_model(), thetas, np.linspace(0.2, 10, 15),
                             replicate_seeds(6, 2000))[:, :, 0]
        assert np.all(np.diff(obs, axis=1) >= 0)
        assert obs.min() >= 0 and obs.max() <= 50

    def test_sir_conservation(self):
        obs = simulate_paths(sir_model(), np.tile([1.0, 0.2], (500, 1)),
                             np.linspace(0.25, 30, 20), replicate_seeds(1, 500))
        assert np.all(obs.sum(axis=2) <= 50)
        assert np.all(np.diff(obs[:, :, 1], axis=1) >= 0)

    def test_seir_records_two_columns(self):
        traj = simulate_ssa(seir_model(), [1.5, 0.5, 0.27], Design([1.0, 2.0]), 1)
        assert traj.observations.shape == (2, 2)


class TestTauLeap:
    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            simulate_tau_leap(death_model(), [0.5], Design([1.0]), 0.0, 1)

    def test_all_zero_propensities_constant(self):
        traj = simulate_tau_leap(death_model(N=20, infected=20), [0.5],
                                 Design([1.0, 2.0, 3.0]), 0.1, 4)
        assert np.all(traj.observations == 20)

    def test_small_rate_single_leap_is_poisson(self):
        # one leap of length tau from I = 0: Poisson(beta1 N tau) truncated at N
        N, beta, tau, R = 50, 0.001, 1.0, 50_000
        obs = simulate_paths(death_model(N), np.full((R, 1), beta), [tau],
                             replicate_seeds(9, R), method="tau", tau=tau)[:, 0, 0]
        lam = beta * N * tau
        counts = np.bincount(obs.astype(int), minlength=4)[:4] / R
        np.testing.assert_allclose(counts, stats.poisson.pmf(np.arange(4), lam),
                                   atol=4 * np.sqrt(0.05 / R))

    @staticmethod
    def _lv_relative_error(tau):
        theta = np.exp([6.87, 0.01, -5.03, -0.69])
        times = np.linspace(1, 10, 10)
        R = 10_000
        th = np.tile(theta, (R, 1))
        ssa = simulate_paths(lv_model(), th, times, replicate_seeds(1, R)).mean(axis=0)
        leap = simulate_paths(lv_model(), th, times, replicate_seeds(2, R),
                              method="tau", tau=tau).mean(axis=0)
        return np.abs(leap - ssa) / ssa

    @pytest.mark.xfail(strict=True, reason="explicit tau-leap bias at tau=0.05 reaches "
                       "~10% near the prey trough of the oscillation")
    def test_lv_leap_matches_ssa_means(self):
        np.testing.assert_array_less(self._lv_relative_error(0.05), 0.05)

    def test_lv_leap_converges_to_ssa(self):
        err_coarse = self._lv_relative_error(0.05)
        err_fine = self._lv_relative_error(0.002)
        assert err_fine.max() < 0.05
        assert err_fine.max() < err_coarse.max()

    def test_leap_counts_stay_feasible(self):
        obs = simulate_paths(sir_model(), np.tile([5.0, 3.0], (500, 1)),
                             np.linspace(0.5, 10, 10), replicate_seeds(3, 500),
                             method="tau", tau=0.5)
        assert obs.min() >= 0 and np.all(obs.sum(axis=2) <= 50)


def test_trajectory_csv(tmp_path):
    traj = simulate_ssa(sir_model(), [1.0, 0.3], Design([1.0, 2.5]), 2)
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "time,I,R"
    assert len(lines) == 3
