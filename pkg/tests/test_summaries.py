import numpy as np
import pytest
from sklearn.base import clone

from sldesign.kinetics import Design, Trajectory, death_model
from sldesign.sampling import PriorSpec
from sldesign.summaries import (SummaryScheme, SummaryTransformer,
                                informativeness_report, summarize)

DEATH = PriorSpec([-0.48], [0.3], ("beta1",))


def _traj(values):
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    return Trajectory(Design(np.arange(1, len(values) + 1, dtype=float)), values)


class TestSummarize:
    def test_constant(self):
        s = summarize(_traj([7, 7, 7, 7]), SummaryScheme(("mean", "variance")))
        np.testing.assert_array_equal(s, [7.0, 0.0])

    def test_hand_example(self):
        s = summarize(_traj([0, 10, 20]), SummaryScheme(("mean", "median", "variance")))
        np.testing.assert_array_equal(s, [10.0, 10.0, 100.0])

    def test_lv_ordering(self):
        prey = np.array([90, 120, 60, 30])
        pred = np.array([35, 40, 70, 50])
        s = summarize(_traj(np.column_stack([prey, pred])),
                      SummaryScheme(("mean", "log-variance", "max")))
        expected = [prey.mean(), np.log(prey.var(ddof=1) + 0.5), prey.max(),
                    pred.mean(), np.log(pred.var(ddof=1) + 0.5), pred.max()]
        np.testing.assert_allclose(s, expected, rtol=1e-15)

    def test_log_variance_of_constant_finite(self):
        s = summarize(_traj([3, 3, 3]), SummaryScheme(("log-variance",)))
        assert s[0] == pytest.approx(np.log(0.5))

    def test_even_median_is_midpoint(self):
        s = summarize(_traj([1, 2, 8, 9]), SummaryScheme(("median",)))
        assert s[0] == 5.0

    def test_rejects_short_series_for_variance(self):
        with pytest.raises(ValueError, match="at least 2"):
            summarize(_traj([4]), SummaryScheme(("variance",)))
        np.testing.assert_array_equal(summarize(_traj([4]), SummaryScheme(("max",))), [4])

    def test_rejects_unknown_and_empty(self):
        with pytest.raises(ValueError):
            SummaryScheme(("mode",))
        with pytest.raises(ValueError):
            SummaryScheme(())

    def test_labels_and_dim(self):
        scheme = SummaryScheme(("mean", "max"))
        assert scheme.dim(2) == 4
        assert scheme.labels(("I", "R")) == ["I:mean", "I:max", "R:mean", "R:max"]


class TestTransformer:
    def test_estimator_protocol(self):
        t = SummaryTransformer(tags=("mean", "max"))
        assert clone(t).get_params() == {"tags": ("mean", "max")}
        X = np.random.default_rng(0).integers(0, 50, size=(5, 4, 2)).astype(float)
        out = t.fit_transform(X)
        assert out.shape == (5, 4)
        np.testing.assert_array_equal(out[:, 0], X[:, :, 0].mean(axis=1))

    def test_accepts_trajectories(self):
        trajs = [_traj([1, 2, 3]), _traj([4, 4, 4])]
        out = SummaryTransformer(("mean",)).fit(trajs).transform(trajs)
        np.testing.assert_array_equal(out[:, 0], [2.0, 4.0])


class TestInformativeness:
    design = Design(np.sort(np.random.default_rng(15).uniform(0.1, 10, 15)))

    def test_shape(self):
        rep = informativeness_report(death_model(), DEATH, self.design, 100,
                                     SummaryScheme(("mean", "variance", "max")), 1)
        assert len(rep.rows) == 1 * 3
        assert rep.pearson.shape == rep.spearman.shape == (1, 3)

    def test_strong_association_with_mean(self):
        rep = informativeness_report(death_model(), DEATH, self.design, 500,
                                     SummaryScheme(("mean", "variance")), 2)
        assert abs(rep.spearman[0, 0]) > 0.5

    def test_degenerate_prior_uncorrelated(self):
        flat = PriorSpec([-0.48], [1e-12])
        rep = informativeness_report(death_model(), flat, self.design, 400,
                                     SummaryScheme(("mean", "variance")), 3)
        assert np.all(np.abs(rep.pearson) < 0.2)
        assert np.all(np.abs(rep.spearman) < 0.2)

    def test_rejects_small_q(self):
        with pytest.raises(ValueError):
            informativeness_report(death_model(), DEATH, self.design, 99,
                                   SummaryScheme(("mean",)), 0)

    def test_csv_exports(self, tmp_path):
        rep = informativeness_report(death_model(), DEATH, self.design, 100,
                                     SummaryScheme(("mean",)), 4)
        rep.correlations_to_csv(tmp_path / "c.csv")
        rep.scatter_to_csv(tmp_path / "s.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "parameter,statistic,pearson,spearman"
        assert lines[1].startswith("beta1,I:mean,")
        assert len((tmp_path / "s.csv").read_text().splitlines()) == 101
