import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sldesign.kinetics import death_model, si_model
from sldesign.sampling import PriorSpec
from sldesign.summaries import SummaryScheme
from sldesign.surrogate import LinearGaussianModel
from sldesign.synlik import CTMCSummaryModel

settings.register_profile("thorough", max_examples=1000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", max_examples=100, deadline=None)
settings.load_profile("thorough")

DEATH_PRIOR = PriorSpec([-0.48], [0.3], ("beta1",))
SI_PRIOR = PriorSpec([-1.1, -4.5], [0.4, 0.63], ("beta1", "beta2"))


@pytest.fixture
def death_summary_model():
    return CTMCSummaryModel(death_model(), DEATH_PRIOR, SummaryScheme(("mean", "variance")))


@pytest.fixture
def si_summary_model():
    return CTMCSummaryModel(si_model(), SI_PRIOR, SummaryScheme(("mean", "variance")))


@pytest.fixture
def conjugate():
    prior = PriorSpec([0.3, -0.2], [1.0, 0.5])
    A = np.array([[1.0, 0.5], [0.0, 2.0], [1.0, 1.0]])
    Sigma = np.array([[0.5, 0.1, 0.0], [0.1, 0.4, 0.0], [0.0, 0.0, 0.3]])
    return LinearGaussianModel(A, [0.1, -0.3, 0.2], Sigma, prior)
