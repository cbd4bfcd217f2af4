import numpy as np
import pytest

from bubblelab import corrector, geom
from bubblelab.model import ProblemPoint


@pytest.fixture(scope="session")
def pt8():
    # D = sqrt(8*7)*2/sqrt(56) = 2, amplitude 8: every derived constant
    # is a round number, which keeps frozen oracle values readable
    return ProblemPoint(n=8, K=-56.0, H=2.0)


@pytest.fixture(scope="session")
def pt10():
    return ProblemPoint(n=10, K=-90.0, H=1.5)   # D = 1.5


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


@pytest.fixture(scope="session")
def frame8():
    return geom.random_frame(8, np.random.default_rng(11))


@pytest.fixture(scope="session")
def sol8(pt8, frame8):
    gs = corrector.GridSpec(nr=200, nxn=200)
    return corrector.solve_corrector(frame8, pt8, gs)
