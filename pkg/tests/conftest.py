import numpy as np
import pytest

from lorentzlab.metrics import Domain, MetricPatch, UNIT_TORUS


@pytest.fixture
def flat_torus():
    """The flat form 2 dx dy on the unit torus."""
    return MetricPatch(0, 1, 0, UNIT_TORUS)


@pytest.fixture
def chart_metric():
    """2 dx dy + x(1-x) dy^2 on the y-periodic strip; lightlike circles
    bound the annulus at x = 0 and x = 1."""
    dom = Domain((0.0, 1.0, 0.0, 1.0), (False, True))
    return MetricPatch(0, 1, "x*(1-x)", dom)


@pytest.fixture
def anchor_metric():
    """The curvature anchor 2xy^2 dx^2 + dx dy away from the axes."""
    dom = Domain((0.25, 2.0, 0.25, 2.0), (False, False))
    return MetricPatch("2*x*y^2", "1/2", 0, dom)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
