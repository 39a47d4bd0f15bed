import math

import pytest

from src.core.entities import AnchorPose, FresnelParams, Point2, Scenario, Transmitter
from src.adapters.simulator import build_scenario
from tests.helpers import WAVELENGTH, pt


@pytest.fixture
def link():
    """d = 4 m along +x at 6 cm wavelength."""
    return FresnelParams(d=4.0, theta=0.0, wavelength=0.06)


@pytest.fixture
def tilted_link():
    return FresnelParams(d=4.0, theta=math.radians(30.0), wavelength=0.0575)


@pytest.fixture
def small_scenario() -> Scenario:
    """One transmitter, three anchors along the bottom wall, five crossing lines walked once."""
    anchors = [AnchorPose(id=i, position=pt(x, 0.4)) for i, x in (("A", 1.0), ("B", 3.0), ("C", 5.0))]
    transmitters = [Transmitter(id="TD1", position=Point2(x=2.0, y=5.4))]
    lines = [(pt(0.3, y), pt(5.7, y)) for y in (1.0, 2.0, 3.0, 4.0, 5.0)]
    return build_scenario("small", anchors, transmitters, lines, WAVELENGTH, round_trips=1, gap=2.0, rng_seed=3)
