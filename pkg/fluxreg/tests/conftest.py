import pytest

from fluxreg.utils.flux_analysis import Flux
from fluxreg.utils.front_tracking import StepFunction


@pytest.fixture
def burgers():
    return Flux((0.0, 0.0, 0.5))


@pytest.fixture
def cubic():
    return Flux((0.0, 0.0, 0.0, 1.0))


@pytest.fixture
def indicator():
    """u0 = 1 on [0, 1), 0 elsewhere"""
    return StepFunction(breakpoints=[0.0, 1.0], values=[0.0, 1.0, 0.0])


@pytest.fixture
def output_dir(tmp_path):
    return str(tmp_path / 'out')
