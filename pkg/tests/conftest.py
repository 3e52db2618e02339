import pytest

from conformal_cable.geometry import CableParams, DendriteGeometry


@pytest.fixture
def params():
    # r_M != r_L so that mixing up the two resistances is visible
    return CableParams(c_M=1.0, r_M=2.0, r_L=0.7)


@pytest.fixture
def cylinder():
    return DendriteGeometry(1.0, 0.0, 0.0, 0.0, 2.0)


@pytest.fixture
def parabolic():
    return DendriteGeometry(1.0, 1.0, 2.0, 0.0, 2.0)


@pytest.fixture
def cone():
    return DendriteGeometry(1.0, 0.8, 1.0, 0.2, 2.0)
