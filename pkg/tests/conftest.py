import pytest

from esscher.models import CJD, LJD, VG, KouDE, MarketContext

R = 0.03


@pytest.fixture
def cjd():
    return CJD(0.05, 0.2, 1.0, 0.1)


@pytest.fixture
def ljd():
    return LJD(0.05, 0.2, 0.5, -0.05, 0.1)


@pytest.fixture
def kou():
    return KouDE(0.05, 0.2, 1.0, 0.4, 10.0, 5.0)


@pytest.fixture
def vg():
    return VG(0.05, -0.1, 0.2, 0.2)


@pytest.fixture
def ctx():
    return MarketContext(R, 100.0, 0.5)
