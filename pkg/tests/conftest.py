import pytest

from zlens.geometry import ZoneGeometry
from zlens.units import KiB, MiB


@pytest.fixture
def geom_1mib():
    return ZoneGeometry(block_size=4096, zone_size=1 * MiB, nr_zones=64)


@pytest.fixture
def geom_64mib():
    return ZoneGeometry(block_size=4096, zone_size=64 * MiB, nr_zones=64)


@pytest.fixture
def geom_small():
    # 8 zones x 32KiB, capacity 24KiB: small enough to brute-force every block
    return ZoneGeometry(block_size=4 * KiB, zone_size=32 * KiB,
                        zone_capacity=24 * KiB, nr_zones=8)
