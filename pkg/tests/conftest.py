import pytest

from agents.partition_agent import PartitionAgent
from data_sources.synthetic_city import generate_city, write_city
from geometry.geo_core import BoundingBox
from tests.helpers import EQUATOR, square


@pytest.fixture
def unit_square():
    return square(0.0, 0.0)


@pytest.fixture
def grid_4x4():
    return PartitionAgent().grid_partition(BoundingBox(0.0, 0.0, 2000.0, 2000.0), 500.0, EQUATOR)


@pytest.fixture(scope='session')
def city_files(tmp_path_factory):
    directory = tmp_path_factory.mktemp('city')
    return write_city(generate_city(seed=3, n_events=3000), str(directory))
