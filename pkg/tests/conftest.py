# Third Party
import pytest

# Database
from sqlalchemy import create_engine
from sqlalchemy.orm import scoped_session, sessionmaker

# Project
from vvb_learn.dataset import generate_class15, generate_regression
from vvb_learn.noise import NoiseConfig
from vvb_learn.optics import GridSpec
from vvb_learn.registry import Base, Manifest


def pytest_addoption(parser):
    parser.addoption(
        '--runslow',
        action='store_true',
        default=False,
        help='run full-size acceptance tests',
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return

    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def grid():
    return GridSpec(resolution=16)


@pytest.fixture(scope='session')
def fine_grid():
    return GridSpec(resolution=32)


@pytest.fixture(scope='session')
def labproxy():
    return NoiseConfig.preset('labproxy', seed=11)


@pytest.fixture(scope='session')
def class15(grid):
    return generate_class15(4, 2, grid=grid, seed=3)


@pytest.fixture(scope='session')
def noisy_class15(grid, labproxy):
    return generate_class15(4, 2, cfg=labproxy, grid=grid, seed=3)


@pytest.fixture(scope='session')
def sphere(fine_grid):
    return generate_regression(300, 60, grid=fine_grid, seed=5)


@pytest.fixture(scope='function')
def session():
    db = create_engine('sqlite://')  # in-memory
    connection = db.engine.connect()
    transaction = connection.begin()
    Base.metadata.create_all(connection)

    session_factory = sessionmaker(bind=connection)
    session = scoped_session(session_factory)

    yield session

    transaction.rollback()
    connection.close()
    session.remove()


@pytest.fixture(scope='function')
def manifest(session):
    return Manifest(session)
