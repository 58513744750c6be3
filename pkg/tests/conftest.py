import numpy as np
import pytest
from click.testing import CliRunner

from src.reconstruction.geometry import VoxelGrid, normalize_mesh, support_set, voxelize
from src.reconstruction.sampling import build_training_set
from src.reconstruction.shapes import icosphere
from src.server.results_service import create_app, database_uri


def block(n, lo, hi):
    """Grid of resolution n with the half-open index box [lo, hi) occupied on every axis."""
    occ = np.zeros((n, n, n), dtype=bool)
    occ[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
    return VoxelGrid(occ)


@pytest.fixture
def block_grid():
    return block


@pytest.fixture
def cube_grid():
    """8^3 block inside a 16^3 grid."""
    return block(16, (4, 4, 4), (12, 12, 12))


@pytest.fixture(scope="session")
def sphere_grid():
    return voxelize(normalize_mesh(icosphere(subdivisions=3)), 16)


@pytest.fixture
def cube_data(cube_grid):
    return build_training_set(cube_grid, support_set(cube_grid), seed=0)


@pytest.fixture
def sphere_data(sphere_grid):
    return build_training_set(sphere_grid, support_set(sphere_grid), seed=0)


@pytest.fixture
def ledger_app(tmp_path):
    app = create_app(database_uri(tmp_path / "runs.db"))
    app.config['TESTING'] = True
    return app


@pytest.fixture
def ledger_client(ledger_app):
    return ledger_app.test_client()


@pytest.fixture
def runner():
    return CliRunner()
