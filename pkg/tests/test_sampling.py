import numpy as np
import pytest

from src.reconstruction.config import SamplingConfig
from src.reconstruction.errors import SamplingError
from src.reconstruction.geometry import SupportSet, support_set, voxel_centers
from src.reconstruction.sampling import build_training_set


def _check_contract(grid, data, support):
    in_support = np.isin(np.arange(grid.resolution ** 3), support.indices)
    o = int((~in_support).sum())
    m = o // 4
    assert data.K == 2 * m
    assert data.non_support_count == o
    head, tail = data.indices[:m], data.indices[m:]
    assert not in_support[head].any()
    assert in_support[tail].all()
    assert len(np.unique(head)) == m
    np.testing.assert_array_equal(data.labels, grid.bits[data.indices])
    np.testing.assert_array_equal(data.positions, voxel_centers(grid.resolution, data.indices))


def test_cube_counts(cube_grid, cube_data):
    # 4096 voxels, 680 in the support band
    assert cube_data.non_support_count == 3416
    assert cube_data.K == 2 * 854
    _check_contract(cube_grid, cube_data, support_set(cube_grid))


def test_support_copies_cover_every_support_voxel(cube_grid, cube_data):
    support = support_set(cube_grid)
    copies = cube_data.indices[854:]
    values, counts = np.unique(copies, return_counts=True)
    np.testing.assert_array_equal(values, np.sort(support.indices))
    # 854 = 1 * 680 + 174
    assert (counts == 2).sum() == 174
    assert (counts == 1).sum() == 680 - 174


def test_random_blocks(block_grid):
    rng = np.random.default_rng(11)
    for _ in range(20):
        lo = rng.integers(1, 5, size=3)
        hi = lo + rng.integers(1, 7, size=3)
        grid = block_grid(12, lo, hi)
        support = support_set(grid)
        seed = int(rng.integers(1 << 30))
        data = build_training_set(grid, support, seed=seed)
        _check_contract(grid, data, support)
        again = build_training_set(grid, support, seed=seed)
        assert data.indices.tobytes() == again.indices.tobytes()
        assert data.positions.tobytes() == again.positions.tobytes()


def test_seeds_change_draw_not_size(cube_grid):
    support = support_set(cube_grid)
    a = build_training_set(cube_grid, support, seed=1)
    b = build_training_set(cube_grid, support, seed=2)
    assert a.K == b.K
    assert not np.array_equal(a.indices, b.indices)
    # Whole-set copies agree; only the top-up differs.
    np.testing.assert_array_equal(a.indices[854:854 + 680], b.indices[854:854 + 680])


def test_config_seed_is_default(cube_grid):
    support = support_set(cube_grid)
    a = build_training_set(cube_grid, support, cfg=SamplingConfig(seed=5))
    b = build_training_set(cube_grid, support, seed=5)
    np.testing.assert_array_equal(a.indices, b.indices)


def test_sampling_with_replacement(cube_grid):
    data = build_training_set(cube_grid, support_set(cube_grid), cfg=SamplingConfig(non_support_replacement=True))
    assert data.K == 2 * 854


def test_minimal_grid(block_grid):
    grid = block_grid(8, (0, 0, 0), (1, 1, 1))
    # Everything but voxels 1..4 is in the band, so O = 4.
    band = np.setdiff1d(np.arange(8 ** 3), [1, 2, 3, 4])
    support = SupportSet(surface=np.array([0]), outer=band[1:], resolution=8)
    data = build_training_set(grid, support, seed=0)
    assert data.K == 2
    assert data.indices[0] in {1, 2, 3, 4}
    assert data.indices[1] in set(band)


def test_no_boundary(cube_grid):
    empty = SupportSet(surface=np.array([], dtype=np.int64), outer=np.array([], dtype=np.int64), resolution=16)
    with pytest.raises(SamplingError, match="no boundary"):
        build_training_set(cube_grid, empty)


def test_grid_too_small(cube_grid):
    almost_all = SupportSet(surface=np.arange(16 ** 3 - 3), outer=np.array([], dtype=np.int64), resolution=16)
    with pytest.raises(SamplingError, match="grid too small"):
        build_training_set(cube_grid, almost_all)


def test_dump_csv(tmp_path, cube_data):
    path = tmp_path / "samples.csv"
    cube_data.dump_csv(path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (cube_data.K, 4)
