import math

import numpy as np
import pytest

from ddn.chain.composer import (
    conditional_head,
    conditional_heads,
    joint_grid,
    log_likelihoods,
    path_grids,
    sample_density,
    sample_log_likelihood,
)
from ddn.chain.grid import DensityGrid, export_grid, format_grid, read_grid
from ddn.chain.paths import PermutationPaths
from ddn.exceptions import DdnConfigError, DdnDimensionError, DdnUsageError
from ddn.objective.partition import partitions_for

UNIFORM_2D_LL = 2.0 * math.log(1.0 / 20.0)


def partitions(model):
    return partitions_for(model.config.target_range, model.config.bins_per_dim)


class TestConditionalHeads:
    def test_rows_are_distributions(self, make_model, rng):
        model = make_model(target_dim=2)
        heads = conditional_heads(model, rng.uniform(-1, 1, size=(6, 1)), rng.normal(size=(6, 2)), (1, 0), 1)
        assert heads.shape == (6, 16)
        np.testing.assert_allclose(heads.astype(np.float64).sum(axis=1), 1.0, atol=1e-6)

    def test_single_condition(self, make_model):
        model = make_model(target_dim=2)
        head = conditional_head(model, [0.2], [0.0, 0.0], (0, 0), 0)
        assert head.shape == (16,)

    def test_target_cannot_condition_on_itself(self, make_model):
        with pytest.raises(DdnUsageError):
            conditional_head(make_model(target_dim=2), [0.0], [0.0, 0.0], (1, 0), 0)

    def test_bad_mask_or_index(self, make_model):
        model = make_model(target_dim=2)
        with pytest.raises(DdnDimensionError):
            conditional_head(model, [0.0], [0.0, 0.0], (0, 0, 0), 0)
        with pytest.raises(DdnDimensionError):
            conditional_head(model, [0.0], [0.0, 0.0], (0, 0), 2)

    def test_mask_outside_frozen_set(self, make_model):
        model = make_model(target_dim=2, paths_k=1)
        first, second = model.paths.paths[0]
        reversed_mask = tuple(1 if d == second else 0 for d in range(2))
        with pytest.raises(DdnUsageError):
            conditional_head(model, [0.0], [0.0, 0.0], reversed_mask, first)


class TestJointGrid:
    def test_uniform_heads_give_uniform_density(self, uniform_model):
        model = uniform_model(target_dim=2)
        grid = joint_grid(model, [[0.5]], partitions(model))
        assert grid.density.shape == (16, 16)
        np.testing.assert_allclose(grid.density, 1.0 / 400.0, rtol=1e-6)
        assert grid.total_mass() == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("target_dim", [2, 3])
    def test_every_grid_has_unit_mass(self, make_model, target_dim):
        model = make_model(target_dim=target_dim, seed=4)
        for grid in path_grids(model, [[-0.3]], partitions(model)):
            assert grid.total_mass() == pytest.approx(1.0, abs=1e-6)
        assert joint_grid(model, [[-0.3]], partitions(model)).total_mass() == pytest.approx(1.0, abs=1e-6)

    def test_average_of_path_grids(self, make_model):
        model = make_model(target_dim=2, seed=5)
        averaged = joint_grid(model, [[0.1]], partitions(model))
        singles = path_grids(model, [[0.1]], partitions(model))
        assert len(singles) == model.paths.k
        np.testing.assert_allclose(averaged.density, np.mean([g.density for g in singles], axis=0), rtol=1e-12)

    def test_coarser_resolution(self, make_model):
        model = make_model(target_dim=2, seed=6)
        grid = joint_grid(model, [[0.4]], partitions(model), resolution=4)
        assert grid.density.shape == (4, 4)
        assert grid.partitions[0].width == 5.0
        assert grid.total_mass() == pytest.approx(1.0, abs=1e-6)

    def test_resolution_must_divide_bins(self, make_model):
        model = make_model(target_dim=2)
        with pytest.raises(DdnConfigError):
            joint_grid(model, [[0.0]], partitions(model), resolution=5)

    def test_row_budget(self, make_model):
        model = make_model(target_dim=3)
        with pytest.raises(DdnConfigError, match="coarser"):
            joint_grid(model, [[0.0]], partitions(model), row_budget=100)

    def test_single_target_grid_is_the_head(self, make_model):
        model = make_model(target_dim=1, seed=2)
        grid = joint_grid(model, [[0.25]], partitions(model))
        head = model.predict(np.array([[0.25]]))[0, 0].astype(np.float64)
        np.testing.assert_allclose(grid.density, head / partitions(model)[0].width, rtol=1e-12)

    def test_grid_matches_log_likelihood_at_cell_centers(self, make_model):
        model = make_model(target_dim=2, seed=8)
        parts = partitions(model)
        grid = joint_grid(model, [[0.6]], parts)
        centers = parts[0].centers()
        y = np.array([[centers[3], centers[10]]])
        assert sample_log_likelihood(model, [[0.6]], y, parts) == pytest.approx(math.log(grid.density[3, 10]), rel=1e-5)


class TestLogLikelihood:
    def test_uniform_two_targets(self, uniform_model, rng):
        model = uniform_model(target_dim=2)
        values = log_likelihoods(model, rng.uniform(-1, 1, size=(5, 1)), rng.uniform(-9, 9, size=(5, 2)), partitions(model))
        np.testing.assert_allclose(values, UNIFORM_2D_LL, rtol=1e-6)
        assert UNIFORM_2D_LL == pytest.approx(-5.9915, abs=1e-4)

    def test_uniform_single_target(self, uniform_model):
        model = uniform_model(target_dim=1)
        value = sample_log_likelihood(model, [[0.0]], [[3.0]], partitions(model))
        assert value == pytest.approx(math.log(1.0 / 20.0), rel=1e-6)

    def test_out_of_range_targets_are_floored(self, uniform_model):
        model = uniform_model(target_dim=2)
        value = sample_log_likelihood(model, [[0.0]], [[0.0, 25.0]], partitions(model))
        assert value == pytest.approx(math.log(1e-300))

    def test_single_path_subset(self, make_model, rng):
        model = make_model(target_dim=2, seed=3)
        x, y = rng.uniform(-1, 1, size=(4, 1)), rng.uniform(-5, 5, size=(4, 2))
        by_path = [
            np.exp(log_likelihoods(model, x, y, partitions(model), PermutationPaths(target_dim=2, paths=(path,))))
            for path in model.paths
        ]
        averaged = np.exp(log_likelihoods(model, x, y, partitions(model)))
        np.testing.assert_allclose(averaged, np.mean(by_path, axis=0), rtol=1e-10)

    def test_shape_mismatch(self, make_model):
        model = make_model(target_dim=2)
        with pytest.raises(DdnDimensionError):
            log_likelihoods(model, np.zeros((3, 1)), np.zeros((3, 3)), partitions(model))


class TestSampling:
    def test_samples_stay_in_range(self, uniform_model):
        model = uniform_model(target_dim=2)
        drawn = sample_density(model, [[0.0]], 2000, partitions(model), np.random.default_rng(0))
        assert drawn.shape == (2000, 2)
        assert np.all((drawn >= -10.0) & (drawn <= 10.0))
        # uniform over the square
        np.testing.assert_allclose(drawn.mean(axis=0), 0.0, atol=0.5)

    def test_seeded(self, make_model):
        model = make_model(target_dim=2)
        first = sample_density(model, [[0.3]], 50, partitions(model), np.random.default_rng(4))
        second = sample_density(model, [[0.3]], 50, partitions(model), np.random.default_rng(4))
        np.testing.assert_array_equal(first, second)


class TestGridFile:
    def test_export_and_read(self, tmp_path, make_model):
        model = make_model(target_dim=2)
        grid = joint_grid(model, [[0.75]], partitions(model), resolution=8)
        path = str(tmp_path / "grid.tsv")
        export_grid(grid, path)
        restored = read_grid(path)
        assert restored.same_geometry(grid)
        np.testing.assert_allclose(restored.density, grid.density, rtol=1e-8)
        np.testing.assert_allclose(restored.condition, [0.75])

    def test_format_header(self):
        grid = DensityGrid(partitions=partitions_for([(0, 2)], 2), density=np.array([0.25, 0.75]), condition=np.array([0.5]))
        lines = format_grid(grid).splitlines()
        assert lines[0] == "# dims\t1"
        assert lines[4] == "i0\ty0\tdensity"
        assert lines[5:] == ["0\t0.5\t0.25", "1\t1.5\t0.75"]

    def test_density_must_match_partitions(self):
        with pytest.raises(DdnDimensionError):
            DensityGrid(partitions=partitions_for([(0, 2)], 4), density=np.zeros(3), condition=np.zeros(1))
