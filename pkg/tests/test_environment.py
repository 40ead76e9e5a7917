"""Synthetic task generation, lookup tables, and the regret oracle."""

import numpy as np
import pytest

from lifelong_bandits.environment import (
    LookupEnvironment,
    LookupTable,
    SyntheticEnvironment,
    SyntheticSpec,
    optimum_on_grid,
    rkhs_norm_sq,
    sample_coefficients,
    sample_support,
    uniform_grid,
)
from lifelong_bandits.errors import ConfigError, DataError
from lifelong_bandits.features import BasisFamily, FeatureAtlas, KernelEstimate, kernel_gram
from lifelong_bandits.seeding import substream


class TestSpec:
    def test_defaults_are_feasible(self):
        spec = SyntheticSpec()
        assert spec.p == 50
        assert spec.support_size == 5

    def test_infeasible_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(p=4, support_size=4, norm_bound=1.0, beta_min=0.9)

    def test_support_size_bounds(self):
        with pytest.raises(ValueError):
            SyntheticSpec(p=4, support_size=5)


class TestSampleSupport:
    def test_full_support(self):
        spec = SyntheticSpec(p=6, support_size=6, norm_bound=10.0)
        assert sample_support(spec, substream(0, 1)) == (1, 2, 3, 4, 5, 6)

    def test_replay(self):
        spec = SyntheticSpec()
        a = sample_support(spec, substream(5, 1))
        b = sample_support(spec, substream(5, 1))
        assert a == b

    def test_uniformity_two_choose_one(self):
        spec = SyntheticSpec(p=2, support_size=1, norm_bound=10.0)
        rng = np.random.default_rng(9)
        hits = sum(sample_support(spec, rng) == (1,) for _ in range(10_000))
        assert abs(hits / 10_000 - 0.5) < 0.02


class TestSampleCoefficients:
    def test_degenerate_interval_pins_norm(self):
        spec = SyntheticSpec(p=3, support_size=1, norm_bound=2.0, beta_min=2.0)
        atlas = FeatureAtlas(spec.family, spec.p)
        beta = sample_coefficients(spec, (2,), atlas, substream(0, 2, 1))
        assert np.linalg.norm(beta[1:2]) == pytest.approx(2.0)
        assert beta[0] == 0.0 and beta[2] == 0.0

    def test_constraints_hold_on_every_draw(self):
        spec = SyntheticSpec()
        atlas = FeatureAtlas(spec.family, spec.p)
        support = (3, 10, 20, 30, 44)
        hi = spec.norm_bound / np.sqrt(5)
        rng = np.random.default_rng(1)
        for _ in range(500):
            beta = sample_coefficients(spec, support, atlas, rng)
            norms = [abs(beta[j - 1]) for j in support]
            assert min(norms) >= spec.beta_min
            assert max(norms) <= hi + 1e-12
            assert np.linalg.norm(beta) <= spec.norm_bound + 1e-9
            off = np.delete(beta, [j - 1 for j in support])
            assert np.all(off == 0.0)


class TestRewards:
    def test_noiseless_is_deterministic(self):
        spec = SyntheticSpec(noise=0.0)
        env = SyntheticEnvironment(spec, n_tasks=2, master_seed=0)
        view1 = env.task_view(1)
        view2 = env.task_view(1)
        idx = 17
        assert view1.observe(idx) == view2.observe(idx) == env.values[idx, 0]

    def test_grid_values_match_feature_inner_product(self):
        spec = SyntheticSpec(noise=0.0)
        env = SyntheticEnvironment(spec, n_tasks=2, master_seed=4)
        for s in range(2):
            expected = env.atlas.concat_many(env.grid) @ env.coeffs[s]
            assert np.allclose(env.values[:, s], expected, atol=1e-12)

    def test_noise_variance(self):
        spec = SyntheticSpec()
        env = SyntheticEnvironment(spec, n_tasks=1, master_seed=3)
        view = env.task_view(1)
        idx = 5
        draws = np.array([view.observe(idx) for _ in range(100_000)])
        assert abs(draws.var(ddof=1) - spec.noise**2) < 0.05 * spec.noise**2

    def test_task_noise_streams_are_isolated(self):
        spec = SyntheticSpec()
        env = SyntheticEnvironment(spec, n_tasks=3, master_seed=8)
        first = [env.task_view(s).observe(0) for s in (1, 2, 3)]
        # replaying task 2 alone gives the same draw
        assert env.task_view(2).observe(0) == first[1]


class TestOptimum:
    def test_single_cosine_peak_at_zero(self):
        atlas = FeatureAtlas(BasisFamily.COSINE_1D, p=3)
        grid = uniform_grid(atlas.domain, 101)
        values = atlas.concat_many(grid) @ np.array([2.0, 0.0, 0.0])
        idx, val = optimum_on_grid(values)
        assert grid[idx, 0] == 0.0
        assert val == pytest.approx(2.0)

    def test_negation_symmetry(self):
        rng = np.random.default_rng(2)
        values = rng.normal(size=50)
        imax, vmax = optimum_on_grid(values)
        imin, vmin = optimum_on_grid(-values)
        assert vmin == pytest.approx(-values.min())
        assert values[imin] == pytest.approx(values.min())

    def test_dominates_grid(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=200)
        _, val = optimum_on_grid(values)
        assert np.all(val >= values)

    def test_tie_breaks_low_index(self):
        idx, _ = optimum_on_grid(np.array([1.0, 3.0, 3.0, 0.0]))
        assert idx == 1

    def test_regret_nonnegative_on_grid(self):
        spec = SyntheticSpec()
        env = SyntheticEnvironment(spec, n_tasks=2, master_seed=12)
        view = env.task_view(2)
        regrets = [view.regret(i) for i in range(0, env.grid_size, 7)]
        assert min(regrets) >= 0.0


def test_rkhs_norm_matches_gram_quadratic_form():
    spec = SyntheticSpec()
    env = SyntheticEnvironment(spec, n_tasks=1, master_seed=21)
    beta = env.coeffs[0]
    direct = rkhs_norm_sq(beta, env.support, env.atlas)
    est = KernelEstimate(p=spec.p, selected=env.support)
    rng = np.random.default_rng(77)
    X = rng.uniform(0, 1, size=(30, 1))
    K = kernel_gram(env.atlas, est, X)
    f_vals = env.atlas.concat_many(X) @ beta
    alpha, *_ = np.linalg.lstsq(K, f_vals, rcond=1e-12)
    gram_form = float(f_vals @ alpha)
    assert abs(gram_form - direct) < 1e-6


class TestLookupTable:
    def build(self):
        pts = np.array([[0.0], [0.5], [1.0]])
        vals = np.array([[1.0, 9.0], [2.0, 8.0], [3.0, 7.0]])
        return LookupTable(["x1"], ["taskA", "taskB"], pts, vals)

    def test_eval_at_grid_point(self):
        table = self.build()
        assert table.eval(1, [0.5]) == 2.0
        assert table.eval(2, [1.0]) == 7.0

    def test_midpoint_tie_takes_lower_row(self):
        table = self.build()
        assert table.eval(1, [0.25]) == 1.0

    def test_missing_task_rejected(self):
        with pytest.raises(IndexError):
            self.build().eval(3, [0.0])

    def test_round_trip(self, tmp_path):
        table = self.build()
        path = tmp_path / "table.csv"
        table.save(path)
        loaded = LookupTable.load(path)
        queries = [[0.1], [0.6], [0.9]]
        for q in queries:
            assert loaded.eval(1, q) == table.eval(1, q)
            assert loaded.eval(2, q) == table.eval(2, q)

    def test_rejects_header_without_axes(self):
        with pytest.raises(DataError):
            LookupTable.from_text("a,b\n1,2\n")

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            LookupTable.from_text("x1,task\n")

    def test_rejects_ragged_rows(self):
        with pytest.raises(DataError):
            LookupTable.from_text("x1,task\n0.0,1.0\n0.5\n")

    def test_rejects_all_axis_header(self):
        with pytest.raises(DataError):
            LookupTable.from_text("x1,x2\n0.0,1.0\n")


class TestLookupEnvironment:
    def build_2d(self):
        grid = uniform_grid(np.array([[0.0, 4.0], [10.0, 20.0]]), 5)
        vals = np.stack([grid[:, 0] + grid[:, 1], grid[:, 0] - grid[:, 1]], axis=1)
        return LookupTable(["x1", "x2"], ["a", "b"], grid, vals)

    def test_normalizes_coordinates(self):
        env = LookupEnvironment(self.build_2d(), master_seed=0, p=9)
        assert env.grid.min() == 0.0
        assert env.grid.max() == 1.0
        assert env.m == 2

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            LookupEnvironment(
                self.build_2d(), master_seed=0, family=BasisFamily.COSINE_1D, p=5
            )

    def test_task_views_use_table_values(self):
        table = self.build_2d()
        env = LookupEnvironment(table, master_seed=0, p=9)
        view = env.task_view(1)
        assert view.observe(3) == table.values[3, 0]
        assert view.opt_value == table.values[:, 0].max()
