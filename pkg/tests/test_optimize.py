import pytest

from irsa_aoi.analysis import aoi_irsa
from irsa_aoi.model import Protocol, irsa_config, parse_lambda
from irsa_aoi.optimize import (
    PlrCache,
    aoi_ratio_curves,
    default_m_grid,
    derive_seed,
    optimal_frame_size,
    sweep_aoi_vs_activity,
)

X3 = parse_lambda("3:1.0")
X2 = parse_lambda("2:1.0")


class TestDeriveSeed:
    def test_stable_and_content_sensitive(self):
        a = derive_seed(1, "plr", 100, 50, 0.01, "3:1.0")
        assert a == derive_seed(1, "plr", 100, 50, 0.01, "3:1.0")
        assert a != derive_seed(2, "plr", 100, 50, 0.01, "3:1.0")
        assert a != derive_seed(1, "plr", 100, 51, 0.01, "3:1.0")

    def test_float_tokens_are_exact(self):
        assert derive_seed(1, 0.1) == derive_seed(1, 0.1 + 0.0)
        assert derive_seed(1, 0.1) != derive_seed(1, 0.1 + 1e-17)  # distinct doubles
        assert derive_seed(1, 0.1) != derive_seed(1, 0.2)


class TestSweep:
    def test_sa_minimum_at_one_over_n(self):
        n = 100
        grid = [i / 10_000 for i in range(40, 161, 10)]  # brackets 1/n = 0.01
        points = sweep_aoi_vs_activity(n, 1, parse_lambda("1:1.0"), grid,
                                       sim_budget=100, seed=1, protocol=Protocol.SA)
        best = min(points, key=lambda p: p.aoi_formula)
        step = grid[1] - grid[0]
        assert abs(best.n_pa / n - 0.01) <= step + 1e-12

    def test_one_record_per_point_and_deterministic(self):
        grid = [1e-3, 2e-3, 4e-3]
        a = sweep_aoi_vs_activity(100, 20, X3, grid, sim_budget=2_000, seed=5)
        b = sweep_aoi_vs_activity(100, 20, X3, grid, sim_budget=2_000, seed=5)
        assert a == b
        assert len(a) == len(grid)
        assert all(p.aoi_formula >= p.m / 2 for p in a if p.aoi_formula is not None)

    def test_divergent_point_is_flagged_not_raised(self):
        # two always-active double-copy users on two slots always collide
        points = sweep_aoi_vs_activity(2, 2, X2, [1.0], sim_budget=300, seed=2)
        (p,) = points
        assert p.plr == 1.0
        assert p.aoi_formula is None
        assert p.flag == "diverged"

    def test_jobs_match_serial(self):
        grid = [1e-3, 3e-3]
        serial = sweep_aoi_vs_activity(60, 15, X3, grid, sim_budget=1_000, seed=3)
        parallel = sweep_aoi_vs_activity(60, 15, X3, grid, sim_budget=1_000, seed=3, jobs=2)
        assert serial == parallel

    def test_optional_aoi_simulation(self):
        points = sweep_aoi_vs_activity(30, 10, X3, [5e-3], sim_budget=1_000,
                                       seed=4, aoi_budget=2_000)
        (p,) = points
        assert p.aoi_sim is not None
        assert p.aoi_sim == pytest.approx(p.aoi_formula, rel=0.1)


class TestOptimalFrameSize:
    def test_single_point_grid(self):
        res = optimal_frame_size(100, 2e-3, X3, [40], 2_000, seed=1, refine=False)
        assert res.m_star == 40
        assert dict(res.grid_evaluated)[40] == res.aoi_star

    def test_grid_must_fit_degrees(self):
        with pytest.raises(ValueError):
            optimal_frame_size(100, 1e-3, X3, [2, 40], 1_000, seed=1)
        with pytest.raises(ValueError):
            optimal_frame_size(100, 1e-3, X3, [], 1_000, seed=1)

    def test_minimum_invariants_and_bit_exact_reeval(self):
        cache = PlrCache()
        res = optimal_frame_size(200, 2e-3, X3, [10, 20, 40, 80, 160], 4_000,
                                 seed=7, cache=cache)
        aois = dict(res.grid_evaluated)
        assert res.aoi_star == min(aois.values())
        assert res.m_star == min(m for m, a in aois.items() if a == res.aoi_star)
        # re-evaluating the closed form at the cached loss reproduces aoi_star
        cfg = irsa_config(200, res.m_star, 2e-3, X3)
        seed = derive_seed(7, "plr", 200, res.m_star, 2e-3, "3:1.0")
        est = cache.get_or_run(cfg, 4_000, seed)
        again = aoi_irsa(200, res.m_star, 2e-3, (1 - est.plr) * est.load).total
        assert again == res.aoi_star

    def test_refinement_explores_neighbours(self):
        res = optimal_frame_size(120, 3e-3, X3, [16, 32, 64], 2_000, seed=2, refine=True)
        evaluated = {m for m, _ in res.grid_evaluated}
        assert {res.m_star - 1, res.m_star + 1} - evaluated == set() or res.m_star in (16, 64)

    def test_cache_is_shared(self):
        cache = PlrCache()
        optimal_frame_size(80, 2e-3, X3, [20, 40], 1_000, seed=3, cache=cache, refine=False)
        size_after_first = len(cache)
        optimal_frame_size(80, 2e-3, X3, [20, 40], 1_000, seed=3, cache=cache, refine=False)
        assert len(cache) == size_after_first

    def test_none_grid_uses_geometric_default(self):
        res = optimal_frame_size(60, 2e-3, X3, None, 500, seed=1, refine=False)
        assert len(res.grid_evaluated) == 32
        assert min(m for m, _ in res.grid_evaluated) == 3
        assert max(m for m, _ in res.grid_evaluated) == 2000


class TestRatioCurves:
    def test_ratio_bounded_by_construction_and_deterministic(self):
        grid = [1e-3, 3e-3]
        pts = aoi_ratio_curves(150, X3, grid, m_fixed=96, m_grid=[12, 24, 48],
                               sim_budget=2_000, seed=9, refine=False)
        assert pts == aoi_ratio_curves(150, X3, grid, m_fixed=96, m_grid=[12, 24, 48],
                                       sim_budget=2_000, seed=9, refine=False)
        for p in pts:
            assert p.ratio_opt_vs_fixed is not None
            assert 0.0 < p.ratio_opt_vs_fixed <= 1.0
            assert p.ratio_irsa_vs_sa > 0.0

    def test_jobs_match_serial(self):
        grid = [1e-3, 3e-3]
        kw = dict(m_fixed=48, m_grid=[12, 24, 48], sim_budget=1_000, seed=9, refine=False)
        assert aoi_ratio_curves(100, X3, grid, **kw) == aoi_ratio_curves(
            100, X3, grid, jobs=2, **kw
        )


class TestDefaultGrid:
    def test_geometric_span(self):
        grid = default_m_grid(X3, hi=2000, points=32)
        assert grid[0] == 3
        assert grid[-1] == 2000
        assert all(a < b for a, b in zip(grid, grid[1:]))

    def test_degenerate(self):
        assert default_m_grid(X3, hi=3) == [3]
