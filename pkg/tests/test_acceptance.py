"""End-to-end acceptance checks, one test per criterion.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them on
success).  Statistical checks use pinned seeds and budgets, so outcomes are
deterministic; tolerances are stated inline.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

import irsa_aoi as ia
from irsa_aoi.cli import main as cli_main
from irsa_aoi.model import irsa_config, parse_lambda, sa_config
from irsa_aoi.optimize import aoi_ratio_curves, sweep_aoi_vs_activity

X1 = parse_lambda("1:1.0")
X2 = parse_lambda("2:1.0")
X3 = parse_lambda("3:1.0")

pytestmark = pytest.mark.acceptance


@contextmanager
def criterion(number, name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} FAIL: {name}")
        raise
    print(f"ACCEPTANCE {number} PASS: {name}")


def pa_for_load(g, n, m):
    """Activation probability giving channel load g."""
    p_tx = g * m / n
    return 1.0 - (1.0 - p_tx) ** (1.0 / m)


def test_criterion_1_exact_formula_closure():
    with criterion(1, "exact-formula closure at n=200, m=50"):
        cfg = irsa_config(200, 50, 2e-3, X3)
        start = time.perf_counter()
        stats = ia.simulate_aoi_irsa(cfg, 20_000, seed=11, transient_frames=10)
        elapsed = time.perf_counter() - start
        expected = ia.aoi_irsa(200, 50, 2e-3, stats.throughput).total
        rel = abs(stats.network_aoi - expected) / expected
        print(f"  closure: sim={stats.network_aoi:.2f} formula={expected:.2f} "
              f"rel={rel:.2%} runtime={elapsed:.1f}s")
        assert rel <= 0.02
        assert elapsed <= 60.0


def test_criterion_2_sa_closed_form():
    with criterion(2, "single-copy closed form at n=100, pa=1/100"):
        stats = ia.simulate_aoi_sa(sa_config(100, 0.01), 1_000_000, seed=8,
                                   transient_slots=10)
        assert stats.network_aoi == pytest.approx(270.98, rel=0.02)
        n = 100
        best = ia.sa_throughput(n, 1.0 / n)
        for i in range(1, 1001):
            assert ia.sa_throughput(n, i / 1000) <= best + 1e-15


def test_criterion_3_decoder_oracle_equivalence():
    with criterion(3, "Monte Carlo vs exhaustive enumeration on small frames"):
        exact_third = ia.enumerate_plr_exact(3, [2, 2])
        assert exact_third == pytest.approx(1 / 3, abs=1e-15)
        configs = []
        for count in (1, 2, 3):
            for degs in itertools.combinations_with_replacement((1, 2), count):
                for m in range(max(degs), 5):
                    configs.append((m, degs))
        assert len(configs) == 30
        for idx, (m, degs) in enumerate(configs):
            exact = ia.enumerate_plr_exact(m, list(degs))
            lam = X1 if max(degs) == 1 else parse_lambda("1:0.5,2:0.5")
            cfg = irsa_config(len(degs), m, 1.0, lam)
            est = ia.estimate_plr(cfg, 100_000, seed=2000 + idx,
                                  fixed_degrees=list(degs))
            if est.stderr == 0.0:
                assert est.plr == exact, (m, degs)
            else:
                assert abs(est.plr - exact) <= 3 * est.stderr, (m, degs)


def test_criterion_4_framed_sa_gap():
    with criterion(4, "unit-frame operation costs exactly one slot of age"):
        cases = [(1, 0.5, 200_000), (10, 0.05, 200_000), (100, 0.01, 1_000_000)]
        for ni, (n, pa, horizon) in enumerate(cases):
            gaps = []
            for r in range(8):
                sa = ia.simulate_aoi_sa(sa_config(n, pa), horizon,
                                        seed=4000 + 16 * ni + r)
                ir = ia.simulate_aoi_irsa(irsa_config(n, 1, pa, X1), horizon,
                                          seed=5000 + 16 * ni + r)
                gaps.append(ir.network_aoi - sa.network_aoi)
            mean = float(np.mean(gaps))
            se = float(np.std(gaps, ddof=1) / math.sqrt(len(gaps)))
            print(f"  n={n}: gap={mean:.3f} +- {se:.3f}")
            assert se < 0.35, f"test lacks power at n={n}"
            assert abs(mean - 1.0) <= 3 * se, f"n={n}"


def test_criterion_5_loss_vs_load_trends():
    with criterion(5, "longer frames lower the loss floor; loss grows with load"):
        n = 2000
        e200 = ia.estimate_plr(
            irsa_config(n, 200, pa_for_load(0.5, n, 200), X3), 50_000, seed=501)
        e1000 = ia.estimate_plr(
            irsa_config(n, 1000, pa_for_load(0.5, n, 1000), X3), 30_000, seed=502)
        gap = e200.plr - e1000.plr
        sigma = math.hypot(e200.stderr, e1000.stderr)
        print(f"  G=0.5: plr(m=200)={e200.plr:.2e} plr(m=1000)={e1000.plr:.2e} "
              f"separation={gap / sigma:.1f} sigma")
        assert e1000.plr < e200.plr
        assert gap > 3 * sigma

        prev = None
        for i in range(10):
            g = 0.1 + 0.08 * i
            est = ia.estimate_plr(
                irsa_config(n, 200, pa_for_load(g, n, 200), X3), 15_000, seed=510 + i)
            if prev is not None:
                slack = 3 * math.hypot(prev.stderr, est.stderr)
                assert est.plr >= prev.plr - slack, f"G={g}"
            prev = est


def test_criterion_6_density_evolution_thresholds():
    with criterion(6, "asymptotic peeling thresholds by bisection"):
        r3 = ia.density_evolution_threshold(X3, tol=1e-3)
        assert r3.g_star == pytest.approx(0.818, abs=0.01)
        r2 = ia.density_evolution_threshold(X2, tol=1e-3)
        assert r2.g_star == pytest.approx(0.500, abs=0.01)
        r1 = ia.density_evolution_threshold(X1, tol=1e-3)
        assert r1.g_star == 0.0


@pytest.fixture(scope="module")
def ratio_curve_data():
    # shared by criteria 7 and 8: optimised frame sizes over a 6-point
    # activity grid at n=500
    n = 500
    pa_grid = list(np.geomspace(0.2, 1.0, 6) / n)
    m_grid = [25, 50, 75, 100, 150, 200, 300, 400, 800]
    points = aoi_ratio_curves(n, X3, pa_grid, m_fixed=800, m_grid=m_grid,
                              sim_budget=10_000, seed=72, refine=False)
    return points


def test_criterion_7_irsa_beats_sa_and_u_shape(ratio_curve_data):
    with criterion(7, "scaled activity sweep: U-shape and ratio below 0.7"):
        n = 500
        # U-shaped formula curve at fixed m=100
        pa_grid = list(np.geomspace(1e-4, 2.4e-3, 12))
        pts = sweep_aoi_vs_activity(n, 100, X3, pa_grid, sim_budget=20_000, seed=71)
        aoi = np.array([p.aoi_formula for p in pts], dtype=float)
        assert np.all(np.isfinite(aoi))
        # noise on the formula value propagated from the loss estimate
        sigma = np.array(
            [n * p.load * p.plr_stderr / ((1 - p.plr) * p.load) ** 2 for p in pts])
        k = int(np.argmin(aoi))
        assert 0 < k < len(aoi) - 1, "minimum must be interior"
        for i in range(k):
            assert aoi[i + 1] <= aoi[i] + 3 * math.hypot(sigma[i], sigma[i + 1])
        for i in range(k, len(aoi) - 1):
            assert aoi[i + 1] >= aoi[i] - 3 * math.hypot(sigma[i], sigma[i + 1])

        # optimised-frame age vs the single-copy optimum
        _, sa_star = ia.sa_optimal_aoi(n)
        ratios = [p.ratio_irsa_vs_sa for p in ratio_curve_data]
        assert all(r is not None for r in ratios)
        print(f"  min ratio irsa*/sa* = {min(ratios):.3f}")
        assert min(ratios) < 0.7
        # min over the sweep is strictly below the single-copy minimum
        assert min(ratios) * sa_star < sa_star
        # tuning m pays at least 10% against the largest fixed frame somewhere
        # in the low-to-mid load range
        low_mid = [p.ratio_opt_vs_fixed for p in ratio_curve_data[:4]]
        assert min(low_mid) <= 0.9


def test_criterion_8_optimal_frame_size_trend(ratio_curve_data):
    with criterion(8, "optimal frame length grows with activity"):
        stars = [p.m_star for p in ratio_curve_data]
        print(f"  m* over grid: {stars}")
        assert stars[-1] >= stars[0]


def test_criterion_9_byte_identical_outputs(tmp_path):
    with criterion(9, "same seed gives byte-identical CSV, any worker count"):
        sweep_args = ("sweep", "--protocol", "irsa", "--n", "60", "--m", "15",
                      "--lambda", "3:1.0", "--pa-grid", "1e-3:6e-3:3",
                      "--budget", "1500", "--seed", "11")
        outs = [tmp_path / f"s{i}.csv" for i in range(3)]
        assert cli_main([*sweep_args, "--out", str(outs[0])]) == 0
        assert cli_main([*sweep_args, "--out", str(outs[1])]) == 0
        assert cli_main([*sweep_args, "--jobs", "2", "--out", str(outs[2])]) == 0
        bodies = [p.read_bytes() for p in outs]
        assert bodies[0] == bodies[1] == bodies[2]

        sim_args = ("simulate", "--mode", "plr", "--protocol", "irsa", "--n", "2",
                    "--m", "3", "--pa", "1", "--lambda", "2:1.0",
                    "--frames", "20000", "--seed", "7")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli_main([*sim_args, "--out", str(a)]) == 0
        assert cli_main([*sim_args, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

        opt_args = ("optimize", "--mode", "frame", "--n", "80", "--lambda", "3:1.0",
                    "--pa-grid", "1e-3:4e-3:2", "--m-grid", "8:64:3:log",
                    "--budget", "1000", "--no-refine", "--seed", "3")
        c, d = tmp_path / "c.csv", tmp_path / "d.csv"
        assert cli_main([*opt_args, "--out", str(c)]) == 0
        assert cli_main([*opt_args, "--out", str(d)]) == 0
        assert c.read_bytes() == d.read_bytes()


def test_criterion_10_formula_micro_suite():
    with criterion(10, "closed-form identities and tagged values"):
        # truncated-geometric mean vs pmf-weighted sum, every m up to 200
        for m in range(1, 201):
            for pa in (1e-4, 1e-3, 0.1, 0.5, 1.0):
                weighted = sum(k * ia.x_pmf(m, pa, k) for k in range(1, m + 1))
                assert abs(ia.mean_wait(m, pa) - weighted) <= 1e-9
                norm = sum(ia.x_pmf(m, pa, k) for k in range(1, m + 1))
                assert abs(norm - 1.0) <= 1e-12

        # inter-delivery moment identities
        for nu in (1e-4, 0.01, 0.5, 1.0):
            zm = ia.z_moments(nu)
            assert zm.mean == 1.0 / nu
            assert zm.second_moment == (2.0 - nu) / nu**2
            assert zm.second_moment - zm.mean**2 >= 0.0

        # breakdown additivity is bit-exact
        bd = ia.aoi_irsa(4000, 100, 1e-4, 0.35)
        assert bd.total == (bd.frame_term + bd.inter_update_term) + bd.wait_term
        assert bd.total == pytest.approx(11528.988, abs=1e-3)

        # tagged example values
        assert ia.sa_throughput(1, 0.5) == 0.5
        assert ia.sa_throughput(2, 0.5) == pytest.approx(0.5, abs=1e-15)
        assert ia.sa_throughput(4000, 1 / 4000) == pytest.approx(0.36792, abs=1e-5)
        assert ia.irsa_load(10, 1, 0.1) == pytest.approx(1.0, abs=1e-12)
        assert ia.irsa_load(4000, 100, 1e-4) == pytest.approx(0.39800, abs=1e-4)
        assert ia.nu_from_throughput(4000, 100, 0.35) == pytest.approx(0.00875, abs=1e-12)
        assert ia.aoi_irsa(1, 1, 1.0, 1.0).total == 2.5
        assert ia.aoi_sa(1, 1.0) == 1.5
        assert ia.sa_optimal_aoi(1) == (1.0, 1.5)
        assert ia.sa_optimal_aoi(4000)[1] == pytest.approx(10872.3, abs=0.5)
        assert ia.sa_optimal_aoi(100)[1] == pytest.approx(270.98, abs=0.05)
        # unit-frame gap is exactly one slot
        assert ia.aoi_irsa(10, 1, 0.3, 0.2).total - ia.aoi_sa(10, 0.2) == 1.0
