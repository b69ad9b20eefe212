import numpy as np
import pytest

from mmtc_agg import optimizer, relay, rrs
from mmtc_agg.config import SystemConfig

CFG = SystemConfig()


def _gap(cfg, a1):
    return (rrs.p12_from(cfg.field1, cfg.theta, a1, cfg.delta - a1)
            - rrs.p22_from(cfg.field1, cfg.theta, cfg.mu, a1, cfg.delta - a1))


def test_degenerate_no_interference():
    cfg = CFG.replace(phi1=1e-14, mu=0.0)
    result = optimizer.equal_reliability_a1(cfg)
    assert result.degenerate
    lo, hi = rrs.feasible_region(1.0, 0.0)
    assert result.a1 == pytest.approx(0.5 * (lo + hi))


def test_reference_root_vs_grid_scan():
    result = optimizer.equal_reliability_a1(CFG, region="positive")
    assert not result.degenerate and abs(result.gap) <= 1e-9
    lo, hi = 1e-9, 1 / (1 + CFG.theta * CFG.mu)
    grid = np.linspace(lo, hi, 2000)
    scan = grid[np.argmin([abs(_gap(CFG, a)) for a in grid])]
    assert abs(result.a1 - scan) <= grid[1] - grid[0]


def test_reference_root_outside_remark_interval():
    with pytest.raises(optimizer.InfeasibleError):
        optimizer.equal_reliability_a1(CFG)


def test_remark_region_root():
    cfg = CFG.replace(theta=0.2, mu=0.0, phi1=1.0)
    result = optimizer.equal_reliability_a1(cfg)
    lo, hi = rrs.feasible_region(cfg.theta, cfg.mu)
    assert lo < result.a1 < hi
    assert abs(result.gap) <= 1e-9


def test_empty_remark_region():
    with pytest.raises(optimizer.InfeasibleError):
        optimizer.equal_reliability_a1(CFG.replace(theta=2.0, mu=0.3))
    with pytest.raises(ValueError):
        optimizer.equal_reliability_a1(CFG, region="everywhere")


def test_equal_reliability_decreases_with_phi1():
    roots = [optimizer.equal_reliability_a1(CFG.replace(phi1=10 ** e), region="positive").a1
             for e in (-1.5, -1.25, -1.0, -0.75, -0.5)]
    assert all(b < a for a, b in zip(roots, roots[1:]))


def test_flat_objective():
    cfg = CFG.replace(channels=100, mean_load=10.0)
    result = optimizer.max_served_a1(cfg, "aggregation", grid_points=16)
    assert result.flat and result.a1 == pytest.approx(0.5)


def test_strong_interference_goes_orthogonal():
    result = optimizer.max_served_a1(CFG.replace(phi1=1.0), "aggregation")
    assert result.a1 >= 0.95 * CFG.delta


def test_local_optimality():
    result = optimizer.max_served_a1(CFG, "end-to-end")
    f = optimizer.objective_function(CFG, "end-to-end")
    eps = 1e-6
    for a1 in (0.5, eps, 1 - eps):
        assert result.value >= f(a1) - 1e-12
    assert result.value == pytest.approx(f(result.a1))
    assert result == optimizer.max_served_a1(CFG, "end-to-end")


def test_objectives():
    f_agg = optimizer.objective_function(CFG, "aggregation")
    f_e2e = optimizer.objective_function(CFG, "end-to-end")
    res = relay.evaluate(CFG.replace(a1=0.6), "rrs")
    assert f_agg(0.6) == res.aggregated and f_e2e(0.6) == res.overall
    with pytest.raises(ValueError):
        optimizer.objective_function(CFG, "throughput")


def test_delta_sweep_nondecreasing():
    sweep = optimizer.delta_sweep(CFG.replace(tau=0.1), (0.25, 0.5, 1.0, 2.0), grid_points=32)
    values = [r.value for _, r in sweep]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert all(0 < r.a1 < d for d, r in sweep)


def test_golden_section():
    a, v = optimizer._golden_max(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, 1e-8)
    assert a == pytest.approx(0.3, abs=1e-7) and v == pytest.approx(0.0, abs=1e-12)
