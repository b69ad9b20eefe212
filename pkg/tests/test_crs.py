import numpy as np
import pytest
from scipy import special

from mmtc_agg import crs, interference, rrs, sim
from mmtc_agg.config import PowerSplit, SystemConfig

CFG = SystemConfig()


def test_context_validation():
    with pytest.raises(ValueError):
        crs.CrsContext(0, 5)
    with pytest.raises(ValueError):
        crs.CrsContext(6, 5)


def test_b_coefficient_examples():
    cfg = CFG.replace(theta=1.0)
    k = 9
    assert crs.b_coefficient(crs.CrsContext(k, k), 1, 1, cfg) == pytest.approx(1 / k, rel=1e-12)
    assert crs.b_coefficient(crs.CrsContext(1, 2), 1, 1, cfg) == pytest.approx(1.5, rel=1e-12)
    cfg0 = cfg.replace(mu=0.0)
    n = cfg0.channels
    expected = 0.5 * (special.digamma(2 * n + 1) - special.digamma(1 + n))
    assert crs.b_coefficient(crs.CrsContext(1, 2 * n), 2, 2, cfg0) == pytest.approx(expected, rel=1e-12)


def test_b_coefficient_errors():
    with pytest.raises(ValueError):
        crs.b_coefficient(crs.CrsContext(1, 40), 2, 1, CFG)
    with pytest.raises(ValueError):
        crs.b_coefficient(crs.CrsContext(15, 40), 1, 2, CFG)  # 15 + 30 > 40


def test_b12_is_mean_margin():
    # B12 = E[(a1/theta) h_i - a2 h_{i+N}] with E[h_i] = psi(K+1) - psi(i)
    cfg = CFG.replace(a1=0.7, theta=1.3)
    k, i, n = 70, 4, cfg.channels
    h = lambda r: special.digamma(k + 1) - special.digamma(r)
    expected = cfg.a1 / cfg.theta * h(i) - cfg.a2 * h(i + n)
    assert crs.b_coefficient(crs.CrsContext(i, k), 1, 2, cfg) == pytest.approx(expected, rel=1e-12)


def test_rank_split_override():
    cfg = CFG.replace(rank_splits=(PowerSplit.from_a1(0.9),))
    default = crs.b_coefficient(crs.CrsContext(2, 60), 1, 2, cfg)
    first = crs.b_coefficient(crs.CrsContext(1, 60), 1, 2, cfg)
    explicit = crs.b_coefficient(crs.CrsContext(1, 60, PowerSplit.from_a1(0.9)), 1, 2, CFG)
    assert first == explicit
    assert default == crs.b_coefficient(crs.CrsContext(2, 60), 1, 2, CFG)


def test_success_is_interference_cdf():
    ctx = crs.CrsContext(3, 60)
    b = crs.b_coefficient(ctx, 1, 2, CFG)
    assert crs.success(ctx, 1, 2, CFG) == interference.cdf(CFG.field1, b)


def test_success_nonpositive_margin():
    cfg = CFG.replace(a1=0.95)  # a2 < theta*mu*a1 makes B22 negative for every rank
    assert crs.b_coefficient(crs.CrsContext(1, 60), 2, 2, cfg) < 0
    assert crs.success(crs.CrsContext(1, 60), 2, 2, cfg) == 0.0


def test_success_strong_interference():
    cfg = CFG.replace(phi1=100.0)
    field = cfg.field1
    assert interference.cdf(field, 1.0) < 0.05
    x = interference.sample(field, sim.replication_rng(21, 0), 200_000)
    assert np.mean(x <= 1.0) < 0.05


@pytest.mark.parametrize("slot", [(1, 1), (1, 2)])
def test_success_nonincreasing_in_rank(slot):
    k = 80
    n = CFG.channels
    last = k if slot == (1, 1) else k - n
    values = [crs.success(crs.CrsContext(i, k), *slot, CFG) for i in range(1, last + 1)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_second_decode_rank_trend():
    # B22 moves with mu*a1/i - a2/(i+N): the residual of a stronger partner
    # can outweigh the weaker own gain, so B22 first rises with i
    k, n = 80, CFG.channels
    b = np.array([crs.b_coefficient(crs.CrsContext(i, k), 2, 2, CFG) for i in range(1, k - n + 1)])
    i = np.arange(1, k - n)
    slope = CFG.mu * CFG.a1 / i - CFG.a2 / CFG.theta / (i + n)
    assert np.array_equal(np.sign(np.diff(b)), np.sign(slope))
    assert np.diff(b)[0] > 0 and np.diff(b)[-1] < 0


def test_b22_increases_with_a2():
    cfg = CFG.replace(mu=0.0)
    ctx = crs.CrsContext(2, 70)
    values = [crs.b_coefficient(ctx, 2, 2, cfg.replace(a1=1 - a2)) for a2 in np.linspace(0.05, 0.95, 19)]
    assert np.all(np.diff(values) > 0)


def test_averaged_probs_index_ranges():
    cfg = CFG.replace(channels=3)
    solo, first, second = crs.averaged_probs(cfg, 5)
    assert solo == pytest.approx(crs.success(crs.CrsContext(3, 5), 1, 1, cfg))
    expected_first = np.mean([crs.success(crs.CrsContext(i, 5), 1, 2, cfg) for i in (1, 2)])
    assert first == pytest.approx(expected_first)
    _, first, _ = crs.averaged_probs(cfg, 4)
    assert first == pytest.approx(crs.success(crs.CrsContext(1, 4), 1, 2, cfg))
    solo, first, second = crs.averaged_probs(cfg, 6)
    assert np.isnan(solo)
    assert second == pytest.approx(np.mean([crs.success(crs.CrsContext(i, 6), 2, 2, cfg) for i in (1, 2, 3)]))
    with pytest.raises(ValueError):
        crs.averaged_probs(cfg, 3)


def test_pmf_light_load_matches_rrs():
    cfg = CFG.replace(mean_load=1.0)
    assert np.max(np.abs(crs.pmf(cfg).probabilities - rrs.pmf(cfg).probabilities)) < 1e-6


def test_pmf_first_block_shared():
    cfg = CFG.replace(channels=4, mean_load=3.0)
    first = np.exp(rrs.log_first_block(cfg, rrs.p11(cfg)))
    p = crs.pmf(cfg).probabilities
    # every k1 <= N term of the CRS PMF contains the RRS first block
    assert np.all(p[: cfg.channels + 1] >= first[: cfg.channels + 1])


@pytest.mark.parametrize("n, m", [(3, 5.0), (5, 12.0), (8, 20.0)])
def test_pmf_normalized(n, m):
    p = crs.pmf(CFG.replace(channels=n, mean_load=m))
    p.check()
    assert p.total() == pytest.approx(1.0, abs=p.truncation_mass + 1e-8)


def test_pmf_requires_two_per_channel():
    with pytest.raises(ValueError):
        crs.pmf(CFG.replace(max_per_channel=1))


def test_rank_one_first_decode_vs_simulation():
    k = 2 * CFG.channels
    report = sim.run(sim.SimSpec(CFG, "crs", 20_000, 5, condition_k=k), workers=1)
    est, _ = report.rank_probability("12", 1)
    assert est == pytest.approx(crs.success(crs.CrsContext(1, k), 1, 2, CFG), abs=0.02)
