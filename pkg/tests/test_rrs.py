import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mmtc_agg import interference, rrs
from mmtc_agg.config import PowerSplit, SystemConfig
from mmtc_agg.sim import replication_rng

CFG = SystemConfig()
QUIET = 1e-14  # phi1 small enough that outside interference never matters
EXP_MINUS_CHI = 0.837590989589952333206630555553


def test_p11_values():
    assert rrs.p11(CFG) == pytest.approx(EXP_MINUS_CHI, rel=1e-14)
    assert rrs.p11(CFG.replace(phi1=QUIET)) == pytest.approx(1.0, abs=1e-10)
    assert rrs.p11(CFG.replace(theta=1e9)) < 1e-6


def test_p12_closed_form_limits():
    field = CFG.field1
    a1 = 0.7
    expected = 2 * interference.laplace(field, 1 / a1) - interference.laplace(field, 2 / a1)
    assert rrs.p12_from(field, 1.0, a1, 0.0) == pytest.approx(expected, rel=1e-14)
    assert rrs.p12(CFG.replace(phi1=QUIET, a1=0.8)) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        rrs.p12_from(field, 1.0, 0.0, 1.0)


def test_p22_limits():
    assert rrs.p22_from(CFG.field1, 1.0, 0.5, 0.8, 0.2) == 0.0
    quiet = CFG.replace(phi1=QUIET, a1=0.6)
    c = quiet.theta * quiet.mu * 0.6 / 0.4
    assert rrs.p22(quiet) == pytest.approx((1 - c) / (1 + c), abs=1e-9)
    assert rrs.p22(quiet.replace(mu=0.0)) == pytest.approx(1.0, abs=1e-9)


def test_p22_exponential_pairs():
    rng = replication_rng(11, 0)
    h = rng.exponential(1.0, (1_000_000, 2))
    c = 1.0 * 0.1 * 0.6 / 0.4
    frac = np.mean(h.min(axis=1) - c * h.max(axis=1) > 0)
    assert frac == pytest.approx((1 - c) / (1 + c), abs=0.005)


def _pair_draws(seed, n=1_000_000):
    rng = replication_rng(seed, 0)
    h = rng.exponential(1.0, (n, 2))
    i = interference.sample(CFG.field1, rng, n)
    return h.max(axis=1), h.min(axis=1), i


def test_p12_p22_monte_carlo():
    hi, lo, i = _pair_draws(12)
    a1 = a2 = 0.5
    for hit, theory in (
        (a1 * hi >= CFG.theta * (a2 * lo + i), rrs.p12(CFG)),
        (a2 * lo >= CFG.theta * (CFG.mu * a1 * hi + i), rrs.p22(CFG)),
    ):
        est = hit.mean()
        se = math.sqrt(est * (1 - est) / hit.size)
        assert abs(est - theory) <= 3 * se


def test_expectation_identities():
    rng = replication_rng(13, 0)
    i = interference.sample(CFG.field1, rng, 100_000)
    a1, a2, theta, mu = 0.6, 0.4, 1.0, 0.1
    v1 = 1 - np.array([rrs.cdf_v1(theta * x / a1, a1, a2, theta) for x in i])
    v2 = 1 - np.array([rrs.cdf_v2(theta * x / a2, a1, a2, theta, mu) for x in i])
    field = CFG.field1
    for vals, theory in ((v1, rrs.p12_from(field, theta, a1, a2)),
                         (v2, rrs.p22_from(field, theta, mu, a1, a2))):
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - theory) <= 3 * se


@settings(max_examples=300, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.1, 5.0), st.floats(0.0, 1.0),
       st.floats(1e-3, 10.0), st.floats(2.1, 6.0))
def test_probabilities_in_unit_interval(a1, theta, mu, phi, alpha):
    cfg = SystemConfig(theta=theta, mu=mu, phi1=phi, alpha=alpha, split=PowerSplit.from_a1(a1))
    assert all(0.0 <= p <= 1.0 for p in rrs.success_probabilities(cfg))


# appendix CDFs ---------------------------------------------------------------


def test_cdf_v1_branches_at_zero():
    assert rrs.cdf_v1(0.0, 0.6, 0.4, 1.0) == pytest.approx(0.0, abs=1e-15)
    a1, a2 = 0.3, 0.7
    assert rrs.cdf_v1(0.0, a1, a2, 1.0) == pytest.approx((a2 - a1) / (a2 + a1), rel=1e-14)


def test_cdf_v2_branches():
    assert rrs.cdf_v2(0.0, 0.8, 0.2, 1.0, 0.5) == 1.0
    assert rrs.cdf_v2(50.0, 0.5, 0.5, 1.0, 0.1) == pytest.approx(1.0, abs=1e-15)
    assert rrs.cdf_v2(-1.0, 0.5, 0.5, 1.0, 0.0) == 0.0


@pytest.fixture(scope="module")
def exp_pairs():
    h = replication_rng(14, 0).exponential(1.0, (1_000_000, 2))
    return h.max(axis=1), h.min(axis=1)


@pytest.mark.parametrize("a1, a2, v", [(0.5, 0.5, 0.7), (0.3, 0.7, -0.2), (0.3, 0.7, 0.4), (0.7, 0.3, 1.5)])
def test_cdf_v1_sampling(exp_pairs, a1, a2, v):
    hi, lo = exp_pairs
    c = a2 / a1
    assert np.mean(hi - c * lo <= v) == pytest.approx(rrs.cdf_v1(v, a1, a2, 1.0), abs=0.005)


@pytest.mark.parametrize("a1, a2, mu, v", [(0.5, 0.5, 0.1, 0.3), (0.5, 0.5, 0.1, -0.2),
                                           (0.8, 0.2, 0.5, -0.4), (0.8, 0.2, 0.5, 0.0)])
def test_cdf_v2_sampling(exp_pairs, a1, a2, mu, v):
    hi, lo = exp_pairs
    c = mu * a1 / a2
    assert np.mean(lo - c * hi <= v) == pytest.approx(rrs.cdf_v2(v, a1, a2, 1.0, mu), abs=0.005)


# feasible region ---------------------------------------------------------------


def test_feasible_region():
    lo, hi = rrs.feasible_region(1.0, 0.1, 1.0)
    assert (lo, hi) == pytest.approx((0.5, 1 / 1.1))
    assert rrs.feasible_region(2.0, 0.3).empty
    lo, hi = rrs.feasible_region(1e-12, 0.5, 2.0)
    assert lo == pytest.approx(0.0, abs=1e-11) and hi == pytest.approx(2.0)
    assert 0.7 in rrs.feasible_region(1.0, 0.1)


# conditional PMF ---------------------------------------------------------------


def test_pmf_given_k_trivial():
    p = rrs.pmf_given_k(CFG, 0).probabilities
    assert p[0] == 1.0 and p[1:].sum() == 0.0
    cfg = CFG.replace(channels=5)
    expected = stats.binom.pmf(np.arange(4), 3, rrs.p11(cfg))
    assert rrs.pmf_given_k(cfg, 3).probabilities[:4] == pytest.approx(expected, rel=1e-12)


def test_pmf_given_k_brute_force():
    cfg = CFG.replace(channels=2)
    probs = (rrs.p11(cfg), rrs.p12(cfg), rrs.p22(cfg))
    expected = np.zeros(5)
    for outcome in itertools.product((0, 1), repeat=3):
        weight = math.prod(p if o else 1 - p for p, o in zip(probs, outcome))
        expected[sum(outcome)] += weight
    assert rrs.pmf_given_k(cfg, 3).probabilities == pytest.approx(expected, abs=1e-14)


def test_pmf_given_k_normalized():
    cfg = CFG.replace(channels=7)
    for k in range(4 * cfg.channels + 1):
        assert rrs.pmf_given_k(cfg, k).total() == pytest.approx(1.0, abs=1e-10)


# unconditional PMF ---------------------------------------------------------------


def test_pmf_vanishing_load():
    p = rrs.pmf(CFG.replace(mean_load=1e-9))
    assert p[0] == pytest.approx(1.0, abs=1e-8)


def test_pmf_perfect_links_is_truncated_poisson():
    cfg = CFG.replace(mu=0.0, phi1=QUIET, a1=0.7)
    n2 = cfg.capacity
    expected = stats.poisson.pmf(np.arange(n2 + 1), cfg.mean_load)
    expected[n2] = stats.poisson.sf(n2 - 1, cfg.mean_load)
    assert rrs.pmf(cfg).probabilities == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("n", range(1, 9))
@pytest.mark.parametrize("m", [0.5, 2.0, 10.0])
def test_closed_form_vs_direct(n, m):
    cfg = CFG.replace(channels=n, mean_load=m)
    closed = rrs.pmf(cfg, check=True)
    direct = rrs.pmf_direct(cfg)
    assert np.max(np.abs(closed.probabilities - direct.probabilities)) <= 1e-8
    direct.check()
    assert closed.total() == pytest.approx(1.0, abs=1e-8)


def test_reference_pmf_normalized():
    p = rrs.pmf(CFG)
    p.check()
    assert len(p) == CFG.capacity + 1


def test_oma_reduction():
    cfg = CFG.replace(max_per_channel=1, channels=12, mean_load=15.0)
    p11 = rrs.p11(cfg)
    expected = np.zeros(cfg.channels + 1)
    for k in range(200):
        m = min(k, cfg.channels)
        expected[: m + 1] += stats.poisson.pmf(k, cfg.mean_load) * stats.binom.pmf(np.arange(m + 1), m, p11)
    assert rrs.pmf(cfg).probabilities == pytest.approx(expected, abs=1e-12)


def test_consistency_error_is_arithmetic():
    assert issubclass(rrs.ConsistencyError, ArithmeticError)
