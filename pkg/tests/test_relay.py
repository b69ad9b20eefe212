import math

import numpy as np
import pytest
from scipy import stats

from mmtc_agg import interference, relay, rrs, sim
from mmtc_agg.config import SystemConfig

CFG = SystemConfig()


def test_relay_success_trivial():
    assert relay.relay_success(CFG, 0) == 1.0
    assert relay.relay_success(CFG.replace(tau=0.0), 40) == 1.0
    with pytest.raises(ValueError):
        relay.relay_success(CFG, -1)


def test_relay_success_formula():
    field = CFG.field2
    expected = math.exp(-field.chi * 63.0 ** (2 / 3.6))
    assert relay.relay_success(CFG, 30) == pytest.approx(expected, rel=1e-13)


def test_relay_success_monte_carlo():
    est, se = sim.relay_check(CFG, 30, 1_000_000, 3)
    assert abs(est - relay.relay_success(CFG, 30)) <= 3 * se


def test_relay_curve_decreasing():
    curve = relay.relay_curve(CFG)
    assert curve.size == CFG.capacity + 1
    assert np.all(np.diff(curve) < 0)


def test_perfect_links_average():
    cfg = CFG.replace(tau=0.0, mu=0.0, phi1=1e-14, a1=0.7)
    cap = cfg.capacity
    k = np.arange(0, 400)
    expected = float(np.sum(np.minimum(k, cap) * stats.poisson.pmf(k, cfg.mean_load)))
    assert relay.avg_successful(cfg, "rrs") == pytest.approx(expected, rel=1e-9)


def test_vanishing_load():
    assert relay.avg_successful(CFG.replace(mean_load=1e-9)) == pytest.approx(0.0, abs=1e-8)


def test_hybrid_beats_oma():
    cfg = CFG.replace(channels=20)
    assert relay.avg_successful(cfg, "rrs") > relay.avg_successful(cfg, "oma")


def test_relaying_only_loses():
    for scheme in ("rrs", "oma"):
        result = relay.evaluate(CFG, scheme)
        assert result.overall <= result.aggregated


def test_monotone_in_tau_and_phi2():
    taus = [relay.avg_successful(CFG.replace(tau=t)) for t in (0.0, 0.05, 0.1, 0.2, 0.4)]
    assert all(b <= a for a, b in zip(taus, taus[1:]))
    phis = [relay.avg_successful(CFG.replace(phi2=10 ** (d / 10))) for d in (-40, -30, -26, -20, -10)]
    assert all(b <= a for a, b in zip(phis, phis[1:]))


def test_oma_oracle():
    cfg = CFG.replace(channels=15, mean_load=25.0)
    p11 = interference.laplace(cfg.field1, cfg.theta)
    field2 = cfg.field2
    total = 0.0
    for k in range(300):
        n = min(k, cfg.channels)
        for k1 in range(1, n + 1):
            p_rel = math.exp(-field2.chi * (2.0 ** (cfg.tau * k1) - 1.0) ** (2 / cfg.alpha))
            total += stats.poisson.pmf(k, cfg.mean_load) * stats.binom.pmf(k1, n, p11) * k1 * p_rel
    assert relay.avg_successful(cfg, "oma") == pytest.approx(total, rel=1e-10)


def test_scheme_pmf_dispatch():
    assert relay.scheme_pmf(CFG, "rrs").probabilities == pytest.approx(rrs.pmf(CFG).probabilities)
    with pytest.raises(ValueError):
        relay.scheme_pmf(CFG, "opt")
