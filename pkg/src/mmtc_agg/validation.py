"""Acceptance checks: closed forms against simulation, brute force and stated orderings.

Each check returns a :class:`Check`; :func:`run_all` collects them in order.
All randomness is derived from a single seed, so the table is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import crs, interference, optimizer, relay, rrs, searchspace, sim
from .config import SystemConfig

DEFAULT_REPLICATIONS = 100_000
DRAWS = 1_000_000


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def reference_config() -> SystemConfig:
    return SystemConfig()


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _rng(seed: int, stream: int) -> np.random.Generator:
    return sim.replication_rng(seed, 1_000_000 + stream)


def theorem1(replications: int, seed: int, workers: Optional[int] = None) -> Check:
    """RRS slot success probabilities vs simulation conditioned on K = 3N/2."""
    cfg = reference_config()
    k = 3 * cfg.channels // 2
    report = sim.run(sim.SimSpec(cfg, "rrs", replications, seed, condition_k=k), workers)
    theory = dict(zip(sim.SLOTS, rrs.success_probabilities(cfg)))
    zs = {}
    for slot in sim.SLOTS:
        est, se = report.slot_probability(slot)
        zs[slot] = (est - theory[slot]) / se
    worst = max(abs(z) for z in zs.values())
    detail = f"K={k}; " + "; ".join(f"p{s}: z={_fmt(z)}" for s, z in zs.items())
    return Check(1, "slot success probabilities vs simulation", worst <= 3.0, worst, 3.0, detail)


def theorem2(replications: int, seed: int, workers: Optional[int] = None) -> Check:
    """RRS PMF vs simulation (total variation) and closed form vs direct mixture."""
    cfg = reference_config()
    report = sim.run(sim.SimSpec(cfg, "rrs", replications, seed + 1), workers)
    analytic = rrs.pmf(cfg)
    tv = analytic.total_variation(report.pmf())
    gap = 0.0
    for n in range(1, 9):
        for m in (0.5, 2.0, 10.0):
            c = SystemConfig(mean_load=m, channels=n)
            gap = max(gap, float(np.max(np.abs(rrs.pmf(c).probabilities - rrs.pmf_direct(c).probabilities))))
    emp = report.pmf()
    x = emp.support
    var_sim = float(emp.probabilities @ x ** 2 - emp.mean() ** 2)
    var_ana = float(analytic.probabilities @ x ** 2 - analytic.mean() ** 2)
    passed = tv <= 0.02 and gap <= 1e-8
    detail = (f"TV={_fmt(tv)} (<=0.02); closed-vs-direct max gap={gap:.3g} (<=1e-8); "
              f"mean analytic={_fmt(analytic.mean())} sim={_fmt(emp.mean())}; "
              f"variance analytic={_fmt(var_ana)} sim={_fmt(var_sim)}")
    return Check(2, "RRS PMF vs simulation and direct mixture", passed, tv, 0.02, detail)


def theorem4(replications: int, seed: int, workers: Optional[int] = None) -> Check:
    """CRS approximate PMF vs simulation; gaps in (0.05, 0.10] are reported, not failed."""
    cfg = reference_config()
    report = sim.run(sim.SimSpec(cfg, "crs", replications, seed + 2), workers)
    tv = crs.pmf(cfg).total_variation(report.pmf())
    note = "within 0.05" if tv <= 0.05 else ("above 0.05, reported" if tv <= 0.10 else "above 0.10")
    return Check(3, "CRS PMF vs simulation", tv <= 0.10, tv, 0.10, f"TV={_fmt(tv)} ({note})")


def interference_law(seed: int, draws: int = DRAWS) -> Check:
    """KS distance of sampler vs CDF, and the empirical Laplace transform."""
    cfg = reference_config()
    field = cfg.field1
    rng = _rng(seed, 4)
    x = np.sort(interference.sample(field, rng, draws))
    f = interference.CdfTable(field)(x)
    n = x.size
    ks = float(max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n)))
    zs = []
    for s in (0.25, 1.0, 4.0):
        v = np.exp(-s * x)
        zs.append((v.mean() - interference.laplace(field, s)) / (v.std(ddof=1) / math.sqrt(n)))
    worst = max(abs(z) for z in zs)
    detail = f"KS={ks:.3g} (<=0.005); Laplace z at s=0.25,1,4: " + ", ".join(_fmt(z) for z in zs)
    return Check(4, "interference sampler vs CDF and transform", ks <= 0.005 and worst <= 3.0, ks, 0.005, detail)


def _sup_distance(samples: np.ndarray, cdf: Callable[[float], float]) -> float:
    samples = np.sort(samples)
    grid = np.quantile(samples, np.linspace(0.0005, 0.9995, 999))
    emp = np.searchsorted(samples, grid, side="right") / samples.size
    return float(np.max(np.abs(emp - np.array([cdf(float(v)) for v in grid]))))


def appendix_cdfs(seed: int, draws: int = DRAWS) -> Check:
    """CDFs of V1 and V2 vs exponential-pair sampling on both branches."""
    rng = _rng(seed, 5)
    h = rng.exponential(1.0, (draws, 2))
    hi, lo = h.max(axis=1), h.min(axis=1)
    cases = []
    for a1, a2, theta in ((0.6, 0.4, 1.0), (0.3, 0.7, 1.0)):            # c < 1, c >= 1
        c = theta * a2 / a1
        d = _sup_distance(hi - c * lo, lambda v: rrs.cdf_v1(v, a1, a2, theta))
        cases.append((f"V1 c={c:.3g}", d))
    for a1, a2, theta, mu in ((0.5, 0.5, 1.0, 0.1), (0.8, 0.2, 1.0, 0.5)):
        c = theta * mu * a1 / a2
        d = _sup_distance(lo - c * hi, lambda v: rrs.cdf_v2(v, a1, a2, theta, mu))
        cases.append((f"V2 c={c:.3g}", d))
    field = reference_config().field1
    boundary = rrs.p22_from(field, 1.0, 0.5, 0.8, 0.2)
    worst = max(d for _, d in cases)
    detail = "; ".join(f"{name}: {d:.3g}" for name, d in cases) + f"; p22 at theta*mu*a1/a2=2: {boundary!r}"
    return Check(5, "V1/V2 CDFs vs sampling", worst <= 0.005 and boundary == 0.0, worst, 0.005, detail)


def search_space() -> Check:
    rows = searchspace.discrepancy_report()
    counts_ok = all(r.enumerated_paper == r.paper for r in rows)
    rel = 0.0
    for n in range(2, 11):
        for m in (1.0, 5.0, 10.0, 20.0):
            direct = searchspace.avg_dim_direct(m, n)
            rel = max(rel, abs(searchspace.avg_dim(m, n) - direct) / direct)
    big = searchspace.avg_dim(60.0, 30)
    mismatched = sum(r.paper != r.natural for r in rows)
    detail = (f"enumerated counts match D_KN: {counts_ok}; closed-vs-direct rel err={rel:.3g} (<=1e-9); "
              f"avg_dim(60,30)={big:.4g} (>1e15); natural matching count differs at {mismatched} of {len(rows)} (k,n)")
    return Check(6, "search-space counts and average", counts_ok and rel <= 1e-9 and big > 1e15, rel, 1e-9, detail)


def relay_phase(seed: int, draws: int = DRAWS) -> Check:
    cfg = reference_config()
    zs = []
    for k1 in (1, 10, 30, 60):
        est, se = sim.relay_check(cfg, k1, draws, seed + 7)
        zs.append((est - relay.relay_success(cfg, k1)) / se)
    worst = max(abs(z) for z in zs)
    c20 = cfg.replace(channels=20, tau=0.2)
    hybrid = relay.avg_successful(c20, "rrs")
    oma = relay.avg_successful(c20, "oma")
    detail = ("relay z at k1=1,10,30,60: " + ", ".join(_fmt(z) for z in zs)
              + f"; N=20: hybrid={_fmt(hybrid)} OMA={_fmt(oma)}")
    return Check(7, "relay success and hybrid-vs-OMA ordering", worst <= 3.0 and hybrid > oma, worst, 3.0, detail)


def power_split() -> Check:
    cfg = reference_config()
    phis = (10 ** -1.5, 10 ** -1.0, 10 ** -0.5)
    eq = [optimizer.equal_reliability_a1(cfg.replace(phi1=p), region="positive").a1 for p in phis]
    decreasing = all(b < a for a, b in zip(eq, eq[1:]))
    oma_like = optimizer.max_served_a1(cfg.replace(phi1=1.0), "aggregation")
    sweep = optimizer.delta_sweep(cfg.replace(tau=0.1), (0.25, 0.5, 1.0, 2.0))
    values = [r.value for _, r in sweep]
    nondecreasing = all(b >= a for a, b in zip(values, values[1:]))
    passed = decreasing and oma_like.a1 >= 0.95 * cfg.delta and nondecreasing
    detail = ("equal-reliability a1*: " + ", ".join(f"{a:.6f}" for a in eq)
              + f"; max-Kbar a1* at phi1=1: {oma_like.a1:.6f} (>=0.95)"
              + "; optimized Kbar_ar over delta 0.25,0.5,1,2: " + ", ".join(_fmt(v) for v in values))
    return Check(8, "power-split orderings", passed, oma_like.a1, 0.95, detail)


def determinism(seed: int, replications: int = 4000) -> Check:
    """Same seed twice and across worker counts gives identical tallies (spot check)."""
    spec = sim.SimSpec(reference_config(), "rrs", replications, seed)
    runs = [sim.run(spec, workers=1), sim.run(spec, workers=1), sim.run(spec, workers=2)]
    same = all(_tallies(r) == _tallies(runs[0]) for r in runs[1:])
    return Check(9, "determinism across runs and workers", same, float(same), 1.0,
                 f"{replications} replications x3 (workers 1, 1, 2): identical={same}")


def _tallies(report: sim.SimReport) -> bytes:
    parts = [getattr(report, name).tobytes() for name in (
        "slot_trials", "slot_successes", "rank_trials", "rank_successes",
        "k1_counts", "relay_trials", "relay_successes")]
    parts.append(repr((report.sum_k1, report.sum_k1_sq, report.sum_served, report.sum_served_sq)).encode())
    return b"".join(parts)


def run_all(seed: int = 42, replications: int = DEFAULT_REPLICATIONS,
            workers: Optional[int] = None) -> list[Check]:
    return [
        theorem1(replications, seed, workers),
        theorem2(replications, seed, workers),
        theorem4(replications, seed, workers),
        interference_law(seed),
        appendix_cdfs(seed),
        search_space(),
        relay_phase(seed),
        power_split(),
        determinism(seed),
    ]
