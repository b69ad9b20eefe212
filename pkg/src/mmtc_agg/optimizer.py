"""Power-split searches over a1 (with a2 = delta - a1)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import relay, rrs
from .config import SystemConfig

OBJECTIVES = ("aggregation", "end-to-end")
GOLDEN_TOL = 1e-5
FLAT_RTOL = 1e-9
DEGENERATE_TOL = 1e-9


class InfeasibleError(ValueError):
    """No power split satisfies the requested condition."""


@dataclass(frozen=True)
class EqualReliability:
    a1: float
    gap: float          # p12 - p22 at a1
    degenerate: bool    # p12 - p22 vanishes on the whole interval


@dataclass(frozen=True)
class MaxServed:
    a1: float
    value: float
    flat: bool          # objective constant over the grid; a1 is the midpoint


def _reliability_gap(cfg: SystemConfig, a1: float) -> float:
    a2 = cfg.delta - a1
    return (rrs.p12_from(cfg.field1, cfg.theta, a1, a2)
            - rrs.p22_from(cfg.field1, cfg.theta, cfg.mu, a1, a2))


def _search_interval(cfg: SystemConfig, region: str) -> tuple[float, float]:
    if region == "remark":
        interval = rrs.feasible_region(cfg.theta, cfg.mu, cfg.delta)
        if interval.empty or math.isnan(interval.lo):
            raise InfeasibleError("feasible interval is empty (theta^2 mu >= 1)")
        return interval.lo, interval.hi
    if region == "positive":
        # every a1 for which the second-decoded MTD can still succeed
        return 1e-9 * cfg.delta, cfg.delta / (1.0 + cfg.theta * cfg.mu)
    raise ValueError(f"unknown region {region!r}; expected 'remark' or 'positive'")


def equal_reliability_a1(cfg: SystemConfig, region: str = "remark",
                         xtol: float = 1e-14) -> EqualReliability:
    """a1 at which both MTDs of a pair are equally reliable, p12(a1) = p22(a1).

    ``region="remark"`` searches the interval where both decodes use their
    nonzero branch; ``"positive"`` widens it to every a1 with p22 > 0, which
    is where the crossing lies for most interference levels.
    """
    lo, hi = _search_interval(cfg, region)
    g_lo, g_hi = _reliability_gap(cfg, lo), _reliability_gap(cfg, hi)
    mid = 0.5 * (lo + hi)
    interior = np.linspace(lo, hi, 11)[1:-1]
    if max(abs(_reliability_gap(cfg, float(a))) for a in interior) <= DEGENERATE_TOL:
        return EqualReliability(mid, _reliability_gap(cfg, mid), True)
    if not (g_lo < 0.0 < g_hi):
        raise InfeasibleError(f"p12 - p22 does not change sign on ({lo:.6g}, {hi:.6g}): "
                              f"{g_lo:.3g}, {g_hi:.3g}")
    root = optimize.bisect(lambda a: _reliability_gap(cfg, a), lo, hi, xtol=xtol, maxiter=200)
    return EqualReliability(root, _reliability_gap(cfg, root), False)


def objective_function(cfg: SystemConfig, objective: str = "end-to-end",
                       scheme: str = "rrs") -> Callable[[float], float]:
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")

    def value(a1: float) -> float:
        result = relay.evaluate(cfg.replace(a1=a1), scheme)
        return result.aggregated if objective == "aggregation" else result.overall

    return value


def max_served_a1(cfg: SystemConfig, objective: str = "end-to-end", scheme: str = "rrs",
                  grid_points: int = 128, eps: float = 1e-6) -> MaxServed:
    """Maximize the expected number of served MTDs over a1.

    A coarse grid over [eps, delta - eps] picks the best cell; golden-section
    search then refines inside the neighbouring cells to |da1| <= 1e-5.
    """
    f = objective_function(cfg, objective, scheme)
    delta = cfg.delta
    grid = np.linspace(eps * delta, delta - eps * delta, grid_points)
    values = np.array([f(float(a)) for a in grid])
    best = int(np.argmax(values))
    spread = values.max() - values.min()
    if spread <= FLAT_RTOL * max(1.0, abs(values.max())):
        mid = 0.5 * delta
        return MaxServed(mid, f(mid), True)
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid_points - 1)]
    a_opt, v_opt = _golden_max(f, float(lo), float(hi), GOLDEN_TOL)
    if values[best] > v_opt:
        a_opt, v_opt = float(grid[best]), float(values[best])
    return MaxServed(a_opt, v_opt, False)


def _golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    a = 0.5 * (lo + hi)
    return a, f(a)


def delta_sweep(cfg: SystemConfig, deltas: Sequence[float], objective: str = "end-to-end",
                scheme: str = "rrs", grid_points: int = 128) -> list[tuple[float, MaxServed]]:
    """Optimized objective for each total power budget delta (a1/delta rescaled)."""
    return [(d, max_served_a1(cfg.replace(delta=d), objective, scheme, grid_points)) for d in deltas]
