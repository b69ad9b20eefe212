"""Relaying phase: the aggregator forwards all K1 payloads to the BS in one go."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import crs, interference, rrs
from .config import Pmf, SystemConfig

SCHEMES = ("rrs", "crs", "oma")


def relay_success(cfg: SystemConfig, k1: int) -> float:
    """Pr(SIR_rel >= 2^(tau k1) - 1) for a Rayleigh link under the second field."""
    if k1 < 0:
        raise ValueError("k1 must be nonnegative")
    threshold = math.expm1(cfg.tau * k1 * math.log(2.0))
    if threshold <= 0.0:
        return 1.0
    return interference.laplace(cfg.field2, threshold)


def relay_curve(cfg: SystemConfig, size: int | None = None) -> np.ndarray:
    size = cfg.capacity + 1 if size is None else size
    return np.array([relay_success(cfg, k1) for k1 in range(size)])


@dataclass(frozen=True)
class RelayResult:
    per_k1: np.ndarray
    overall: float
    aggregated: float  # E[K1], before relaying


def scheme_pmf(cfg: SystemConfig, scheme: str) -> Pmf:
    """PMF of K1 for ``scheme``; OMA is RRS with one MTD per channel."""
    if scheme == "rrs":
        return rrs.pmf(cfg)
    if scheme == "crs":
        return crs.pmf(cfg)
    if scheme == "oma":
        return rrs.pmf(cfg.replace(max_per_channel=1))
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def evaluate(cfg: SystemConfig, scheme: str, pmf: Pmf | None = None) -> RelayResult:
    pmf = scheme_pmf(cfg, scheme) if pmf is None else pmf
    per_k1 = relay_curve(cfg, len(pmf))
    weighted = pmf.support * pmf.probabilities
    return RelayResult(per_k1, float(np.dot(weighted, per_k1)), float(weighted.sum()))


def avg_successful(cfg: SystemConfig, scheme: str = "rrs") -> float:
    """Expected number of MTDs that survive both aggregation and relaying."""
    return evaluate(cfg, scheme).overall
