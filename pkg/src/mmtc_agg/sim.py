"""Monte Carlo simulator of one aggregation + relay epoch, repeated.

Every replication r draws from its own generator seeded by (seed, r), and
replications are summed into integer counters, so a report does not depend
on how replications are split across workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import interference, searchspace
from .config import Pmf, SystemConfig

SCHEMES = ("rrs", "crs", "oma", "opt-tiny")
SLOTS = ("11", "12", "22")
CHUNK = 2000
OPT_MAX_K = searchspace.DESK_MAX_K
OPT_MAX_N = searchspace.DESK_MAX_N


@dataclass(frozen=True)
class SimSpec:
    cfg: SystemConfig
    scheme: str = "rrs"
    replications: int = 10_000
    seed: int = 0
    condition_k: Optional[int] = None
    full_interference_on_failure: bool = False

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.condition_k is not None and self.condition_k < 0:
            raise ValueError("condition_k must be nonnegative")
        if self.scheme == "opt-tiny":
            if self.cfg.channels > OPT_MAX_N or self.cfg.max_per_channel != 2:
                raise searchspace.ScaleError(f"opt-tiny needs L = 2 and N <= {OPT_MAX_N}")
            if self.condition_k is not None and self.condition_k > OPT_MAX_K:
                raise searchspace.ScaleError(f"opt-tiny needs K <= {OPT_MAX_K}")
        if self.scheme == "crs" and self.cfg.max_per_channel != 2:
            raise ValueError("crs needs L = 2")

    @property
    def capacity(self) -> int:
        return self.cfg.channels if self.scheme == "oma" else self.cfg.capacity


def _stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n) if n > 0 else math.nan


@dataclass
class SimReport:
    """Integer tallies plus derived estimates.

    ``slot_*`` are indexed by slot (solo, first-decoded, second-decoded);
    ``rank_*`` additionally by rank (column i is rank i; for shared channels
    the rank of the first-decoded MTD). ``relay_*`` are indexed by k1.
    """

    replications: int
    capacity: int
    slot_trials: np.ndarray = None
    slot_successes: np.ndarray = None
    rank_trials: np.ndarray = None
    rank_successes: np.ndarray = None
    k1_counts: np.ndarray = None
    relay_trials: np.ndarray = None
    relay_successes: np.ndarray = None
    sum_k1: int = 0
    sum_k1_sq: int = 0
    sum_served: int = 0
    sum_served_sq: int = 0
    cross_pairings: int = 0
    paired_epochs: int = 0

    def __post_init__(self) -> None:
        size = self.capacity + 1
        zeros = lambda *shape: np.zeros(shape, dtype=np.int64)  # noqa: E731
        for name, shape in (("slot_trials", (3,)), ("slot_successes", (3,)),
                            ("rank_trials", (3, size)), ("rank_successes", (3, size)),
                            ("k1_counts", (size,)), ("relay_trials", (size,)),
                            ("relay_successes", (size,))):
            if getattr(self, name) is None:
                setattr(self, name, zeros(*shape))

    def merge(self, other: "SimReport") -> "SimReport":
        out = SimReport(self.replications + other.replications, self.capacity)
        for name in ("slot_trials", "slot_successes", "rank_trials", "rank_successes",
                     "k1_counts", "relay_trials", "relay_successes"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        for name in ("sum_k1", "sum_k1_sq", "sum_served", "sum_served_sq",
                     "cross_pairings", "paired_epochs"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out

    # estimates -------------------------------------------------------------

    def slot_probability(self, slot: str) -> tuple[float, float]:
        """(estimate, standard error) of the success probability in ``slot``."""
        idx = SLOTS.index(slot)
        n = int(self.slot_trials[idx])
        p = self.slot_successes[idx] / n if n else math.nan
        return float(p), _stderr(p, n)

    def rank_probability(self, slot: str, rank: int) -> tuple[float, float]:
        idx = SLOTS.index(slot)
        n = int(self.rank_trials[idx, rank])
        p = self.rank_successes[idx, rank] / n if n else math.nan
        return float(p), _stderr(p, n)

    def pmf(self) -> Pmf:
        return Pmf(self.k1_counts / self.replications)

    def relay_probability(self, k1: int) -> tuple[float, float]:
        n = int(self.relay_trials[k1])
        p = self.relay_successes[k1] / n if n else math.nan
        return float(p), _stderr(p, n)

    def _mean(self, total: int, total_sq: int) -> tuple[float, float]:
        n = self.replications
        mean = total / n
        if n < 2:
            return mean, math.nan
        var = max(0.0, (total_sq - n * mean * mean) / (n - 1))
        return mean, math.sqrt(var / n)

    @property
    def kbar(self) -> tuple[float, float]:
        """Mean number of MTDs decoded at the aggregator, with standard error."""
        return self._mean(self.sum_k1, self.sum_k1_sq)

    @property
    def kbar_ar(self) -> tuple[float, float]:
        """Mean number of MTDs delivered end to end, with standard error."""
        return self._mean(self.sum_served, self.sum_served_sq)


@dataclass
class EpochOutcome:
    k: int
    k1: int
    relay_ok: bool
    # (slot index, rank, success) for every scheduled MTD
    decodes: list = field(default_factory=list)
    cross_pairing: Optional[bool] = None


def replication_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))


def _draw_k(spec: SimSpec, rng: np.random.Generator) -> int:
    if spec.condition_k is not None:
        return spec.condition_k
    if spec.scheme == "opt-tiny":
        # Poisson conditioned on K <= OPT_MAX_K, by rejection
        while True:
            k = int(rng.poisson(spec.cfg.mean_load))
            if k <= OPT_MAX_K:
                return k
    return int(rng.poisson(spec.cfg.mean_load))


def _pair_outcomes(spec: SimSpec, strong: np.ndarray, weak: np.ndarray, noise: np.ndarray,
                   a1: np.ndarray, a2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Strongest-first SIC on each shared channel; returns (first ok, second ok)."""
    cfg = spec.cfg
    theta = cfg.theta
    first = a1 * strong > theta * (a2 * weak + noise)
    residual = np.where(~first, 1.0, cfg.mu) if spec.full_interference_on_failure else cfg.mu
    second = a2 * weak > theta * (residual * a1 * strong + noise)
    return first, second


def _schedule_random(spec: SimSpec, k: int, gains: np.ndarray, rng: np.random.Generator):
    """RRS/OMA: (solo indices, first-slot indices, partner indices)."""
    n = spec.cfg.channels
    order = rng.permutation(k)
    if spec.scheme == "oma":
        return order[: min(k, n)], order[:0], order[:0]
    n_pairs = min(max(k - n, 0), n)
    a, b = order[:n_pairs], order[n: n + n_pairs]
    swap = gains[b] > gains[a]
    strong = np.where(swap, b, a)
    weak = np.where(swap, a, b)
    return order[n_pairs: min(k, n)], strong, weak


def _schedule_ranked(spec: SimSpec, k: int, gains: np.ndarray):
    n = spec.cfg.channels
    ranked = np.argsort(-gains, kind="stable")
    n_pairs = min(max(k - n, 0), n)
    return ranked[n_pairs: min(k, n)], ranked[:n_pairs], ranked[n: n + n_pairs], ranked


def run_epoch(spec: SimSpec, rng: np.random.Generator, table=None) -> EpochOutcome:
    """Simulate one epoch: arrivals, scheduling, aggregation SIRs and the relay hop."""
    cfg = spec.cfg
    beta = 2.0 / cfg.alpha
    scale1 = cfg.field1.chi ** (cfg.alpha / 2.0)
    k = _draw_k(spec, rng)
    gains = rng.exponential(1.0, k)
    out = EpochOutcome(k=k, k1=0, relay_ok=True)

    rank = None
    if spec.scheme == "crs":
        solo, strong, weak, ranked = _schedule_ranked(spec, k, gains)
        rank = np.empty(k, dtype=np.int64)
        rank[ranked] = np.arange(1, k + 1)
    elif spec.scheme == "opt-tiny":
        solo, strong, weak, cross = _schedule_opt(spec, k, gains, table)
        out.cross_pairing = cross
    else:
        solo, strong, weak = _schedule_random(spec, k, gains, rng)

    n_used = solo.size + strong.size
    noise = scale1 * interference.sample_standard(beta, rng, n_used)
    solo_ok = gains[solo] > cfg.theta * noise[: solo.size]
    if strong.size:
        if spec.scheme == "crs" and cfg.rank_splits is not None:
            splits = [cfg.rank_split(int(rank[s])) for s in strong]
            a1 = np.array([s.a1 for s in splits])
            a2 = np.array([s.a2 for s in splits])
        else:
            a1 = np.full(strong.size, cfg.a1)
            a2 = np.full(strong.size, cfg.a2)
        first_ok, second_ok = _pair_outcomes(spec, gains[strong], gains[weak], noise[solo.size:], a1, a2)
    else:
        first_ok = second_ok = np.zeros(0, dtype=bool)

    ranks = (lambda idx: rank[idx]) if rank is not None else (lambda idx: None)
    out.decodes = [(0, ranks(solo), solo_ok), (1, ranks(strong), first_ok), (2, ranks(strong), second_ok)]
    out.k1 = int(solo_ok.sum() + first_ok.sum() + second_ok.sum())

    # relay: Rayleigh gain against an independent draw of the second field
    threshold = math.expm1(cfg.tau * out.k1 * math.log(2.0))
    g = rng.exponential(1.0)
    i2 = cfg.field2.chi ** (cfg.alpha / 2.0) * float(interference.sample_standard(beta, rng))
    out.relay_ok = bool(g >= threshold * i2)
    return out


def _accumulate(report: SimReport, outcome: EpochOutcome) -> None:
    for slot, ranks, ok in outcome.decodes:
        report.slot_trials[slot] += ok.size
        report.slot_successes[slot] += int(ok.sum())
        if ranks is not None and ranks.size:
            np.add.at(report.rank_trials[slot], ranks, 1)
            np.add.at(report.rank_successes[slot], ranks, ok.astype(np.int64))
    k1 = outcome.k1
    report.k1_counts[k1] += 1
    report.relay_trials[k1] += 1
    served = k1 if outcome.relay_ok else 0
    report.relay_successes[k1] += int(outcome.relay_ok)
    report.sum_k1 += k1
    report.sum_k1_sq += k1 * k1
    report.sum_served += served
    report.sum_served_sq += served * served
    if outcome.cross_pairing is not None:
        report.paired_epochs += 1
        report.cross_pairings += int(outcome.cross_pairing)


def _run_range(spec: SimSpec, start: int, stop: int) -> SimReport:
    report = SimReport(stop - start, spec.capacity)
    table = _opt_table(spec.cfg) if spec.scheme == "opt-tiny" else None
    for r in range(start, stop):
        _accumulate(report, run_epoch(spec, replication_rng(spec.seed, r), table))
    return report


def worker_count() -> int:
    env = os.environ.get("MMTC_AGG_THREADS")
    if env:
        count = int(env)
        if count < 1:
            raise ValueError("MMTC_AGG_THREADS must be a positive integer")
        return count
    return os.cpu_count() or 1


def run(spec: SimSpec, workers: Optional[int] = None) -> SimReport:
    """Run ``spec.replications`` epochs; the result is independent of ``workers``."""
    workers = worker_count() if workers is None else workers
    bounds = [(s, min(s + CHUNK, spec.replications)) for s in range(0, spec.replications, CHUNK)]
    if workers <= 1 or len(bounds) == 1:
        parts = [_run_range(spec, a, b) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_range, [spec] * len(bounds), *zip(*bounds)))
    report = parts[0]
    for part in parts[1:]:
        report = report.merge(part)
    return report


# ---------------------------------------------------------------------------
# Exhaustive scheduling at desk scale


@lru_cache(maxsize=8)
def _opt_table(cfg: SystemConfig) -> interference.CdfTable:
    return interference.CdfTable(cfg.field1)


@lru_cache(maxsize=64)
def _allocation_arrays(k: int, n: int):
    """Solo and pair index arrays for every natural-convention allocation."""
    allocs = list(searchspace.enumerate_allocations(k, n, "natural"))
    solo = np.array([a.solo for a in allocs], dtype=np.int64).reshape(len(allocs), -1)
    pairs = np.array([a.pairs for a in allocs], dtype=np.int64).reshape(len(allocs), -1, 2)
    return solo, pairs


def _schedule_opt(spec: SimSpec, k: int, gains: np.ndarray, table):
    """Pick the allocation maximizing the expected number of successes given the gains."""
    cfg = spec.cfg
    n = cfg.channels
    solo, pairs = _allocation_arrays(k, n)
    theta = cfg.theta
    lo, hi = pairs[..., 0], pairs[..., 1]
    swap = gains[hi] > gains[lo]
    strong = np.where(swap, hi, lo)
    weak = np.where(swap, lo, hi)
    b_first = (cfg.a1 * gains[strong] - theta * cfg.a2 * gains[weak]) / theta
    b_second = (cfg.a2 * gains[weak] - theta * cfg.mu * cfg.a1 * gains[strong]) / theta
    score = table(gains[solo] / theta).sum(axis=1) + table(b_first).sum(axis=1) + table(b_second).sum(axis=1)
    best = int(np.argmax(score))
    cross = None
    if pairs.shape[1]:
        # every pair joins one of the stronger half of the paired MTDs with one of the weaker half
        paired = pairs[best].ravel()
        upper = set(paired[np.argsort(-gains[paired], kind="stable")][: pairs.shape[1]].tolist())
        cross = all((int(x) in upper) != (int(y) in upper) for x, y in pairs[best])
    return solo[best], strong[best], weak[best], cross


def run_opt_tiny(spec: SimSpec, workers: Optional[int] = None) -> SimReport:
    if spec.scheme != "opt-tiny":
        spec = SimSpec(spec.cfg, "opt-tiny", spec.replications, spec.seed, spec.condition_k,
                       spec.full_interference_on_failure)
    return run(spec, workers)


# ---------------------------------------------------------------------------
# Standalone oracles


def relay_check(cfg: SystemConfig, k1: int, draws: int, seed: int) -> tuple[float, float]:
    """Empirical Pr(h >= (2^(tau k1) - 1) I2) from paired exponential/stable draws."""
    rng = replication_rng(seed, k1)
    threshold = math.expm1(cfg.tau * k1 * math.log(2.0))
    h = rng.exponential(1.0, draws)
    i2 = interference.sample(cfg.field2, rng, draws)
    p = float(np.mean(h >= threshold * i2))
    return p, _stderr(p, draws)
