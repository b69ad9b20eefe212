"""Channel-dependent resource scheduling (CRS): rank-based approximations.

Gains are ranked in decreasing order; ranks 1..N get a channel each and rank
i + N shares the channel of rank i. The success probability of a given rank is
approximated by replacing the ordered gains with their means,
E[h_i] = psi(K + 1) - psi(i), and evaluating the interference CDF at the
resulting decoding margin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from . import interference, rrs
from .config import Pmf, PowerSplit, SystemConfig, poisson_tail, poisson_truncation
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, digamma

VALID_SLOTS = ((1, 1), (1, 2), (2, 2))


@dataclass(frozen=True)
class CrsContext:
    rank: int
    population: int
    split: Optional[PowerSplit] = None

    def __post_init__(self) -> None:
        if not 1 <= self.rank <= self.population:
            raise ValueError(f"rank {self.rank} outside 1..{self.population}")


def _split_for(ctx: CrsContext, cfg: SystemConfig) -> PowerSplit:
    return ctx.split if ctx.split is not None else cfg.rank_split(ctx.rank)


def b_coefficient(ctx: CrsContext, j: int, u: int, cfg: SystemConfig) -> float:
    """Mean decoding margin for decode position ``j`` on a channel holding ``u`` MTDs."""
    if (j, u) not in VALID_SLOTS:
        raise ValueError(f"invalid (j, u) = ({j}, {u})")
    i, k, theta = ctx.rank, ctx.population, cfg.theta
    if (j, u) == (1, 1):
        return (digamma(k + 1) - digamma(i)) / theta
    n = cfg.channels
    if i + n > k:
        raise ValueError(f"rank {i} has no partner: {i} + N > K = {k}")
    split = _split_for(ctx, cfg)
    a1, a2 = split.a1, split.a2
    if (j, u) == (1, 2):
        return (a1 / theta - a2) * digamma(k + 1) + a2 * digamma(i + n) - a1 / theta * digamma(i)
    mu = cfg.mu
    return (a2 / theta - mu * a1) * digamma(k + 1) + mu * a1 * digamma(i) - a2 / theta * digamma(i + n)


def success(ctx: CrsContext, j: int, u: int, cfg: SystemConfig,
            spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Approximate success probability of rank ``ctx.rank`` in slot (j, u)."""
    b = b_coefficient(ctx, j, u, cfg)
    return interference.cdf(cfg.field1, b, spec)


def averaged_probs(cfg: SystemConfig, k: int, spec: QuadratureSpec = DEFAULT_QUADRATURE
                   ) -> tuple[float, float, float]:
    """Rank-averaged (solo, first-decoded, second-decoded) success probabilities given K = k.

    For N < k < 2N the solo average runs over ranks k-N+1..N and the shared
    ones over ranks 1..k-N; for k >= 2N there are no solo channels (NaN is
    returned in that slot) and the shared averages run over ranks 1..N.
    """
    n = cfg.channels
    if k <= n:
        raise ValueError(f"rank averages are defined for K > N (got K={k}, N={n})")
    if k < 2 * n:
        solo = [success(CrsContext(i, k), 1, 1, cfg, spec) for i in range(k - n + 1, n + 1)]
        paired = range(1, k - n + 1)
        p_solo = float(np.mean(solo))
    else:
        paired = range(1, n + 1)
        p_solo = float("nan")
    first = np.mean([success(CrsContext(i, k), 1, 2, cfg, spec) for i in paired])
    second = np.mean([success(CrsContext(i, k), 2, 2, cfg, spec) for i in paired])
    return p_solo, float(first), float(second)


def pmf(cfg: SystemConfig, tail: float = 1e-12, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> Pmf:
    """Approximate PMF of the number of active MTDs under CRS.

    The K <= N part is the RRS block (all MTDs alone, no ordering effect).
    For N < K < 2N and K >= 2N the RRS conditional structure is reused with
    rank-averaged probabilities; the K >= 2N sum carries explicit Poisson
    weights and stops once Pr(K > k_max) < ``tail``.
    """
    if cfg.max_per_channel != 2:
        raise ValueError("the CRS approximation is defined for L = 2")
    n, m = cfg.channels, cfg.mean_load
    size = cfg.capacity + 1
    blocks = [rrs.log_first_block(cfg, rrs.p11(cfg))]
    k_max = poisson_truncation(m, tail)
    for k in range(n + 1, k_max + 1):
        p_solo, p_first, p_second = averaged_probs(cfg, k, spec)
        if k < 2 * n:
            block = rrs._log_shared_block(2 * n - k, k - n, p_solo, p_first, p_second, size)
        else:
            block = rrs._log_shared_block(0, n, 0.0, p_first, p_second, size)
        blocks.append(rrs._log_poisson(k, m) + block)
    with np.errstate(divide="ignore"):
        probs = np.exp(special.logsumexp(np.vstack(blocks), axis=0))
    return Pmf(probs, truncation_mass=poisson_tail(max(k_max, n), m))
