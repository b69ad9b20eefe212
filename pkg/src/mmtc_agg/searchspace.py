"""Size of the exhaustive-scheduling search space and a desk-scale enumerator.

With K MTDs, N channels and at most two MTDs per channel:

* K <= N: one allocation (everyone alone);
* N < K <= 2N: choose the 2N-K solo MTDs, then pair the other 2(K-N),
  counted as (2(K-N)-1)(K-N) pairings;
* K > 2N: choose the 2N served MTDs and pair them, counted as N(2N-1).

The pairing factor p(2p-1) equals C(2p, 2), not the number of perfect
matchings (2p-1)!!; the two agree only for p = 1 and p = 3. The enumerator
therefore offers both conventions: ``"paper"`` reproduces the counts above,
``"natural"`` lists every distinct perfect matching once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

import numpy as np
from scipy import special

from .numerics import log_kummer_1f1_neg_int, log_regularized_gamma_q

DESK_MAX_K = 8
DESK_MAX_N = 4
CONVENTIONS = ("paper", "natural")


class ScaleError(ValueError):
    """Enumeration requested beyond desk scale."""


def _pairing_count(p: int) -> int:
    return (2 * p - 1) * p


def dim(k: int, n: int) -> int:
    """Number of allocations D_{K,N} (exact integer)."""
    if k < 0 or n < 1:
        raise ValueError("need k >= 0 and n >= 1")
    if k <= n:
        return 1
    if k <= 2 * n:
        return math.comb(k, 2 * n - k) * _pairing_count(k - n)
    return math.comb(k, 2 * n) * _pairing_count(n)


def natural_dim(k: int, n: int) -> int:
    """Allocation count when pairings are perfect matchings: solo set x (2p-1)!!."""
    if k <= n:
        return 1
    p = min(k - n, n)
    chosen = math.comb(k, 2 * n - k) if k <= 2 * n else math.comb(k, 2 * n)
    return chosen * math.prod(range(2 * p - 1, 0, -2))


def log_avg_dim(mean_load: float, n: int) -> float:
    """ln of the Poisson average of D_{K,N} in closed form."""
    if not mean_load > 0:
        raise ValueError("mean_load must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    m = mean_load
    z = -m / 4.0
    parts = [log_regularized_gamma_q(n + 1, m)]
    prefix = -m + (n + 1) * math.log(m) - math.log(6.0) - special.gammaln(n)
    bracket = [math.log(3.0) + log_kummer_1f1_neg_int(1 - n, 1.5, z)]
    if n > 1:
        bracket.append(math.log(m * (n - 1)) + log_kummer_1f1_neg_int(2 - n, 2.5, z))
    parts.append(prefix + float(special.logsumexp(bracket)))
    parts.append(math.log(-math.expm1(-m)) + 2 * n * math.log(m) + math.log(n * (2 * n - 1))
                 - special.gammaln(2 * n + 1))
    return float(special.logsumexp(parts))


def avg_dim(mean_load: float, n: int) -> float:
    """Average search-space size E[D_{K,N}] for K ~ Poisson(mean_load)."""
    log_value = log_avg_dim(mean_load, n)
    if log_value > math.log(np.finfo(float).max):
        raise OverflowError(f"average dimension e^{log_value:.1f} exceeds double range; use log_avg_dim")
    return math.exp(log_value)


def avg_dim_direct(mean_load: float, n: int, tail: float = 1e-15) -> float:
    """Same average by summing D_{k,N} Pr(K=k) term by term (exact integers, log weights).

    For k > 2N, D_{k,N} Pr(K=k) is proportional to Pr(K=k-2N), so the sum stops
    once that shifted Poisson tail drops below ``tail``.
    """
    m = mean_load
    total_log = []
    k = 0
    while True:
        total_log.append(math.log(dim(k, n)) + special.xlogy(k, m) - m - special.gammaln(k + 1))
        if k > 2 * n and special.gammainc(k - 2 * n + 1, m) < tail:
            break
        k += 1
    return math.exp(float(special.logsumexp(total_log)))


# ---------------------------------------------------------------------------
# Enumeration


@dataclass(frozen=True)
class Allocation:
    """One schedule. ``pairs`` hold (first, second) in decode order when known.

    ``tag`` distinguishes the copies the paper-convention count adds on top of
    a matching (it is None under the natural convention).
    """

    solo: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]
    tag: Optional[int] = None

    @property
    def served(self) -> tuple[int, ...]:
        return tuple(sorted(self.solo + tuple(x for pair in self.pairs for x in pair)))


def perfect_matchings(items: tuple[int, ...]) -> Iterator[tuple[tuple[int, int], ...]]:
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for idx, partner in enumerate(rest):
        remaining = rest[:idx] + rest[idx + 1:]
        for tail in perfect_matchings(remaining):
            yield ((first, partner),) + tail


def round_robin(items: tuple[int, ...]) -> Iterator[tuple[tuple[int, int], ...]]:
    """The 2p-1 rounds of the circle method; each round is a perfect matching."""
    size = len(items)
    if size == 0:
        yield ()
        return
    ring = size - 1
    for r in range(ring):
        pairs = [(items[r], items[ring])]
        for i in range(1, size // 2):
            pairs.append((items[(r + i) % ring], items[(r - i) % ring]))
        yield tuple(pairs)


def _served_sets(k: int, n: int) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """(solo, to-be-paired) index sets."""
    ids = tuple(range(k))
    if k <= 2 * n:
        for solo in itertools.combinations(ids, 2 * n - k):
            yield solo, tuple(i for i in ids if i not in solo)
    else:
        for chosen in itertools.combinations(ids, 2 * n):
            yield (), chosen


def enumerate_allocations(k: int, n: int, convention: str = "paper") -> Iterator[Allocation]:
    """Yield every allocation of MTDs 0..k-1 onto n channels.

    ``"paper"``: each round-robin matching of the paired MTDs is tagged with
    one of its p pairs, giving (2p-1) p items per solo set, so the stream
    length equals :func:`dim`. ``"natural"``: every perfect matching once
    (decode order is left to the gains), length :func:`natural_dim`.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    if k < 0 or n < 1:
        raise ValueError("need k >= 0 and n >= 1")
    if k > DESK_MAX_K or n > DESK_MAX_N:
        raise ScaleError(f"enumeration limited to k <= {DESK_MAX_K}, n <= {DESK_MAX_N}")
    if k <= n:
        yield Allocation(tuple(range(k)), ())
        return
    for solo, paired in _served_sets(k, n):
        if convention == "natural":
            for matching in perfect_matchings(paired):
                yield Allocation(solo, matching)
        else:
            for matching in round_robin(paired):
                for tag in range(len(matching)):
                    yield Allocation(solo, matching, tag)


class CountRow(NamedTuple):
    k: int
    n: int
    paper: int
    natural: int
    enumerated_paper: int
    enumerated_natural: int


def discrepancy_report(max_k: int = DESK_MAX_K, max_n: int = DESK_MAX_N) -> list[CountRow]:
    """Counts under both conventions for every desk-scale (k, n), enumerated and closed-form."""
    rows = []
    for n in range(1, max_n + 1):
        for k in range(0, max_k + 1):
            rows.append(CountRow(
                k, n, dim(k, n), natural_dim(k, n),
                sum(1 for _ in enumerate_allocations(k, n, "paper")),
                sum(1 for _ in enumerate_allocations(k, n, "natural")),
            ))
    return rows
