"""Random resource scheduling (RRS): exact success probabilities and PMFs.

Under RRS the MTDs are matched to channels uniformly at random; overflow MTDs
(beyond N) share an already used channel, with the stronger of the two decoded
first and imperfect SIC leaving a fraction ``mu`` of its power behind.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import special

from . import interference
from .config import Pmf, SystemConfig, poisson_tail, poisson_truncation
from .numerics import log_regularized_gamma_q


class ConsistencyError(ArithmeticError):
    """Two independent evaluations of the same PMF disagree."""


# ---------------------------------------------------------------------------
# Success probabilities


def p11(cfg: SystemConfig) -> float:
    """Success probability of an MTD alone on its channel."""
    return interference.laplace(cfg.field1, cfg.theta)


def p12_from(field, theta: float, a1: float, a2: float) -> float:
    if not a1 > 0:
        raise ValueError("a1 must be positive for the first-decoded MTD")
    ratio = theta * a2 / a1
    lead = 2.0 * a1 / (a1 + theta * a2) * interference.laplace(field, theta / a1)
    if ratio >= 1.0:
        return lead
    rest = (a1 - theta * a2) / (a1 + theta * a2)
    return lead - rest * interference.laplace(field, 2.0 * theta / (a1 - theta * a2))


def p22_from(field, theta: float, mu: float, a1: float, a2: float) -> float:
    if a2 <= 0.0 or theta * mu * a1 / a2 >= 1.0:
        return 0.0
    gap = a2 - theta * mu * a1
    return gap / (a2 + theta * mu * a1) * interference.laplace(field, 2.0 * theta / gap)


def p12(cfg: SystemConfig) -> float:
    """Success probability of the first-decoded (stronger) MTD on a shared channel."""
    return p12_from(cfg.field1, cfg.theta, cfg.a1, cfg.a2)


def p22(cfg: SystemConfig) -> float:
    """Success probability of the second-decoded (weaker) MTD on a shared channel."""
    return p22_from(cfg.field1, cfg.theta, cfg.mu, cfg.a1, cfg.a2)


def success_probabilities(cfg: SystemConfig) -> tuple[float, float, float]:
    if cfg.max_per_channel == 1:
        return p11(cfg), 0.0, 0.0
    return p11(cfg), p12(cfg), p22(cfg)


# ---------------------------------------------------------------------------
# CDFs of the decoding margins with h1, h2 iid Exp(1)


def cdf_v1(v: float, a1: float, a2: float, theta: float) -> float:
    """CDF of V1 = max(h1, h2) - (theta*a2/a1) * min(h1, h2)."""
    if not a1 > 0:
        raise ValueError("a1 must be positive")
    c = theta * a2 / a1
    if v >= 0:
        if c < 1.0:
            return 1.0 - 2.0 / (1.0 + c) * math.exp(-v) + (1.0 - c) / (1.0 + c) * math.exp(-2.0 * v / (1.0 - c))
        return 1.0 - 2.0 / (1.0 + c) * math.exp(-v)
    if c <= 1.0:
        return 0.0  # max - c*min >= max - min >= 0
    # v < 0: the stronger gain must exceed c*weaker + v only past t = -v/(c-1)
    t = -v / (c - 1.0)
    survival = -math.expm1(-2.0 * t) + 2.0 * math.exp(-v - (1.0 + c) * t) / (1.0 + c)
    return 1.0 - survival


def cdf_v2(v: float, a1: float, a2: float, theta: float, mu: float) -> float:
    """CDF of V2 = min(h1, h2) - (theta*mu*a1/a2) * max(h1, h2)."""
    if not a2 > 0:
        raise ValueError("a2 must be positive")
    c = theta * mu * a1 / a2
    if v >= 0:
        if c >= 1.0:
            return 1.0
        return 1.0 - (1.0 - c) / (1.0 + c) * math.exp(-2.0 * v / (1.0 - c))
    if c == 0.0:
        return 0.0
    # v < 0. Integrate over the larger gain g: the smaller must lie in
    # (max(0, v + c g), g).  Below s = -v/c the lower limit is 0; above
    # u = -v/(c-1) (only when c > 1) the interval is empty.
    s = -v / c
    below = 2.0 * -math.expm1(-s) + math.expm1(-2.0 * s)
    upper = math.inf if c <= 1.0 else -v / (c - 1.0)
    e_up = 0.0 if math.isinf(upper) else math.exp(-(1.0 + c) * upper)
    e2_up = 0.0 if math.isinf(upper) else math.exp(-2.0 * upper)
    above = 2.0 * (math.exp(-v) * (math.exp(-(1.0 + c) * s) - e_up) / (1.0 + c)
                   - 0.5 * (math.exp(-2.0 * s) - e2_up))
    return min(1.0, max(0.0, 1.0 - below - above))


class Interval(NamedTuple):
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not self.lo < self.hi

    def __contains__(self, x: float) -> bool:
        return self.lo < x < self.hi


def feasible_region(theta: float, mu: float, delta: float = 1.0) -> Interval:
    """Open interval of a1 (with a2 = delta - a1) where both decodes use their nonzero branch."""
    if not theta > 0 or not 0 <= mu <= 1:
        raise ValueError("need theta > 0 and mu in [0, 1]")
    if theta * theta * mu >= 1.0:
        return Interval(math.nan, math.nan)
    return Interval(theta * delta / (1.0 + theta), delta / (1.0 + theta * mu))


# ---------------------------------------------------------------------------
# PMFs (log space)


def log_binomial_pmf(n: int, p: float) -> np.ndarray:
    """ln Pr(B = j), j = 0..n, for B ~ Binomial(n, p); exact zeros give -inf."""
    j = np.arange(n + 1)
    with np.errstate(divide="ignore"):
        return (special.gammaln(n + 1) - special.gammaln(j + 1) - special.gammaln(n - j + 1)
                + special.xlogy(j, p) + special.xlog1py(n - j, -p))


def _log_shared_block(n_solo: int, n_pairs: int, p_solo: float, p_first: float,
                      p_second: float, size: int) -> np.ndarray:
    """ln Pr(successes = k1) with ``n_solo`` solo channels and ``n_pairs`` shared ones.

    Sums over r1 solo successes, r2 first-decoded successes and
    k1 - r1 - r2 second-decoded successes, the three counts being independent
    binomials.
    """
    l1 = log_binomial_pmf(n_solo, p_solo)
    l2 = log_binomial_pmf(n_pairs, p_first)
    l3 = log_binomial_pmf(n_pairs, p_second)
    base = l1[:, None] + l2[None, :]                       # (r1, r2)
    r12 = np.arange(n_solo + 1)[:, None] + np.arange(n_pairs + 1)[None, :]
    k1 = np.arange(size)[:, None, None]
    r3 = k1 - r12[None, :, :]
    valid = (r3 >= 0) & (r3 <= n_pairs)
    terms = np.where(valid, base[None, :, :] + l3[np.clip(r3, 0, n_pairs)], -np.inf)
    with np.errstate(divide="ignore"):
        return special.logsumexp(terms.reshape(size, -1), axis=1)


def log_pmf_given_k(cfg: SystemConfig, k: int, probs=None) -> np.ndarray:
    """ln Pr(K1 = k1 | K = k) for k1 = 0..L*N."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    n = cfg.channels
    size = cfg.capacity + 1
    p_solo, p_first, p_second = success_probabilities(cfg) if probs is None else probs
    out = np.full(size, -np.inf)
    if cfg.max_per_channel == 1 or k <= n:
        m = min(k, n)
        out[: m + 1] = log_binomial_pmf(m, p_solo)
        return out
    if k < 2 * n:
        return _log_shared_block(2 * n - k, k - n, p_solo, p_first, p_second, size)
    return _log_shared_block(0, n, p_solo, p_first, p_second, size)


def pmf_given_k(cfg: SystemConfig, k: int) -> Pmf:
    """Conditional PMF of the number of active MTDs given K = k requests."""
    return Pmf(np.exp(log_pmf_given_k(cfg, k)))


def _log_poisson(k, m: float):
    return special.xlogy(k, m) - m - special.gammaln(np.asarray(k) + 1)


def log_first_block(cfg: SystemConfig, p_solo: float) -> np.ndarray:
    """ln of the K <= N contribution: sum_{k<=N} Binomial(k, p)[k1] * Poisson(k).

    Summed in closed form this equals
    ``e^{-m p} (m p)^k1 [1/k1! - (N-k1+1) C(N+1,k1) ((N-k1)! - Gamma(N-k1+1, m(1-p))) / (N+1)!]``;
    since ``(N-k1+1) C(N+1,k1) / (N+1)! = 1/(k1! (N-k1)!)`` the bracket is
    ``Q(N-k1+1, m(1-p)) / k1!``, which is what is evaluated (no cancellation).
    """
    n, m = cfg.channels, cfg.mean_load
    out = np.full(cfg.capacity + 1, -np.inf)
    x = m * (1.0 - p_solo)
    for k1 in range(n + 1):
        with np.errstate(divide="ignore"):
            head = -m * p_solo + special.xlogy(k1, m * p_solo) - special.gammaln(k1 + 1)
        if head == -np.inf:
            continue
        out[k1] = head + log_regularized_gamma_q(n - k1 + 1, x)
    return out


def pmf(cfg: SystemConfig, check: bool = False) -> Pmf:
    """Unconditional PMF of the number of active MTDs under RRS.

    Evaluated in closed form: the K <= N block through the incomplete gamma
    function, N < K < 2N term by term with Poisson weights, and K >= 2N with
    the aggregate weight Pr(K >= 2N) = 1 - Q(2N, m) (the conditional PMF does
    not depend on K there). ``check=True`` also sums the conditional PMFs over
    a truncated Poisson and raises :class:`ConsistencyError` past 1e-8.
    """
    probs = success_probabilities(cfg)
    n, m = cfg.channels, cfg.mean_load
    blocks = [log_first_block(cfg, probs[0])]
    if cfg.max_per_channel == 1:
        blocks.append(math.log(poisson_tail(n, m)) + log_binomial_pmf_padded(n, probs[0], cfg.capacity + 1)
                      if poisson_tail(n, m) > 0 else np.full(cfg.capacity + 1, -np.inf))
    else:
        for k in range(n + 1, 2 * n):
            blocks.append(_log_poisson(k, m) + log_pmf_given_k(cfg, k, probs))
        tail = poisson_tail(2 * n - 1, m)  # Pr(K >= 2N)
        if tail > 0:
            blocks.append(math.log(tail) + log_pmf_given_k(cfg, 2 * n, probs))
    with np.errstate(divide="ignore"):
        result = Pmf(np.exp(special.logsumexp(np.vstack(blocks), axis=0)))
    if check:
        direct = pmf_direct(cfg)
        gap = float(np.max(np.abs(direct.probabilities - result.probabilities)))
        if gap > 1e-8 + direct.truncation_mass:
            raise ConsistencyError(f"closed form and direct Poisson mixture differ by {gap:.3g}")
    return result


def log_binomial_pmf_padded(n: int, p: float, size: int) -> np.ndarray:
    out = np.full(size, -np.inf)
    out[: n + 1] = log_binomial_pmf(n, p)
    return out


def pmf_direct(cfg: SystemConfig, tail: float = 1e-12) -> Pmf:
    """PMF as sum_k Pr(K1 = . | K = k) Pr(K = k), truncated where Pr(K > k_max) < tail."""
    probs = success_probabilities(cfg)
    k_max = poisson_truncation(cfg.mean_load, tail)
    rows = [_log_poisson(k, cfg.mean_load) + log_pmf_given_k(cfg, k, probs) for k in range(k_max + 1)]
    with np.errstate(divide="ignore"):
        p = np.exp(special.logsumexp(np.vstack(rows), axis=0))
    return Pmf(p, truncation_mass=poisson_tail(k_max, cfg.mean_load))
