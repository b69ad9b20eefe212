"""Special functions and quadrature primitives used by the analytical models.

Gamma-family functions are thin, domain-checked wrappers over ``scipy.special``.
The Kummer polynomial and the oscillatory half-line integrator are local.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special


class ConvergenceError(RuntimeError):
    """Raised when a quadrature exhausts its subdivision budget."""


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_subdivisions: int = 1_000_000
    tail_cutoff: float = 1e-14

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.tail_cutoff > 0):
            raise ValueError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def _check_positive(name: str, x: float) -> None:
    if not x > 0:
        raise ValueError(f"{name} must be positive, got {x!r}")


def log_gamma(x: float) -> float:
    _check_positive("x", x)
    return float(special.gammaln(x))


def digamma(x: float) -> float:
    _check_positive("x", x)
    return float(special.digamma(x))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    _check_positive("a", a)
    if not x >= 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    return float(special.gammaincc(a, x))


def log_regularized_gamma_q(a: float, x: float) -> float:
    """ln Q(a, x), accurate where Q underflows in linear scale."""
    _check_positive("a", a)
    if not x >= 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    q = special.gammaincc(a, x)
    if q > 1e-300:
        return float(math.log(q))
    # Q(a,x) ~ x^(a-1) e^-x / Gamma(a) * sum_k (a-1)_k-falling / x^k for x >> a
    # (asymptotic); only reached for astronomically small tails.
    s, term = 1.0, 1.0
    for k in range(1, 60):
        term *= (a - k) / x
        s += term
        if abs(term) < 1e-17 * abs(s):
            break
    return (a - 1) * math.log(x) - x - special.gammaln(a) + math.log(s)


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Unnormalised Gamma(a, x); raises OverflowError past the float range."""
    log_value = log_regularized_gamma_q(a, x) + log_gamma(a)
    if log_value > 709.78:
        raise OverflowError(f"Gamma({a}, {x}) exceeds the float range; use log-space")
    return math.exp(log_value)


def log_binomial(n: int, k: int) -> float:
    if n < 0 or k < 0:
        raise ValueError("n and k must be nonnegative")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if k == 0 or k == n:
        return 0.0
    return float(special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1))


def _check_kummer_args(a: int, b: float) -> int:
    if int(a) != a or a > 0:
        raise ValueError(f"first argument must be a nonpositive integer, got {a!r}")
    _check_positive("b", b)
    return -int(a)


def kummer_1f1_neg_int(a: int, b: float, z: float) -> float:
    """1F1(a; b; z) for a in {0, -1, -2, ...}: a polynomial of degree -a in z."""
    n = _check_kummer_args(a, b)
    total, term = 1.0, 1.0
    for j in range(n):
        term *= (a + j) * z / ((b + j) * (j + 1))
        total += term
    return total


def log_kummer_1f1_neg_int(a: int, b: float, z: float) -> float:
    """ln 1F1(a; b; z) for nonpositive integer a and z <= 0.

    With both a and z nonpositive every term of the polynomial is positive, so
    the sum is carried out as a log-sum-exp without cancellation.
    """
    n = _check_kummer_args(a, b)
    if z > 0:
        raise ValueError("log form requires z <= 0 (all-positive terms)")
    if n == 0 or z == 0:
        return 0.0
    j = np.arange(1, n + 1)
    # ln|(a)_j| = ln(n!/(n-j)!), ln (b)_j = lnGamma(b+j) - lnGamma(b)
    log_terms = (
        special.gammaln(n + 1) - special.gammaln(n - j + 1)
        - (special.gammaln(b + j) - special.gammaln(b))
        - special.gammaln(j + 1)
        + j * math.log(-z)
    )
    return float(special.logsumexp(np.concatenate(([0.0], log_terms))))


# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (nonnegative half).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate((-_XGK[:-1], _XGK[::-1]))           # 15 nodes, ascending
_KW = np.concatenate((_WGK[:-1], _WGK[::-1]))
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[[9, 11, 13]] = _WG[2::-1]
_GW[7] = _WG[3]


def _gk15(f: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray,
          f0: Optional[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x), dtype=float)
    if f0 is not None:
        fx = np.where(x == 0.0, f0, fx)
    kron = half * (fx @ _KW)
    gauss = half * (fx @ _GW)
    err = np.abs(kron - gauss)
    # QUADPACK-style rescaling of the raw Kronrod-Gauss difference
    resasc = np.abs(half) * (np.abs(fx - (kron / np.where(half == 0, 1, 2 * half))[:, None]) @ _KW)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    floor = 50.0 * np.finfo(float).eps * np.abs(half) * (np.abs(fx) @ _KW)
    return kron, np.maximum(err, floor), err <= floor


def _adaptive_panels(f, a, b, tol, f0, budget):
    """Integrate over the panels [a_i, b_i]; bisect the worst panels until the summed error fits ``tol``."""
    vals, errs, frozen = _gk15(f, a, b, f0)
    used = a.size
    while True:
        err_total = float(np.sum(errs))
        if err_total <= tol:
            break
        pick = (errs > tol / errs.size) & ~frozen
        if not np.any(pick):
            break  # remaining error is roundoff-limited
        if np.any(b[pick] - a[pick] <= 1e-13 * np.maximum(1.0, np.abs(a[pick]))):
            raise ConvergenceError("panel width collapsed before tolerance was met")
        used += 2 * int(np.count_nonzero(pick))
        if used > budget:
            raise ConvergenceError("quadrature subdivision budget exhausted")
        pa, pb = a[pick], b[pick]
        mid = 0.5 * (pa + pb)
        na, nb = np.concatenate((pa, mid)), np.concatenate((mid, pb))
        nv, ne, nf = _gk15(f, na, nb, f0)
        keep = ~pick
        a, b = np.concatenate((a[keep], na)), np.concatenate((b[keep], nb))
        vals = np.concatenate((vals[keep], nv))
        errs = np.concatenate((errs[keep], ne))
        frozen = np.concatenate((frozen[keep], nf))
    return float(np.sum(vals)), float(np.sum(errs)), used


def _phase_crossings(phase, t0, t1):
    """Approximate points in (t0, t1) where ``phase`` crosses a multiple of pi.

    Panels only need to be cut close to the sign changes, so two regula-falsi
    steps from a grid fine enough to resolve every crossing are enough.
    """
    n = 64
    while True:
        grid = np.linspace(t0, t1, n + 1)
        g = np.asarray(phase(grid), dtype=float)
        if np.max(np.abs(np.diff(g))) < 0.5 * math.pi or n >= 1 << 24:
            break
        n = int(n * min(64.0, 2.0 * np.max(np.abs(np.diff(g))) / math.pi + 1.0))
    k = np.floor(g / math.pi)
    idx = np.nonzero(np.diff(k))[0]
    if idx.size == 0:
        return np.empty(0)
    lo, hi = grid[idx], grid[idx + 1]
    glo, ghi = g[idx], g[idx + 1]
    # target level: the multiple of pi between glo and ghi
    level = math.pi * np.maximum(k[idx], k[idx + 1])

    def secant(lo, hi, glo, ghi):
        span = ghi - glo
        safe = np.where(span == 0.0, 1.0, span)
        return np.where(span == 0.0, 0.5 * (lo + hi), lo + (level - glo) * (hi - lo) / safe)

    for _ in range(2):
        t = secant(lo, hi, glo, ghi)
        gt = np.asarray(phase(t), dtype=float)
        left = (gt - level) * (glo - level) > 0
        lo, glo = np.where(left, t, lo), np.where(left, gt, glo)
        hi, ghi = np.where(left, hi, t), np.where(left, ghi, gt)
    return np.sort(np.clip(secant(lo, hi, glo, ghi), t0, t1))


def integrate_oscillatory(
    f: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    *,
    f0: Optional[float] = None,
    phase: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    envelope: Optional[Callable[[float], float]] = None,
    first_block: float = 1.0,
) -> float:
    """Integral of ``f`` over [0, inf) for decaying, oscillating integrands.

    ``f`` must accept numpy arrays. ``f0`` is its limit at 0 when the integrand
    has a removable singularity there. When ``phase`` is given, panels are
    split at every crossing of ``phase(t) = k*pi`` (sign changes of the sine
    factor); otherwise each block is cut into equal panels. Blocks double in
    length until ``envelope(T)`` (or, without it, the largest sampled
    ``|f|`` on the last block) drops below ``spec.tail_cutoff``.
    """
    total = 0.0
    err_total = 0.0
    used = 0
    t0, t1 = 0.0, float(first_block)
    block = 0
    while True:
        if phase is not None:
            cuts = _phase_crossings(phase, t0, t1)
            edges = np.concatenate(([t0], cuts, [t1]))
        else:
            edges = np.linspace(t0, t1, 17)
        a, b = edges[:-1], edges[1:]
        keep = b > a
        a, b = a[keep], b[keep]
        if a.size > spec.max_subdivisions - used:
            raise ConvergenceError("quadrature subdivision budget exhausted")
        # 6/pi^2 * sum 1/(j+1)^2 = 1 over blocks
        tol = max(spec.abs_tol, spec.rel_tol * abs(total)) * 6.0 / (math.pi * (block + 1)) ** 2
        val, err, n = _adaptive_panels(f, a, b, tol, f0, spec.max_subdivisions - used)
        total += val
        err_total += err
        used += n
        if envelope is not None:
            tail = envelope(t1)
        else:
            probe = np.linspace(0.5 * (t0 + t1), t1, 257)
            tail = float(np.max(np.abs(f(probe))))
        if tail < spec.tail_cutoff:
            break
        block += 1
        if block > 200:
            raise ConvergenceError("integrand envelope did not decay below tail_cutoff")
        t0, t1 = t1, 2.0 * t1
    if err_total > max(spec.abs_tol, spec.rel_tol * abs(total)) * 1.0001:
        raise ConvergenceError(f"estimated error {err_total:.3g} above tolerance")
    return total
