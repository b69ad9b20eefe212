"""Scenario parameters and the PMF container shared by the analytical modules."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .interference import InterferenceField


class ConfigError(ValueError):
    """A configuration violates one of its invariants."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class PowerSplit:
    """Power coefficients of the first- and second-decoded MTD on a shared channel."""

    a1: float
    a2: float
    delta: float = 1.0

    def __post_init__(self) -> None:
        if self.a1 < 0 or self.a2 < 0:
            raise ConfigError("power coefficients must be nonnegative")
        if abs(self.a1 + self.a2 - self.delta) > 1e-12:
            raise ConfigError(f"a1 + a2 must equal delta={self.delta} (got {self.a1} + {self.a2})")

    @classmethod
    def from_a1(cls, a1: float, delta: float = 1.0) -> "PowerSplit":
        a2 = delta - a1
        if abs(a2) < 1e-15:
            a2 = 0.0
        return cls(a1, a2, delta)

    @classmethod
    def equal(cls, delta: float = 1.0) -> "PowerSplit":
        return cls(delta / 2.0, delta / 2.0, delta)


@dataclass(frozen=True)
class SystemConfig:
    """One scenario. Interference factors ``phi1``/``phi2`` are linear, not dB.

    ``rho`` (the power-control target) is carried for completeness only: in an
    interference-limited network it cancels from every SIR.
    ``rank_splits`` optionally overrides ``split`` for CRS rank i (index i-1).
    """

    mean_load: float = 60.0
    channels: int = 30
    max_per_channel: int = 2
    alpha: float = 3.6
    mu: float = 0.1
    theta: float = 1.0
    tau: float = 0.2
    phi1: float = 0.1
    phi2: float = 10.0 ** -2.6
    split: PowerSplit = dataclasses.field(default_factory=PowerSplit.equal)
    rho: float = 1.0
    rank_splits: Optional[tuple[PowerSplit, ...]] = None

    def __post_init__(self) -> None:
        if not self.mean_load > 0:
            raise ConfigError("mean_load must be positive")
        if int(self.channels) != self.channels or self.channels < 1:
            raise ConfigError("channels must be a positive integer")
        if self.max_per_channel not in (1, 2):
            raise ConfigError("max_per_channel must be 1 or 2")
        if not self.alpha > 2:
            raise ConfigError("alpha must exceed 2")
        if not 0 <= self.mu <= 1:
            raise ConfigError("mu must lie in [0, 1]")
        if not self.theta > 0:
            raise ConfigError("theta must be positive")
        if not self.tau >= 0:
            raise ConfigError("tau must be nonnegative")
        if not (self.phi1 > 0 and self.phi2 > 0):
            raise ConfigError("phi1 and phi2 must be positive (linear scale)")
        if self.rank_splits is not None:
            if any(abs(s.delta - self.split.delta) > 1e-12 for s in self.rank_splits):
                raise ConfigError("rank_splits must share the scenario delta")

    @property
    def a1(self) -> float:
        return self.split.a1

    @property
    def a2(self) -> float:
        return self.split.a2

    @property
    def delta(self) -> float:
        return self.split.delta

    @property
    def field1(self) -> InterferenceField:
        return InterferenceField(self.phi1, self.alpha)

    @property
    def field2(self) -> InterferenceField:
        return InterferenceField(self.phi2, self.alpha)

    @property
    def capacity(self) -> int:
        """Most MTDs that can be scheduled at once (L * N)."""
        return self.max_per_channel * self.channels

    def rank_split(self, i: int) -> PowerSplit:
        if self.rank_splits is not None and i - 1 < len(self.rank_splits):
            return self.rank_splits[i - 1]
        return self.split

    def replace(self, **changes) -> "SystemConfig":
        if "a1" in changes:
            a1 = changes.pop("a1")
            delta = changes.pop("delta", self.delta)
            changes["split"] = PowerSplit.from_a1(a1, delta)
        elif "delta" in changes:
            delta = changes.pop("delta")
            ratio = self.a1 / self.delta
            changes["split"] = PowerSplit.from_a1(ratio * delta, delta)
        return dataclasses.replace(self, **changes)


@dataclass
class Pmf:
    """Distribution of the number of simultaneously active MTDs.

    ``truncation_mass`` is the Poisson tail excluded from the sum, so the
    entries add up to ``1 - truncation_mass`` up to rounding.
    """

    probabilities: np.ndarray
    truncation_mass: float = 0.0

    def __post_init__(self) -> None:
        self.probabilities = np.asarray(self.probabilities, dtype=float)

    def __len__(self) -> int:
        return self.probabilities.size

    def __getitem__(self, k1: int) -> float:
        return float(self.probabilities[k1])

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.probabilities.size)

    def total(self) -> float:
        return float(np.sum(self.probabilities))

    def mean(self) -> float:
        return float(np.dot(self.support, self.probabilities))

    def total_variation(self, other: "Pmf | Sequence[float]") -> float:
        q = other.probabilities if isinstance(other, Pmf) else np.asarray(other, dtype=float)
        n = max(q.size, self.probabilities.size)
        p = np.pad(self.probabilities, (0, n - self.probabilities.size))
        q = np.pad(q, (0, n - q.size))
        return 0.5 * float(np.sum(np.abs(p - q)))

    def check(self, tol: float = 1e-8) -> None:
        p = self.probabilities
        if np.any(p < -tol) or np.any(p > 1 + tol):
            raise ArithmeticError("PMF entry outside [0, 1]")
        total = p.sum()
        if not (1 - self.truncation_mass - tol <= total <= 1 + tol):
            raise ArithmeticError(f"PMF sums to {total!r}, truncation mass {self.truncation_mass!r}")


def poisson_tail(k: int, mean_load: float) -> float:
    """Pr(K > k) for K ~ Poisson(mean_load), i.e. 1 - Q(k + 1, mean_load)."""
    if k < 0:
        return 1.0
    return float(special.gammainc(k + 1, mean_load))


def poisson_truncation(mean_load: float, tail: float = 1e-12) -> int:
    """Smallest k_max with Pr(K > k_max) < tail for K ~ Poisson(mean_load)."""
    k = int(mean_load + 10.0 * math.sqrt(mean_load) + 10.0)
    while poisson_tail(k, mean_load) >= tail:
        k *= 2
    lo, hi = -1, k  # tail(lo) >= tail > tail(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if poisson_tail(mid, mean_load) < tail:
            hi = mid
        else:
            lo = mid
    return hi
