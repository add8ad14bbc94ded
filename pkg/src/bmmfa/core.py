"""Shared domain types for bandit max-min fair allocation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .env import DistributionSpec

MEAN_TOL = 1e-12
UNASSIGNED = -1


class BmmfaError(Exception):
    """Base class for library errors."""


class InputError(BmmfaError, ValueError):
    """Malformed or out-of-range input."""


class PreconditionError(BmmfaError, ValueError):
    """An operation was called in a state it does not support."""


class ConfigurationError(BmmfaError, ValueError):
    """Invalid policy or experiment configuration."""


class OracleError(BmmfaError, RuntimeError):
    """A matroid oracle violated the matroid axioms."""


class SolverError(BmmfaError, RuntimeError):
    """The LP solver ended in a state that valid input cannot produce."""


class Currency(str, enum.Enum):
    REALIZED = "realized"
    EXPECTED = "expected"
    UCB = "ucb"


@dataclass(frozen=True)
class Instance:
    """n agents, m items, horizon T and an n x m grid of value distributions."""

    n: int
    m: int
    T: int
    dists: tuple[tuple["DistributionSpec", ...], ...]
    means: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.T < 1:
            raise InputError(f"need n, m, T >= 1, got n={self.n} m={self.m} T={self.T}")
        if len(self.dists) != self.n or any(len(row) != self.m for row in self.dists):
            raise InputError("dists must be an n x m grid")
        means = np.asarray(self.means, dtype=float)
        if means.shape != (self.n, self.m):
            raise InputError(f"means has shape {means.shape}, expected {(self.n, self.m)}")
        if np.any(means < 0.0) or np.any(means > 1.0):
            raise InputError("every mean must lie in [0, 1]")
        analytic = np.array([[d.mean for d in row] for row in self.dists])
        if np.max(np.abs(analytic - means)) > MEAN_TOL:
            raise InputError("means grid disagrees with the distributions' expectations")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)

    @classmethod
    def from_dists(cls, dists: Sequence[Sequence["DistributionSpec"]], T: int) -> "Instance":
        grid = tuple(tuple(row) for row in dists)
        n = len(grid)
        m = len(grid[0]) if n else 0
        means = np.array([[d.mean for d in row] for row in grid], dtype=float)
        return cls(n=n, m=m, T=T, dists=grid, means=means)

    @classmethod
    def from_means(cls, means, T: int, kind: str = "bernoulli") -> "Instance":
        from .env import DistributionSpec

        means = np.asarray(means, dtype=float)
        if means.ndim != 2:
            raise InputError("means must be a 2-d grid")
        if kind == "bernoulli":
            make = DistributionSpec.bernoulli
        elif kind == "point":
            make = DistributionSpec.point
        else:
            raise InputError(f"from_means supports bernoulli or point, not {kind!r}")
        return cls.from_dists([[make(float(mu)) for mu in row] for row in means], T)

    def with_horizon(self, T: int) -> "Instance":
        return Instance(n=self.n, m=self.m, T=T, dists=self.dists, means=self.means)

    @property
    def has_beta(self) -> bool:
        return any(d.kind == "beta" for row in self.dists for d in row)


@dataclass(frozen=True)
class Allocation:
    """owner[e] is the agent holding item e, or -1 when e is left unassigned."""

    owner: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "owner", tuple(int(o) for o in self.owner))

    def validate(self, n: int, m: int, allow_unassigned: bool = False) -> None:
        if len(self.owner) != m:
            raise InputError(f"allocation covers {len(self.owner)} items, instance has {m}")
        lo = UNASSIGNED if allow_unassigned else 0
        for e, i in enumerate(self.owner):
            if not lo <= i < n:
                raise InputError(f"item {e} has owner {i}, outside [{lo}, {n - 1}]")

    def as_matrix(self, n: int) -> np.ndarray:
        a = np.zeros((n, len(self.owner)), dtype=int)
        for e, i in enumerate(self.owner):
            if i != UNASSIGNED:
                a[i, e] = 1
        return a

    @property
    def m(self) -> int:
        return len(self.owner)


@dataclass(frozen=True)
class ValueMatrix:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InputError("values must be a 2-d grid")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise InputError("realized values must lie in [0, 1]")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Feedback:
    """Observed (agent, item, value) triples for the assigned cells of one round."""

    entries: tuple[tuple[int, int, float], ...] = ()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass
class UtilityLedger:
    """Per-agent cumulative utilities: realized values, expected values and UCBs."""

    realized: np.ndarray
    expected: np.ndarray
    ucb: np.ndarray
    rounds_elapsed: int = 0

    @classmethod
    def zeros(cls, n: int) -> "UtilityLedger":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), 0)

    @property
    def n(self) -> int:
        return len(self.realized)

    def add_round(self, realized, expected, ucb=None) -> None:
        self.realized = self.realized + np.asarray(realized, dtype=float)
        self.expected = self.expected + np.asarray(expected, dtype=float)
        if ucb is not None:
            self.ucb = self.ucb + np.asarray(ucb, dtype=float)
        self.rounds_elapsed += 1

    def currency(self, which: Currency | str) -> np.ndarray:
        return getattr(self, Currency(which).value)

    def check(self, m: int, tol: float = 1e-9) -> None:
        for name in ("realized", "expected", "ucb"):
            if np.any(self.currency(name) < -tol):
                raise InputError(f"{name} utilities must be nonnegative")
        bound = m * self.rounds_elapsed + tol
        if np.any(self.realized > bound) or np.any(self.expected > bound):
            raise InputError("utilities exceed m per elapsed round")


@dataclass(frozen=True)
class RngHandle:
    """A (seed, stream) key for reproducible, independent random streams."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)
        object.__setattr__(self, "stream", int(self.stream) & 0xFFFFFFFFFFFFFFFF)

    def generator(self, *counter: int) -> np.random.Generator:
        """Generator keyed by (seed, stream, *counter); same key, same draws."""
        key = [self.seed, self.stream, *(int(c) for c in counter)]
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))

    def substream(self, stream: int) -> "RngHandle":
        return RngHandle(self.seed, stream)


def egalitarian_welfare(ledger: UtilityLedger, currency: Currency | str = Currency.REALIZED) -> float:
    """Smallest cumulative utility among agents in the chosen currency."""
    return float(np.min(ledger.currency(currency)))


def min_gap_bounds(a, b) -> tuple[float, float]:
    """Return (min a - min b, max |a - b|).

    The pair satisfies ``first <= max(a - b)`` and ``|first| <= second`` for
    any real vectors of equal length.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise InputError("a and b must be nonempty vectors of equal length")
    return float(a.min() - b.min()), float(np.max(np.abs(a - b)))
