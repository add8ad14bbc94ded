"""Stochastic environment: per-round value draws and semi-bandit feedback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    UNASSIGNED,
    Allocation,
    Feedback,
    InputError,
    Instance,
    RngHandle,
    ValueMatrix,
)

# Rounds are generated in fixed blocks keyed by (seed, stream, block index), so
# the values of round t depend only on (seed, t) and never on past allocations.
CHUNK_ROUNDS = 256


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind == "bernoulli":
            (p,) = self.params
            if not 0.0 <= p <= 1.0:
                raise InputError(f"bernoulli p={p} outside [0, 1]")
        elif self.kind == "beta":
            a, b = self.params
            if a <= 0 or b <= 0:
                raise InputError(f"beta parameters must be positive, got {a}, {b}")
        elif self.kind == "point":
            (v,) = self.params
            if not 0.0 <= v <= 1.0:
                raise InputError(f"point value {v} outside [0, 1]")
        else:
            raise InputError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def bernoulli(cls, p: float) -> "DistributionSpec":
        return cls("bernoulli", (float(p),))

    @classmethod
    def beta(cls, a: float, b: float) -> "DistributionSpec":
        return cls("beta", (float(a), float(b)))

    @classmethod
    def point(cls, v: float) -> "DistributionSpec":
        return cls("point", (float(v),))

    @property
    def mean(self) -> float:
        if self.kind == "beta":
            a, b = self.params
            return a / (a + b)
        return self.params[0]

    def to_dict(self) -> dict:
        if self.kind == "beta":
            return {"kind": "beta", "a": self.params[0], "b": self.params[1]}
        key = "p" if self.kind == "bernoulli" else "v"
        return {"kind": self.kind, key: self.params[0]}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        kind = d.get("kind")
        if kind == "bernoulli":
            return cls.bernoulli(d["p"])
        if kind == "beta":
            return cls.beta(d["a"], d["b"])
        if kind == "point":
            return cls.point(d["v"])
        raise InputError(f"unknown distribution kind {kind!r}")


class ValueStream:
    """Lazily generated realizations for one (instance, rng) pair.

    Only the current block of ``CHUNK_ROUNDS`` rounds is held in memory.
    """

    def __init__(self, inst: Instance, rng: RngHandle):
        self.inst = inst
        self.rng = rng
        shape = (inst.n, inst.m)
        kinds = np.array([[d.kind for d in row] for row in inst.dists])
        self._bern = kinds == "bernoulli"
        self._beta = kinds == "beta"
        self._point = kinds == "point"
        self._p = np.where(self._bern, inst.means, 0.0)
        self._point_v = np.where(self._point, inst.means, 0.0)
        self._beta_a = np.ones(shape)
        self._beta_b = np.ones(shape)
        for i, row in enumerate(inst.dists):
            for e, d in enumerate(row):
                if d.kind == "beta":
                    self._beta_a[i, e], self._beta_b[i, e] = d.params
        self._any_beta = bool(self._beta.any())
        self._block = -1
        self._values: np.ndarray | None = None

    def block(self, index: int) -> np.ndarray:
        gen = self.rng.generator(index)
        shape = (CHUNK_ROUNDS, self.inst.n, self.inst.m)
        u = gen.random(shape)
        vals = np.where(self._bern, (u < self._p).astype(float), self._point_v)
        if self._any_beta:
            draws = gen.beta(self._beta_a, self._beta_b, size=shape)
            vals = np.where(self._beta, draws, vals)
        return vals

    def round(self, t: int) -> np.ndarray:
        """n x m realization for round t (1-based); do not mutate."""
        b, r = divmod(t - 1, CHUNK_ROUNDS)
        if b != self._block:
            self._values = self.block(b)
            self._block = b
        return self._values[r]


def sample_round(inst: Instance, rng: RngHandle, t: int) -> ValueMatrix:
    if not 1 <= t <= inst.T:
        raise InputError(f"round {t} outside [1, {inst.T}]")
    return ValueMatrix(ValueStream(inst, rng).round(t).copy())


def apply_allocation(values: ValueMatrix | np.ndarray, alloc: Allocation):
    """Return (feedback, per-agent rewards) for one round.

    Feedback holds exactly the assigned cells; unassigned items reveal nothing.
    """
    v = values.values if isinstance(values, ValueMatrix) else np.asarray(values, dtype=float)
    n, m = v.shape
    if alloc.m != m:
        raise InputError(f"allocation covers {alloc.m} items, values have {m}")
    alloc.validate(n, m, allow_unassigned=True)
    rewards = np.zeros(n)
    entries = []
    for e, i in enumerate(alloc.owner):
        if i == UNASSIGNED:
            continue
        x = float(v[i, e])
        entries.append((i, e, x))
        rewards[i] += x
    return Feedback(tuple(entries)), rewards
