"""Matroid oracles and weighted matroid intersection.

Ground elements are (agent, item) pairs flattened as ``i * m + e``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import ConfigurationError, InputError, OracleError

AXIOM_CHECK_LIMIT = 14
BRUTE_FORCE_LIMIT = 20
GAIN_TOL = 1e-12
PATH_TOL = 1e-12


def element_id(i: int, e: int, m: int) -> int:
    return i * m + e


def element_pair(x: int, m: int) -> tuple[int, int]:
    return divmod(x, m)


class MatroidOracle:
    """Independence oracle over ``range(ground_size)`` with a bounded LRU cache."""

    def __init__(self, ground_size: int, cache_size: int = 1 << 14):
        if ground_size < 0:
            raise InputError("ground size must be nonnegative")
        self.ground_size = ground_size
        self._cached = lru_cache(maxsize=cache_size)(self._independent)

    def _independent(self, s: frozenset) -> bool:
        raise NotImplementedError

    def _check(self, s: Iterable[int]) -> frozenset:
        s = frozenset(int(x) for x in s)
        for x in s:
            if not 0 <= x < self.ground_size:
                raise InputError(f"element {x} is not in the ground set of size {self.ground_size}")
        return s

    def is_independent(self, s: Iterable[int]) -> bool:
        return self._cached(self._check(s))

    def rank(self, s: Iterable[int]) -> int:
        """Greedy maximum independent subset size."""
        s = self._check(s)
        picked: frozenset = frozenset()
        for x in sorted(s):
            if self._cached(picked | {x}):
                picked = picked | {x}
        return len(picked)


class FreeMatroid(MatroidOracle):
    def _independent(self, s):
        return True

    def __repr__(self):
        return f"FreeMatroid({self.ground_size})"


class UniformMatroid(MatroidOracle):
    def __init__(self, ground_size: int, r: int):
        super().__init__(ground_size)
        if r < 0:
            raise InputError("uniform rank must be nonnegative")
        self.r = r

    def _independent(self, s):
        return len(s) <= self.r

    def __repr__(self):
        return f"UniformMatroid({self.ground_size}, r={self.r})"


class PartitionMatroid(MatroidOracle):
    """Independent iff each block holds at most its capacity.

    Elements missing from every block are unconstrained.
    """

    def __init__(self, ground_size: int, blocks: Sequence[Sequence[int]], caps: Sequence[int]):
        super().__init__(ground_size)
        if len(blocks) != len(caps):
            raise InputError("one capacity per block is required")
        self.blocks = [tuple(sorted(int(x) for x in b)) for b in blocks]
        self.caps = [int(c) for c in caps]
        if any(c < 0 for c in self.caps):
            raise InputError("block capacities must be nonnegative")
        self._block_of = {}
        for j, b in enumerate(self.blocks):
            for x in b:
                if not 0 <= x < ground_size:
                    raise InputError(f"block element {x} outside the ground set")
                if x in self._block_of:
                    raise InputError(f"element {x} appears in two blocks")
                self._block_of[x] = j

    def _independent(self, s):
        used = [0] * len(self.blocks)
        for x in s:
            j = self._block_of.get(x)
            if j is not None:
                used[j] += 1
                if used[j] > self.caps[j]:
                    return False
        return True

    def __repr__(self):
        return f"PartitionMatroid({self.ground_size}, {len(self.blocks)} blocks)"


class PredicateMatroid(MatroidOracle):
    """Wraps an arbitrary independence predicate; axioms are the caller's problem."""

    def __init__(self, ground_size: int, predicate: Callable[[frozenset], bool]):
        super().__init__(ground_size)
        self.predicate = predicate

    def _independent(self, s):
        return bool(self.predicate(s))


def item_partition(n: int, m: int) -> PartitionMatroid:
    """Each item goes to at most one agent."""
    blocks = [[element_id(i, e, m) for i in range(n)] for e in range(m)]
    return PartitionMatroid(n * m, blocks, [1] * m)


def agent_cap(n: int, m: int, K: int) -> PartitionMatroid:
    """Each agent receives at most K items per round."""
    blocks = [[element_id(i, e, m) for e in range(m)] for i in range(n)]
    return PartitionMatroid(n * m, blocks, [K] * n)


def category_cap(n: int, m: int, assignments: Sequence[int], caps: Sequence[int]) -> PartitionMatroid:
    """Each agent receives at most caps[j] items of category j; assignments[e] is e's category."""
    if len(assignments) != m:
        raise InputError("need one category per item")
    blocks, block_caps = [], []
    for i in range(n):
        for j, cap in enumerate(caps):
            blocks.append([element_id(i, e, m) for e in range(m) if assignments[e] == j])
            block_caps.append(cap)
    if any(not 0 <= a < len(caps) for a in assignments):
        raise InputError("item category out of range")
    return PartitionMatroid(n * m, blocks, block_caps)


def from_spec(spec: dict, n: int, m: int) -> MatroidOracle:
    """Build a matroid over [n] x [m] from a config mapping."""
    kind = spec.get("kind")
    size = n * m
    if kind == "free":
        return FreeMatroid(size)
    if kind == "uniform":
        return UniformMatroid(size, int(spec["r"]))
    if kind == "partition":
        return PartitionMatroid(size, spec["blocks"], spec["caps"])
    if kind == "agent_cap":
        return agent_cap(n, m, int(spec["K"]))
    if kind == "category":
        return category_cap(n, m, spec["assignments"], spec["caps"])
    raise ConfigurationError(f"unknown matroid kind {kind!r}")


def validate_axioms(oracle: MatroidOracle) -> list[str]:
    """Exhaustively check the three matroid axioms; returns violation messages."""
    size = oracle.ground_size
    if size > AXIOM_CHECK_LIMIT:
        raise InputError(f"axiom check limited to {AXIOM_CHECK_LIMIT} elements, got {size}")
    problems = []
    if not oracle.is_independent(()):
        problems.append("empty set is dependent")
    indep = [
        frozenset(c)
        for k in range(size + 1)
        for c in itertools.combinations(range(size), k)
        if oracle.is_independent(c)
    ]
    indep_set = set(indep)
    for s in indep:
        for x in s:
            if s - {x} not in indep_set:
                problems.append(f"not downward closed: {sorted(s)} minus {x}")
                break
    for x_set in indep:
        for y_set in indep:
            if len(x_set) < len(y_set) and not any(x_set | {y} in indep_set for y in y_set - x_set):
                problems.append(f"exchange fails for {sorted(x_set)} and {sorted(y_set)}")
    return problems


def _weights(w, size: int) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size != size:
        raise InputError(f"got {w.size} weights for a ground set of {size}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputError("weights must be finite and nonnegative")
    return w


def _shortest_augmenting_path(m1, m2, current: frozenset, w: np.ndarray):
    size = m1.ground_size
    outside = [x for x in range(size) if x not in current]
    inside = sorted(current)
    sources = [x for x in outside if m1.is_independent(current | {x})]
    sinks = {x for x in outside if m2.is_independent(current | {x})}
    if not sources or not sinks:
        return None
    adj: dict[int, list[int]] = {x: [] for x in range(size)}
    for y in inside:
        rest = current - {y}
        for x in outside:
            if m1.is_independent(rest | {x}):
                adj[y].append(x)
            if m2.is_independent(rest | {x}):
                adj[x].append(y)
    length = np.where([x in current for x in range(size)], w, -w)

    # Bellman-Ford on vertex lengths; among equal lengths prefer fewer arcs.
    dist: dict[int, tuple[float, int]] = {x: (length[x], 0) for x in sources}
    parent: dict[int, int | None] = {x: None for x in sources}
    for _ in range(size + 1):
        changed = False
        for u in sorted(dist):
            du, hu = dist[u]
            for v in adj[u]:
                cand = (du + length[v], hu + 1)
                old = dist.get(v)
                if (
                    old is None
                    or cand[0] < old[0] - PATH_TOL
                    or (abs(cand[0] - old[0]) <= PATH_TOL and cand[1] < old[1])
                ):
                    dist[v] = cand
                    parent[v] = u
                    changed = True
        if not changed:
            break
    else:
        raise OracleError("exchange graph has a negative cycle; an oracle is not a matroid")
    reached = [x for x in sinks if x in dist]
    if not reached:
        return None
    shortest = min(dist[x][0] for x in reached)
    tied = [x for x in reached if dist[x][0] <= shortest + PATH_TOL]
    best = min(tied, key=lambda x: (dist[x][1], x))
    path = []
    v: int | None = best
    while v is not None:
        path.append(v)
        v = parent[v]
    return -dist[best][0], path


def max_weight_common_independent(m1: MatroidOracle, m2: MatroidOracle, w) -> frozenset:
    """Maximum-weight set independent in both matroids.

    Augments along shortest paths of the exchange graph, one element at a time,
    and stops once the best augmentation no longer increases the weight.
    """
    if m1.ground_size != m2.ground_size:
        raise InputError("matroids must share a ground set")
    w = _weights(w, m1.ground_size)
    if not (m1.is_independent(()) and m2.is_independent(())):
        raise OracleError("empty set must be independent")
    current: frozenset = frozenset()
    while True:
        found = _shortest_augmenting_path(m1, m2, current, w)
        if found is None:
            break
        gain, path = found
        if gain <= GAIN_TOL:
            break
        nxt = current.symmetric_difference(path)
        if not (m1.is_independent(nxt) and m2.is_independent(nxt)):
            raise OracleError(f"augmentation produced a dependent set {sorted(nxt)}")
        current = frozenset(nxt)
    return current


def brute_force_common_independent(m1: MatroidOracle, m2: MatroidOracle, w) -> frozenset:
    """Exhaustive optimum over all subsets; refuses ground sets above 20 elements."""
    size = m1.ground_size
    if size != m2.ground_size:
        raise InputError("matroids must share a ground set")
    if size > BRUTE_FORCE_LIMIT:
        raise InputError(f"brute force limited to {BRUTE_FORCE_LIMIT} elements, got {size}")
    w = _weights(w, size)
    best, best_w = frozenset(), 0.0
    # Grow only independent sets; both families are downward closed.
    stack = [(frozenset(), 0.0, 0)]
    while stack:
        s, sw, start = stack.pop()
        if sw > best_w:
            best, best_w = s, sw
        for x in range(start, size):
            t = s | {x}
            if m1.is_independent(t) and m2.is_independent(t):
                stack.append((t, sw + w[x], x + 1))
    return best


def set_weight(s: Iterable[int], w) -> float:
    w = np.asarray(w, dtype=float).ravel()
    return float(sum(w[x] for x in s))


def owners_from_set(s: Iterable[int], n: int, m: int) -> list[int]:
    owner = [-1] * m
    for x in s:
        i, e = element_pair(x, m)
        if owner[e] != -1:
            raise OracleError(f"item {e} assigned twice")
        owner[e] = i
    return owner
