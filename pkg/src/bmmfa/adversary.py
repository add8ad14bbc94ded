"""Hard instances: blocks of n items, each worth slightly more to one agent.

Item (j, k), the j-th item of block k, is flattened to index ``k * n + j``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Allocation, InputError, Instance, RngHandle
from .env import CHUNK_ROUNDS, DistributionSpec, ValueStream

EPS_MAX = 0.25
# Constant from the horizon/size condition under which OPT_mu stays close to E[OPT].
OPT_CONCENTRATION_CONST = 2338


@dataclass(frozen=True)
class BlockAssignment:
    """alpha[k][j] is the agent whose value for item (j, k) is raised."""

    alpha: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        alpha = tuple(tuple(int(i) for i in block) for block in self.alpha)
        if not alpha:
            raise InputError("need at least one block")
        n = len(alpha[0])
        for k, block in enumerate(alpha):
            if sorted(block) != list(range(n)):
                raise InputError(f"block {k} is not a permutation of 0..{n - 1}: {block}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return len(self.alpha[0])

    @property
    def b(self) -> int:
        return len(self.alpha)

    @classmethod
    def identity(cls, n: int, b: int) -> "BlockAssignment":
        return cls(tuple(tuple(range(n)) for _ in range(b)))

    @classmethod
    def sample(cls, n: int, b: int, rng: RngHandle) -> "BlockAssignment":
        gen = rng.generator()
        return cls(tuple(tuple(int(i) for i in gen.permutation(n)) for _ in range(b)))

    def to_list(self) -> list[list[int]]:
        return [list(block) for block in self.alpha]


def item_index(j: int, k: int, n: int) -> int:
    return k * n + j


def _check_eps(eps: float) -> None:
    if not 0.0 <= eps <= EPS_MAX:
        raise InputError(f"eps must lie in [0, {EPS_MAX}], got {eps}")


def _build(alpha: BlockAssignment, eps: float, T: int, erased: int | None) -> Instance:
    n, b = alpha.n, alpha.b
    dists = [[None] * (n * b) for _ in range(n)]
    for k, block in enumerate(alpha.alpha):
        for j, hot in enumerate(block):
            for i in range(n):
                lift = eps if (i == hot and k != erased) else 0.0
                dists[i][item_index(j, k, n)] = DistributionSpec.bernoulli(0.5 + lift)
    return Instance.from_dists(dists, T)


def make_alpha_adversary(n: int, b: int, eps: float, alpha: BlockAssignment, T: int = 1) -> Instance:
    if (alpha.n, alpha.b) != (n, b):
        raise InputError(f"alpha has shape (n={alpha.n}, b={alpha.b}), expected ({n}, {b})")
    _check_eps(eps)
    return _build(alpha, eps, T, None)


def make_alpha_minus_k(n: int, b: int, eps: float, alpha: BlockAssignment, k_prime: int,
                       T: int = 1) -> Instance:
    """Same as the alpha-adversary but with block k_prime flattened to 1/2."""
    if not 0 <= k_prime < b:
        raise InputError(f"erased block {k_prime} outside [0, {b - 1}]")
    if (alpha.n, alpha.b) != (n, b):
        raise InputError(f"alpha has shape (n={alpha.n}, b={alpha.b}), expected ({n}, {b})")
    _check_eps(eps)
    return _build(alpha, eps, T, k_prime)


def lb_epsilon(T: int) -> float:
    if T < 1:
        raise InputError("T must be positive")
    return 1.0 / (8.0 * math.sqrt(T))


def optimal_policy_allocation(alpha: BlockAssignment) -> Allocation:
    n = alpha.n
    owner = [0] * (n * alpha.b)
    for k, block in enumerate(alpha.alpha):
        for j, hot in enumerate(block):
            owner[item_index(j, k, n)] = hot
    return Allocation(owner)


def correct_assignment_counts(owners: np.ndarray, alpha: BlockAssignment) -> list[int]:
    """Per block, how many (round, item) assignments went to the raised agent."""
    n = alpha.n
    target = np.array(optimal_policy_allocation(alpha).owner)
    hits = np.asarray(owners) == target[None, :]
    return [int(hits[:, k * n:(k + 1) * n].sum()) for k in range(alpha.b)]


def opt_concentration_guard(n: int, b: int, T: int) -> list[str]:
    """Reasons the realized-regret lower bound's size conditions fail; empty if they hold."""
    m = n * b
    reasons = []
    if T < max(n, m * m):
        reasons.append(f"T={T} < max(n, m^2)={max(n, m * m)}")
    need = math.ceil(OPT_CONCENTRATION_CONST * math.log(T)) if T > 1 else 0
    if b < need:
        reasons.append(f"m/n={b} < ceil({OPT_CONCENTRATION_CONST} ln T)={need}")
    return reasons


def warn_if_unguarded(n: int, b: int, T: int) -> None:
    reasons = opt_concentration_guard(n, b, T)
    if reasons:
        warnings.warn(
            "realized-regret lower bound conditions not met (" + "; ".join(reasons)
            + "); surrogate-regret results are unaffected",
            stacklevel=2,
        )


def optimal_min_utility(inst: Instance, alpha: BlockAssignment, rng: RngHandle) -> float:
    """Realized min_i U_i of the constant optimal allocation on one environment draw."""
    owner = np.array(optimal_policy_allocation(alpha).owner)
    stream = ValueStream(inst, rng)
    cols = np.arange(inst.m)
    totals = np.zeros(inst.n)
    T = inst.T
    n_blocks = -(-T // CHUNK_ROUNDS)
    for blk in range(n_blocks):
        vals = stream.block(blk)
        rounds = min(CHUNK_ROUNDS, T - blk * CHUNK_ROUNDS)
        picked = vals[:rounds, owner, cols].sum(axis=0)
        totals += np.bincount(owner, picked, inst.n)
    return float(totals.min())
