"""LP benchmark P*, exact OPT_mu for tiny instances, and regret reports."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from . import lp
from .core import ConfigurationError, InputError, SolverError
from .matroid import FreeMatroid, MatroidOracle, PartitionMatroid, UniformMatroid

GAP_TOL = 1e-8
RESIDUAL_TOL = 1e-9
OPT_MAX_ALLOCATIONS = 16
OPT_MAX_T = 8


@dataclass
class LpSolution:
    p_star: float
    x_star: np.ndarray
    agent_duals: np.ndarray
    item_duals: np.ndarray
    extra_duals: np.ndarray
    status: str
    gap: float
    primal_residual: float
    dual_residual: float

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "p_star": float(self.p_star),
            "x_star": self.x_star.tolist(),
            "agent_duals": self.agent_duals.tolist(),
            "item_duals": self.item_duals.tolist(),
            "extra_duals": self.extra_duals.tolist(),
            "gap": float(self.gap),
            "primal_residual": float(self.primal_residual),
            "dual_residual": float(self.dual_residual),
        }


def _matroid_rows(oracle: MatroidOracle, size: int) -> tuple[list[np.ndarray], list[float]]:
    if isinstance(oracle, FreeMatroid):
        return [], []
    if isinstance(oracle, UniformMatroid):
        return [np.ones(size)], [float(oracle.r)]
    if isinstance(oracle, PartitionMatroid):
        rows, caps = [], []
        for block, cap in zip(oracle.blocks, oracle.caps):
            row = np.zeros(size)
            row[list(block)] = 1.0
            rows.append(row)
            caps.append(float(cap))
        return rows, caps
    raise ConfigurationError(
        f"the LP benchmark supports free, uniform and partition matroids, not {type(oracle).__name__}"
    )


def build_pstar_lp(means, matroid: MatroidOracle | None = None) -> lp.LpProblem:
    """Variables are [P, x_00, x_01, ..., x_{n-1,m-1}]."""
    mu = np.asarray(means, dtype=float)
    n, m = mu.shape
    k = 1 + n * m
    c = np.zeros(k)
    c[0] = 1.0
    agent_rows = np.zeros((n, k))
    agent_rows[:, 0] = 1.0
    for i in range(n):
        agent_rows[i, 1 + i * m: 1 + (i + 1) * m] = -mu[i]
    item_rows = np.zeros((m, k))
    for e in range(m):
        item_rows[e, 1 + e: k: m] = 1.0
    if matroid is None:
        return lp.LpProblem(c, agent_rows, np.zeros(n), item_rows, np.ones(m))
    if matroid.ground_size != n * m:
        raise InputError("matroid ground set must be [n] x [m]")
    extra, caps = _matroid_rows(matroid, n * m)
    ub = [agent_rows, item_rows]
    if extra:
        ub.append(np.hstack([np.zeros((len(extra), 1)), np.array(extra)]))
    b = np.concatenate([np.zeros(n), np.ones(m), np.array(caps)])
    return lp.LpProblem(c, np.vstack(ub), b)


def solve_pstar(means, matroid: MatroidOracle | None = None) -> LpSolution:
    """Optimal per-round max-min value P* and a fractional allocation x*.

    With ``matroid`` the item rows become ``sum_i x_ie <= 1`` and the
    matroid's facet rows are added; only structured families are accepted.
    """
    mu = np.asarray(means, dtype=float)
    if mu.ndim != 2 or np.any(mu < 0) or np.any(mu > 1):
        raise InputError("means must be an n x m grid in [0, 1]")
    n, m = mu.shape
    res = lp.solve(build_pstar_lp(mu, matroid))
    if res.status != "optimal":
        raise SolverError(f"P* LP reported {res.status}; valid input is always feasible and bounded")
    if abs(res.gap) > GAP_TOL or max(res.primal_residual, res.dual_residual) > RESIDUAL_TOL:
        raise SolverError(
            f"certificate rejected: gap={res.gap:.3g} primal={res.primal_residual:.3g} "
            f"dual={res.dual_residual:.3g}"
        )
    if matroid is None:
        agent_duals, item_duals = res.dual_ub[:n], res.dual_eq
        extra = res.dual_ub[n:]
    else:
        agent_duals, item_duals = res.dual_ub[:n], res.dual_ub[n:n + m]
        extra = res.dual_ub[n + m:]
    return LpSolution(
        p_star=float(res.x[0]),
        x_star=res.x[1:].reshape(n, m),
        agent_duals=agent_duals,
        item_duals=item_duals,
        extra_duals=extra,
        status=res.status,
        gap=res.gap,
        primal_residual=res.primal_residual,
        dual_residual=res.dual_residual,
    )


def _pareto(points: dict[tuple, np.ndarray]) -> dict[tuple, np.ndarray]:
    items = sorted(points.items(), key=lambda kv: -kv[1].sum())
    kept: list[tuple[tuple, np.ndarray]] = []
    for key, p in items:
        if not any(np.all(q >= p) for _, q in kept):
            kept.append((key, p))
    return dict(kept)


def brute_force_opt_mu(means, T: int) -> float:
    """Exact max over allocation sequences of min_i sum_t mu_i . a^t.

    Only the multiset of allocations matters, so the search keeps the Pareto
    frontier of cumulative utility vectors round by round.
    """
    mu = np.asarray(means, dtype=float)
    n, m = mu.shape
    if n ** m > OPT_MAX_ALLOCATIONS or T > OPT_MAX_T or T < 1:
        raise InputError(f"exact OPT_mu needs n^m <= {OPT_MAX_ALLOCATIONS} and 1 <= T <= {OPT_MAX_T}")
    gains = {}
    for owner in itertools.product(range(n), repeat=m):
        g = np.zeros(n)
        for e, i in enumerate(owner):
            g[i] += mu[i, e]
        gains[tuple(np.round(g, 12))] = g
    gains = _pareto(gains)
    frontier = {tuple([0.0] * n): np.zeros(n)}
    for _ in range(T):
        nxt = {}
        for p in frontier.values():
            for g in gains.values():
                q = p + g
                nxt.setdefault(tuple(np.round(q, 12)), q)
        frontier = _pareto(nxt)
    return float(max(p.min() for p in frontier.values()))


@dataclass
class RegretReport:
    t_pstar: float
    alg_min_expected: float
    alg_min_realized: float
    surrogate_regret_ub: float
    per_round_fairness_gap: float
    empirical_opt: float | None = None
    empirical_regret: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def regret_report(run, lp_solution: LpSolution, empirical_opt: float | None = None) -> RegretReport:
    """Regret statistics of a finished run against the T * P* benchmark."""
    ledger = run.ledger
    T = run.T
    t_pstar = T * lp_solution.p_star
    min_exp = float(np.min(ledger.expected))
    min_real = float(np.min(ledger.realized))
    surrogate = t_pstar - min_exp
    return RegretReport(
        t_pstar=float(t_pstar),
        alg_min_expected=min_exp,
        alg_min_realized=min_real,
        surrogate_regret_ub=float(surrogate),
        per_round_fairness_gap=float(surrogate / T),
        empirical_opt=None if empirical_opt is None else float(empirical_opt),
        empirical_regret=None if empirical_opt is None else float(empirical_opt - min_real),
    )
