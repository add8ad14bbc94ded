"""Dense two-phase primal simplex with Bland's rule and a duality certificate.

Solves  max c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  0 <= x <= upper.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import InputError, SolverError

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9
MAX_PIVOTS = 50_000


@dataclass
class LpProblem:
    c: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        k = self.c.size
        self.a_ub, self.b_ub = _rows(self.a_ub, self.b_ub, k, "ub")
        self.a_eq, self.b_eq = _rows(self.a_eq, self.b_eq, k, "eq")
        if self.upper is None:
            self.upper = np.full(k, np.inf)
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        if self.upper.size != k:
            raise InputError("upper bounds need one entry per variable")
        for arr in (self.c, self.a_ub, self.b_ub, self.a_eq, self.b_eq):
            if not np.all(np.isfinite(arr)):
                raise InputError("LP coefficients must be finite")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def all_ub_rows(self) -> tuple[np.ndarray, np.ndarray]:
        """Inequality rows with finite upper bounds appended as x_j <= u_j."""
        bounded = np.flatnonzero(np.isfinite(self.upper))
        eye = np.eye(self.n_vars)[bounded]
        return np.vstack([self.a_ub, eye]), np.concatenate([self.b_ub, self.upper[bounded]])


def _rows(a, b, k, what):
    if a is None:
        return np.zeros((0, k)), np.zeros(0)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if a.shape[1] != k or a.shape[0] != b.size:
        raise InputError(f"{what} rows have inconsistent shapes {a.shape} / {b.shape}")
    return a, b


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    dual_ub: np.ndarray | None = None  # includes rows generated from upper bounds
    dual_eq: np.ndarray | None = None
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    gap: float = float("nan")
    pivots: int = 0
    extra: dict = field(default_factory=dict)


class _Tableau:
    def __init__(self, a: np.ndarray, b: np.ndarray, basis: list[int]):
        self.t = np.hstack([a, b[:, None]])
        self.basis = basis
        self.pivots = 0

    def pivot(self, row: int, col: int) -> None:
        t = self.t
        t[row] /= t[row, col]
        others = np.flatnonzero(t[:, col])
        for r in others:
            if r != row:
                t[r] -= t[r, col] * t[row]
        t[:, col] = 0.0
        t[row, col] = 1.0
        self.basis[row] = col
        self.pivots += 1
        if self.pivots > MAX_PIVOTS:
            raise SolverError("pivot limit exceeded")

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        cb = cost[self.basis]
        return cost - cb @ self.t[:, :-1]

    def optimize(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        """Maximize cost over the current basis using Bland's rule."""
        while True:
            d = self.reduced_costs(cost)
            entering = np.flatnonzero((d > PIVOT_TOL) & allowed)
            if entering.size == 0:
                return "optimal"
            col = int(entering[0])
            column = self.t[:, col]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = self.t[rows, -1] / column[rows]
            best = ratios.min()
            tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            row = int(min(tied, key=lambda r: self.basis[r]))
            self.pivot(row, col)


def solve(problem: LpProblem) -> LpResult:
    a_ub, b_ub = problem.all_ub_rows()
    a_eq, b_eq = problem.a_eq, problem.b_eq
    k = problem.n_vars
    n_ub, n_eq = a_ub.shape[0], a_eq.shape[0]
    rows = n_ub + n_eq

    # Standard form: x, one slack per inequality row, then artificials.
    a = np.zeros((rows, k + n_ub))
    a[:n_ub, :k] = a_ub
    a[:n_ub, k:] = np.eye(n_ub)
    a[n_ub:, :k] = a_eq
    b = np.concatenate([b_ub, b_eq])
    sign = np.where(b < 0, -1.0, 1.0)
    a *= sign[:, None]
    b = b * sign

    basis = [-1] * rows
    for r in range(n_ub):
        if sign[r] > 0:
            basis[r] = k + r
    need_art = [r for r in range(rows) if basis[r] < 0]
    n_art = len(need_art)
    a_full = np.hstack([a, np.zeros((rows, n_art))])
    for j, r in enumerate(need_art):
        a_full[r, k + n_ub + j] = 1.0
        basis[r] = k + n_ub + j
    n_cols = a_full.shape[1]
    is_art = np.zeros(n_cols, dtype=bool)
    is_art[k + n_ub:] = True

    tab = _Tableau(a_full.copy(), b.copy(), basis)
    if n_art:
        phase1 = np.where(is_art, -1.0, 0.0)
        status = tab.optimize(phase1, np.ones(n_cols, dtype=bool))
        if status != "optimal":
            raise SolverError("phase one cannot be unbounded")
        if -phase1[tab.basis] @ tab.t[:, -1] > FEAS_TOL:
            return LpResult(status="infeasible", pivots=tab.pivots)
        # Drive zero-level artificials out; rows where that fails are redundant.
        keep = []
        for r in range(rows):
            if is_art[tab.basis[r]]:
                cand = np.flatnonzero((np.abs(tab.t[r, :-1]) > PIVOT_TOL) & ~is_art)
                if cand.size:
                    tab.pivot(r, int(cand[0]))
                    keep.append(r)
            else:
                keep.append(r)
        tab.t = tab.t[keep]
        tab.basis = [tab.basis[r] for r in keep]
    else:
        keep = list(range(rows))

    cost = np.zeros(n_cols)
    cost[:k] = problem.c
    status = tab.optimize(cost, ~is_art)
    if status != "optimal":
        return LpResult(status=status, pivots=tab.pivots)

    z = np.zeros(n_cols)
    z[tab.basis] = tab.t[:, -1]
    x = np.maximum(z[:k], 0.0)

    # Duals from the final basis in the sign-normalised standard form.
    basis_matrix = a_full[keep][:, tab.basis]
    y_kept = np.linalg.solve(basis_matrix.T, cost[tab.basis])
    y = np.zeros(rows)
    y[keep] = y_kept
    y *= sign
    dual_ub, dual_eq = y[:n_ub], y[n_ub:]

    result = LpResult(status="optimal", x=x, objective=float(problem.c @ x),
                      dual_ub=dual_ub, dual_eq=dual_eq, pivots=tab.pivots)
    certify(problem, result)
    return result


def certify(problem: LpProblem, result: LpResult) -> None:
    """Fill in primal/dual residuals and the duality gap."""
    a_ub, b_ub = problem.all_ub_rows()
    x = result.x
    viol = [0.0, float(np.max(-x, initial=0.0))]
    if a_ub.size:
        viol.append(float(np.max(a_ub @ x - b_ub, initial=0.0)))
    if problem.a_eq.size:
        viol.append(float(np.max(np.abs(problem.a_eq @ x - problem.b_eq), initial=0.0)))
    result.primal_residual = max(viol)

    yu, ye = result.dual_ub, result.dual_eq
    reduced = a_ub.T @ yu + problem.a_eq.T @ ye - problem.c
    dviol = [0.0, float(np.max(-reduced, initial=0.0)), float(np.max(-yu, initial=0.0))]
    result.dual_residual = max(dviol)
    result.gap = float(b_ub @ yu + problem.b_eq @ ye - problem.c @ x)
