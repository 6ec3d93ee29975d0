"""Dense two-phase simplex with Bland's rule.

Problems are stated as

    maximize    c . x
    subject to  A x >= b,   E x = d,   x_j >= 0 for j in ``nonneg``

and converted to the standard form ``M z = h, z >= 0, h >= 0`` before the
tableau is built.  Free variables are split into a difference of two
nonnegative parts.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-9
REINVERT_EVERY = 25
RHS_ZERO_TOL = 1e-11

log = logging.getLogger(__name__)


class LpError(RuntimeError):
    """Numerical failure inside the simplex iterations."""


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpProblem:
    objective: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    E: np.ndarray | None = None
    d: np.ndarray | None = None
    nonneg: np.ndarray | bool = True

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.size
        self.A, self.b = _coerce_rows(self.A, self.b, n, "A")
        self.E, self.d = _coerce_rows(self.E, self.d, n, "E")
        nonneg = np.asarray(self.nonneg, dtype=bool)
        self.nonneg = np.broadcast_to(nonneg, (n,)).copy()
        for arr in (self.objective, self.A, self.b, self.E, self.d):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP data must be finite")

    @property
    def n_vars(self) -> int:
        return self.objective.size


def _coerce_rows(M, v, n, name):
    if M is None:
        return np.zeros((0, n)), np.zeros(0)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    v = np.asarray(v, dtype=float).reshape(-1)
    if M.shape[1] != n or v.shape != (M.shape[0],):
        raise ValueError(f"{name} has shape {M.shape} and rhs {v.shape}, expected (m, {n}) and (m,)")
    return M, v


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective_value: float | None = None
    is_vertex: bool = False
    duals_ineq: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    pivots: int = 0
    trace: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    """Row-reduced tableau ``[M | h]`` with a basis index per row."""

    def __init__(self, M, h, basis, verbose=False):
        self.T = np.hstack([M, h[:, None]])
        self.original = self.T.copy()
        self.basis = list(basis)
        self.pivots = 0
        self.verbose = verbose
        self.trace = []

    def pivot(self, row, col):
        T = self.T
        p = T[row, col]
        if abs(p) < PIVOT_TOL:
            raise LpError(f"near-singular pivot {p:.3e} at row {row}, column {col}")
        T[row] /= p
        others = np.flatnonzero(np.abs(T[:, col]) > 0)
        others = others[others != row]
        T[others] -= np.outer(T[others, col], T[row])
        T[others, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col
        self.pivots += 1
        if self.pivots % REINVERT_EVERY == 0:
            self.reinvert()
        self._snap_rhs()
        if self.verbose:
            self.trace.append(self.T.copy())
            log.debug("pivot %d: row %d col %d", self.pivots, row, col)

    def reinvert(self):
        """Rebuild the tableau from the original rows to stop round-off drift."""
        B = self.original[:, self.basis]
        try:
            T = np.linalg.solve(B, self.original)
        except np.linalg.LinAlgError as exc:
            raise LpError(f"singular basis {self.basis}") from exc
        T[:, self.basis] = np.eye(len(self.basis))
        self.T = T
        self._snap_rhs()

    def _snap_rhs(self):
        """Round-off can leave degenerate basics at +-1e-15; make them exactly zero."""
        h = self.T[:, -1]
        h[np.abs(h) <= RHS_ZERO_TOL] = 0.0

    def optimize(self, cost, allowed, max_pivots=50000):
        """Maximize ``cost . z`` over columns in ``allowed``; returns False if unbounded."""
        n = self.T.shape[1] - 1
        fresh = False
        for _ in range(max_pivots):
            cb = cost[self.basis]
            reduced = cost[:n] - cb @ self.T[:, :n]
            candidates = np.flatnonzero((reduced > FEAS_TOL) & allowed)
            if candidates.size == 0:
                if fresh:
                    return True
                self.reinvert()       # confirm optimality on a clean tableau
                fresh = True
                continue
            fresh = False
            col = candidates[0]                      # Bland: lowest entering index
            column = self.T[:, col]
            pos = column > PIVOT_TOL
            if not pos.any():
                return False
            ratios = np.full(column.shape, np.inf)
            ratios[pos] = self.T[pos, -1] / column[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
            row = min(ties, key=lambda i: self.basis[i])  # Bland: lowest leaving index
            self.pivot(row, col)
        raise LpError(f"simplex exceeded {max_pivots} pivots")


def _dedupe(M, v):
    """Drop zero rows and exact duplicates of ``M z >= v`` after scaling rows."""
    if M.shape[0] == 0:
        return M, v, np.zeros(0, dtype=int)
    scale = np.abs(M).max(axis=1)
    keep_rows = []
    for i in range(M.shape[0]):
        if scale[i] == 0.0:
            if v[i] > FEAS_TOL:
                keep_rows.append(i)     # 0 >= positive: keep to report infeasibility
            continue
        keep_rows.append(i)
    idx = np.asarray(keep_rows, dtype=int)
    if idx.size == 0:
        return M[:0], v[:0], idx
    scl = np.where(scale[idx] > 0, scale[idx], 1.0)
    key = np.hstack([M[idx] / scl[:, None], (v[idx] / scl)[:, None]])
    _, first = np.unique(np.round(key, 12), axis=0, return_index=True)
    idx = idx[np.sort(first)]
    return M[idx], v[idx], idx


def _standard_form(problem: LpProblem):
    n = problem.n_vars
    free = np.flatnonzero(~problem.nonneg)
    # column map: original x = S z_x, S = [I | -I_free]
    split = np.hstack([np.eye(n), -np.eye(n)[:, free]])
    A_idx_all = np.arange(problem.A.shape[0])
    A, b, a_idx = _dedupe(problem.A, problem.b)
    E, d = problem.E, problem.d
    m_a, m_e = A.shape[0], E.shape[0]
    n_z = split.shape[1]
    M = np.zeros((m_a + m_e, n_z + m_a))
    h = np.zeros(m_a + m_e)
    M[:m_a, :n_z] = A @ split
    M[:m_a, n_z:] = -np.eye(m_a)
    h[:m_a] = b
    M[m_a:, :n_z] = E @ split
    h[m_a:] = d
    scale = np.abs(M).max(axis=1)
    scale[scale == 0] = 1.0
    # flipping rows with zero rhs lets their slack start in the basis
    sign = np.where(h <= 0, -1.0, 1.0)
    factor = sign / scale
    M *= factor[:, None]
    h *= factor
    cost = np.concatenate([problem.objective @ split, np.zeros(m_a)])
    return dict(M=M, h=h, cost=cost, split=split, n_z=n_z, m_a=m_a, m_e=m_e,
                a_idx=a_idx, factor=factor, n_all_a=A_idx_all.size)


def _phase_one(sf, verbose):
    M, h = sf["M"], sf["h"]
    m, n = M.shape
    basis = [-1] * m
    for i in range(sf["m_a"]):
        col = sf["n_z"] + i
        if M[i, col] > 0:           # flipped row: slack enters with +1
            basis[i] = col
    need = [i for i in range(m) if basis[i] < 0]
    art = np.zeros((m, len(need)))
    for k, i in enumerate(need):
        art[i, k] = 1.0
        basis[i] = n + k
    # rescale rows so basic slack columns are unit vectors
    for i in range(m):
        if basis[i] < n:
            piv = M[i, basis[i]]
            M[i] /= piv
            h[i] /= piv
            sf["factor"][i] /= piv
    tab = _Tableau(np.hstack([M, art]), h, basis, verbose)
    cost = np.concatenate([np.zeros(n), -np.ones(len(need))])
    allowed = np.ones(n + len(need), dtype=bool)
    tab.optimize(cost, allowed)
    infeas = -cost[tab.basis] @ tab.T[:, -1]
    return tab, n, infeas, len(need)


def _drive_out_artificials(tab, n):
    """Pivot artificials out of the basis or drop their (redundant) rows."""
    keep = []
    for i in range(tab.T.shape[0]):
        if tab.basis[i] < n:
            keep.append(i)
            continue
        row = tab.T[i, :n]
        if np.abs(row).max(initial=0.0) > 1e-9:
            tab.pivot(i, int(np.argmax(np.abs(row))))
            keep.append(i)
    dropped = sorted(set(range(tab.T.shape[0])) - set(keep))
    tab.T = tab.T[keep]
    tab.original = tab.original[keep]
    tab.basis = [tab.basis[i] for i in keep]
    tab.reinvert()
    return keep, dropped


def _run(problem: LpProblem, phase_two: bool, verbose: bool = False) -> LpSolution:
    sf = _standard_form(problem)
    tab, n, infeas, n_art = _phase_one(sf, verbose)
    if infeas > FEAS_TOL:
        return LpSolution(LpStatus.INFEASIBLE, pivots=tab.pivots, trace=tab.trace)
    keep, _ = _drive_out_artificials(tab, n)
    if not phase_two:
        z = _basic_solution(tab, n)
        x = sf["split"] @ z[: sf["n_z"]]
        return LpSolution(LpStatus.OPTIMAL, x, None, True, pivots=tab.pivots, trace=tab.trace)
    cost = np.concatenate([sf["cost"], np.zeros(n_art)])
    allowed = np.arange(n + n_art) < n          # artificials never re-enter
    bounded = tab.optimize(cost, allowed)
    if not bounded:
        return LpSolution(LpStatus.UNBOUNDED, pivots=tab.pivots, trace=tab.trace)
    z = _basic_solution(tab, n)
    x = sf["split"] @ z[: sf["n_z"]]
    # duals of the kept standard rows from the final basis
    M_kept = sf["M"][keep]
    B = M_kept[:, tab.basis]
    try:
        y_std = np.linalg.solve(B.T, cost[tab.basis])
    except np.linalg.LinAlgError as exc:
        raise LpError("singular final basis while recovering duals") from exc
    y_full = np.zeros(sf["M"].shape[0])
    y_full[keep] = y_std
    y_full *= sf["factor"]
    m_a = sf["m_a"]
    duals_ineq = np.zeros(sf["n_all_a"])
    duals_ineq[sf["a_idx"]] = y_full[:m_a]
    duals_eq = y_full[m_a:]
    return LpSolution(LpStatus.OPTIMAL, x, float(problem.objective @ x), True,
                      duals_ineq, duals_eq, tab.pivots, tab.trace)


def _basic_solution(tab, n):
    z = np.zeros(tab.T.shape[1] - 1)
    z[tab.basis] = tab.T[:, -1]
    return np.maximum(z[:n], 0.0)


def solve(problem: LpProblem, verbose: bool = False) -> LpSolution:
    """Solve ``problem``; the returned point is a vertex of the feasible region."""
    return _run(problem, phase_two=True, verbose=verbose)


def feasibility(problem: LpProblem) -> bool:
    """Phase one only: does the constraint system admit a point?"""
    return _run(problem, phase_two=False).status is LpStatus.OPTIMAL


def simplex_problem(objective, G=None) -> LpProblem:
    """``max objective . r`` over the probability simplex with ``G r >= 0``."""
    objective = np.asarray(objective, dtype=float)
    n = objective.size
    if G is None:
        G = np.zeros((0, n))
    G = np.asarray(G, dtype=float).reshape(-1, n)
    return LpProblem(objective, G, np.zeros(G.shape[0]), np.ones((1, n)), np.ones(1), True)
