"""Brute-force LP oracle by enumerating candidate vertices."""
import itertools

import numpy as np

TOL = 1e-9


def _vertices(rows, rhs, eq_rows, eq_rhs, n):
    """All feasible points where n linearly independent constraints are tight."""
    ineq_count = rows.shape[0]
    pts = []
    for combo in itertools.combinations(range(ineq_count), n - eq_rows.shape[0]):
        M = np.vstack([eq_rows, rows[list(combo)]])
        v = np.concatenate([eq_rhs, rhs[list(combo)]])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, v)
        if np.all(rows @ x >= rhs - 1e-8) and np.allclose(eq_rows @ x, eq_rhs, atol=1e-8):
            pts.append(x)
    return pts


def brute_force(c, A, b, E=None, d=None):
    """max c.x s.t. A x >= b, E x = d, x >= 0. Returns (status, value)."""
    n = c.size
    E = np.zeros((0, n)) if E is None else E
    d = np.zeros(0) if d is None else d
    rows = np.vstack([A, np.eye(n)])
    rhs = np.concatenate([b, np.zeros(n)])
    pts = _vertices(rows, rhs, E, d, n)
    if not pts:
        return "infeasible", None
    # recession directions: A r >= 0, E r = 0, r >= 0, sum r = 1
    dirs = _vertices(rows, np.zeros_like(rhs), np.vstack([E, np.ones((1, n))]),
                     np.concatenate([np.zeros(E.shape[0]), [1.0]]), n)
    if any(c @ r > TOL for r in dirs):
        return "unbounded", None
    return "optimal", max(float(c @ x) for x in pts)
