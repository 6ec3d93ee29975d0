"""Linear constraint sets of rewards that explain observed optimal responses.

An observation ``(pi1, pi2)`` with a deterministic response yields rows

    G_b = (P_{pi1,pi2} - P_{pi1,b}) (I - gamma P_{pi1,pi2})^{-1}

for each follower action ``b``; a reward ``r`` explains the response iff
``G_b r >= 0`` for all ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp_solver import LpStatus, simplex_problem, solve
from .mdp_core import TwoAgentMdp, check_policy, is_deterministic, joint_kernel, marginalize

GS_TOL = 1e-10
CONSTANT_TOL = 1e-9
MAX_RESAMPLES = 100


class DegenerateRegionError(RuntimeError):
    """Every sampled objective was maximized by the constant reward."""


@dataclass
class ConstraintSet:
    """Stacked rows ``G`` with ``G r >= 0``; ``provenance[i]`` describes row block ``i``."""

    rows: np.ndarray
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2:
            raise ValueError("rows must be a matrix")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("constraint rows must be finite")

    @classmethod
    def empty(cls, n_states: int) -> "ConstraintSet":
        return cls(np.zeros((0, n_states)), [])

    @property
    def n_states(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def slack(self, r) -> np.ndarray:
        return self.rows @ np.asarray(r, dtype=float)

    def satisfied(self, r, tol: float = 1e-9) -> bool:
        return len(self) == 0 or bool(self.slack(r).min() >= -tol)

    def to_text(self) -> str:
        """One row per line; provenance blocks as ``#`` comment lines."""
        lines = [f"# n_states {self.n_states}"]
        for block in self.provenance:
            lines.append("# " + " ".join(f"{k}={v}" for k, v in block.items()))
        for row in self.rows:
            lines.append(" ".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ConstraintSet":
        n = None
        prov, rows = [], []
        for line in text.splitlines():
            if line.startswith("# n_states"):
                n = int(line.split()[2])
            elif line.startswith("#"):
                prov.append(dict(kv.split("=", 1) for kv in line[2:].split()))
            elif line.strip():
                rows.append([float(v) for v in line.split()])
        return cls(np.array(rows).reshape(-1, n), prov)


def constraints_for(mdp: TwoAgentMdp, pi1, pi2, episode: int | None = None) -> ConstraintSet:
    """Rows for every follower action; rows where ``b`` is the observed action are zero."""
    S, B = mdp.n_states, mdp.n_a2
    pi2 = check_policy(pi2, S, B, "pi2")
    if not is_deterministic(pi2):
        raise ValueError("constraints are defined for a deterministic observed response")
    K = marginalize(mdp, pi1)
    P_obs = joint_kernel(mdp, pi1, pi2)
    inv = np.linalg.inv(np.eye(S) - mdp.discount * P_obs)
    blocks = [(P_obs - K[:, b, :]) @ inv for b in range(B)]
    observed = np.argmax(pi2, axis=1)
    for b in range(B):
        blocks[b][observed == b] = 0.0     # exact zeros where the inequality is vacuous
    prov = [{"episode": episode, "pi1": np.argmax(pi1, axis=1).tolist() if is_deterministic(pi1) else "stochastic",
             "pi2": observed.tolist(), "b": b} for b in range(B)]
    prov = [{k: _compact(v) for k, v in p.items()} for p in prov]
    return ConstraintSet(np.vstack(blocks), prov)


def _compact(v):
    if isinstance(v, list):
        return ",".join(str(x) for x in v)
    return v


def accumulate(existing: ConstraintSet, new: ConstraintSet) -> ConstraintSet:
    if existing.n_states != new.n_states:
        raise ValueError("constraint sets over different state spaces")
    return ConstraintSet(np.vstack([existing.rows, new.rows]), existing.provenance + new.provenance)


def is_constant(r, tol: float = CONSTANT_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    return bool(np.ptp(r) <= tol)


def sample_feasible_vertex(cs: ConstraintSet, rng: np.random.Generator,
                           return_draws: bool = False):
    """Vertex of the feasible region in the simplex maximizing a random linear objective.

    With ``return_draws`` the number of objectives tried is returned as well.
    """
    n = cs.n_states
    for draws in range(1, MAX_RESAMPLES + 1):
        c = rng.uniform(-1.0, 1.0, size=n)
        sol = solve(simplex_problem(c, cs.rows))
        if sol.status is not LpStatus.OPTIMAL:
            raise RuntimeError(f"feasible-set LP returned {sol.status.value}")
        if not is_constant(sol.x):
            return (sol.x, draws) if return_draws else sol.x
    raise DegenerateRegionError(f"{MAX_RESAMPLES} objectives all selected the constant reward")


def simplex_normalize(r) -> np.ndarray:
    """Map ``r`` into the simplex by a positive affine transformation."""
    r = np.asarray(r, dtype=float)
    shifted = r - r.min()
    total = shifted.sum()
    if total <= 0:
        return np.full(r.size, 1.0 / r.size)
    return shifted / total


def distance_to_affine_span(r, target) -> float:
    """Distance from ``r`` to ``Aff(target)`` after both are normalized into the simplex.

    Uses the projection onto ``span(target - mean, 1)`` with the scale on the
    centred target clipped at zero, so negatively scaled copies are penalized.
    """
    r = simplex_normalize(r)
    w = np.asarray(target, dtype=float) - np.mean(target)
    rc = r - r.mean()
    nw = w @ w
    lam = max(0.0, (rc @ w) / nw) if nw > 0 else 0.0
    return float(np.linalg.norm(rc - lam * w))


@dataclass
class IdealEnvironment:
    phi: np.ndarray
    kernel_b1: np.ndarray
    kernel_b2: np.ndarray
    target_reward: np.ndarray
    discount: float

    @property
    def n_states(self) -> int:
        return self.phi.shape[0]

    def as_mdp(self, reward=None) -> TwoAgentMdp:
        """One-leader-action MDP whose follower picks between the two kernels."""
        r = self.target_reward if reward is None else reward
        P = np.stack([self.kernel_b1, self.kernel_b2], axis=1)[:, None]
        return TwoAgentMdp(P, r, self.discount)


def _complement_basis(vectors, n: int, tol: float = GS_TOL) -> list:
    """Orthonormal basis of the complement of ``span(vectors)`` by Gram-Schmidt on e_1..e_n."""
    basis = []
    for v in vectors:
        u = np.asarray(v, dtype=float).copy()
        for q in basis:
            u -= (q @ u) * q
        nrm = np.linalg.norm(u)
        if nrm > tol:
            basis.append(u / nrm)
    span_size = len(basis)
    for i in range(n):
        u = np.zeros(n)
        u[i] = 1.0
        for _ in range(2):             # re-orthogonalize once for stability
            for q in basis:
                u -= (q @ u) * q
        nrm = np.linalg.norm(u)
        if nrm > tol:
            basis.append(u / nrm)
    return basis[span_size:]


def _fit_entry_bound(phi: np.ndarray, n: int) -> np.ndarray:
    """Scale nonzero rows by ``(1/n) / max|entry|`` so entries lie in ``[1/n - 1, 1/n]``."""
    out = phi.copy()
    for i, row in enumerate(phi):
        m = np.abs(row).max()
        if m > 0:
            out[i] = row * (1.0 / n) / m
    return out


def build_ideal_environment(r_star, discount: float, allow_constant: bool = False) -> IdealEnvironment:
    """Follower-facing kernels under which only ``Aff(r_star)`` explains the optimal response.

    The follower compares a uniform kernel (b1) against ``uniform - Phi`` (b2);
    playing b1 everywhere is optimal exactly for rewards with ``Phi r >= 0``.
    Rows of ``Phi`` are an orthogonal basis of the complement of
    ``span(r_star, 1)``, the negated sum of all but one of them, and the
    centred ``r_star``.  A constant ``r_star`` gets the half-space variant
    where the centred target row is dropped and every direction orthogonal to
    ``1`` is pinned from both sides.
    """
    r_star = np.asarray(r_star, dtype=float)
    N = r_star.size
    if N < 2:
        raise ValueError("need at least two states")
    ones = np.ones(N)
    w = r_star - r_star.mean()
    constant = np.linalg.norm(w) <= GS_TOL
    if constant and not allow_constant:
        raise ValueError("r_star is constant; pass allow_constant=True for the half-space variant")
    if constant:
        comp = _complement_basis([ones], N)
        rows = list(comp)
        rows.append(-np.sum(comp, axis=0))
    else:
        comp = _complement_basis([ones, w], N)
        rows = comp + [-np.sum(comp, axis=0) if comp else np.zeros(N), w]
    phi = np.zeros((N, N))
    if rows:
        phi[: len(rows)] = np.vstack(rows)
    phi = _fit_entry_bound(phi, N)
    phi[np.abs(phi) < 1e-15] = 0.0
    phi -= phi.mean(axis=1, keepdims=True) * (np.abs(phi).max(axis=1, keepdims=True) > 0)
    k1 = np.full((N, N), 1.0 / N)
    k2 = k1 - phi
    k2 = np.where(np.abs(k2) < 1e-15, 0.0, k2)
    if np.any(k2 < -1e-12) or np.max(np.abs(k2.sum(axis=1) - 1.0)) > 1e-12:
        raise RuntimeError("ideal kernel is not stochastic")
    k2 = np.clip(k2, 0.0, None)
    return IdealEnvironment(phi, k1, k2, r_star, float(discount))


def ideal_constraints(env: IdealEnvironment, response) -> ConstraintSet:
    """Constraint set from observing ``response`` in the ideal environment."""
    mdp = env.as_mdp()
    pi1 = np.ones((env.n_states, 1))
    return constraints_for(mdp, pi1, response)


def verify_affine_of_true(candidate_r, discount: float, oracle_response, n_probes: int = 20,
                          tol: float = 1e-7, rng: np.random.Generator | None = None) -> bool:
    """Check through one episode in the ideal environment whether ``candidate_r`` is in ``Aff(r*)``.

    ``oracle_response(mdp, pi1)`` returns the true follower's deterministic
    optimal response.  The candidate must explain it, and LP probes along
    random directions off the plane ``span(candidate, 1)`` must all fail to
    find another feasible reward.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    candidate_r = np.asarray(candidate_r, dtype=float)
    env = build_ideal_environment(candidate_r, discount)
    mdp = env.as_mdp()
    pi1 = np.ones((env.n_states, 1))
    response = np.asarray(oracle_response(mdp, pi1), dtype=float)
    check_policy(response, env.n_states, 2, "oracle response")
    if not is_deterministic(response):
        raise ValueError("oracle must return a deterministic response")
    cs = constraints_for(mdp, pi1, response)
    if not cs.satisfied(candidate_r, tol):
        return False
    N = env.n_states
    plane = _plane_basis(candidate_r)
    for _ in range(n_probes):
        u = rng.normal(size=N)
        u -= plane.T @ (plane @ u)
        norm = np.linalg.norm(u)
        if norm < GS_TOL:
            break                      # the plane is the whole space
        u /= norm
        for direction in (u, -u):
            sol = solve(simplex_problem(direction, cs.rows))
            if sol.status is not LpStatus.OPTIMAL or sol.objective_value > tol:
                return False
    # the centred candidate must not be reversible
    w = candidate_r - candidate_r.mean()
    sol = solve(simplex_problem(-w, cs.rows))
    return sol.status is LpStatus.OPTIMAL and sol.objective_value <= tol


def _plane_basis(r) -> np.ndarray:
    n = r.size
    ones = np.ones(n) / np.sqrt(n)
    w = r - r.mean()
    rows = [ones]
    if np.linalg.norm(w) > GS_TOL:
        rows.append(w / np.linalg.norm(w))
    return np.vstack(rows)


def random_off_plane(r_star, rng: np.random.Generator, margin: float = 1e-3) -> np.ndarray:
    """Random simplex point at distance at least ``margin`` from ``Aff(r_star)``."""
    while True:
        r = rng.dirichlet(np.ones(np.size(r_star)))
        if distance_to_affine_span(r, r_star) > margin:
            return r
