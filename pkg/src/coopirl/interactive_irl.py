"""Interactive reward learning from fully observed optimal responses."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .feasible_set import (
    ConstraintSet,
    accumulate,
    constraints_for,
    distance_to_affine_span,
    sample_feasible_vertex,
    simplex_normalize,
)
from .lp_solver import LpProblem, LpStatus, solve
from .mdp_core import TwoAgentMdp, deterministic_policy, is_deterministic, joint_value
from .planners import (
    ENUMERATION_CAP,
    CapacityError,
    ResponseModel,
    best_commitment_for_start,
    commitment_value,
    optimal_joint_policy,
    optimal_response,
)
from .seeding import stream

ALG1_COLUMNS = ("episode", "regret", "cumulative_regret", "feasible_probe_count",
                "reward_estimate_distance_to_aff")


@dataclass
class EpisodeRecord:
    index: int
    pi1: np.ndarray
    observation: object
    reward_estimate: np.ndarray | None
    realized_value: float
    regret: float | None
    extras: dict = field(default_factory=dict)


def check_start(start, n_states: int) -> np.ndarray:
    start = np.asarray(start, dtype=float)
    if start.shape != (n_states,) or np.any(start < 0) or abs(start.sum() - 1.0) > 1e-12:
        raise ValueError("start must be a distribution over states")
    return start


def optimal_reference_value(mdp: TwoAgentMdp, start, model: ResponseModel,
                            cap: int = ENUMERATION_CAP) -> float | None:
    """``V*`` at ``start``: the optimal joint value for an optimal follower, else brute force.

    Returns ``None`` when brute force would exceed ``cap``.
    """
    if model.kind == "optimal":
        return float(start @ optimal_joint_policy(mdp)[2])
    try:
        return best_commitment_for_start(mdp, start, model, cap)[0]
    except CapacityError:
        return None


def regret(mdp: TwoAgentMdp, start, pi1, model: ResponseModel, reference_vstar: float,
           rng=None) -> float:
    """``V* - E_{s0 ~ start} V`` of committing ``pi1`` against ``model``."""
    return float(reference_vstar - start @ commitment_value(mdp, pi1, model))


def random_commitment(mdp: TwoAgentMdp, rng: np.random.Generator) -> np.ndarray:
    return deterministic_policy(rng.integers(mdp.n_a1, size=mdp.n_states), mdp.n_a1)


def run_algorithm1(mdp: TwoAgentMdp, start, episodes: int, seed: int,
                   check_invariants: bool = True) -> list[EpisodeRecord]:
    """Commit, observe the optimal response, shrink the feasible set, replan.

    The learner sees ``mdp`` only through its transitions; the reward is used
    solely by the simulated follower and for scoring regret.
    """
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    start = check_start(start, mdp.n_states)
    follower_rng = stream(seed, "follower")
    leader_rng = stream(seed, "objective")
    vstar = float(start @ optimal_joint_policy(mdp)[2])
    true_simplex = simplex_normalize(mdp.reward)
    cs = ConstraintSet.empty(mdp.n_states)
    pi1 = random_commitment(mdp, leader_rng)
    records = []
    estimate = None
    for t in range(1, episodes + 1):
        pi2 = optimal_response(mdp, pi1, rng=follower_rng)
        value = float(start @ joint_value(mdp, pi1, pi2))
        cs = accumulate(cs, constraints_for(mdp, pi1, pi2, episode=t))
        if check_invariants and not cs.satisfied(true_simplex, 1e-9):
            raise AssertionError(f"true reward left the feasible set at episode {t}")
        estimate, draws = sample_feasible_vertex(cs, leader_rng, return_draws=True)
        if check_invariants and not cs.satisfied(estimate, 1e-8):
            raise AssertionError("sampled reward violates the accumulated constraints")
        records.append(EpisodeRecord(
            t, pi1, pi2, estimate, value, vstar - value,
            {"feasible_probe_count": draws,
             "reward_estimate_distance_to_aff": distance_to_affine_span(estimate, mdp.reward),
             "n_constraints": len(cs)},
        ))
        pi1 = optimal_joint_policy(mdp.with_reward(estimate))[0]
    return records


def algorithm1_rows(records: list[EpisodeRecord]) -> list[dict]:
    rows, cum = [], 0.0
    for rec in records:
        cum += rec.regret
        rows.append({
            "episode": rec.index,
            "regret": rec.regret,
            "cumulative_regret": cum,
            "feasible_probe_count": rec.extras["feasible_probe_count"],
            "reward_estimate_distance_to_aff": rec.extras["reward_estimate_distance_to_aff"],
        })
    return rows


def max_margin_baseline(mdp: TwoAgentMdp, observations, penalty: float = 1.0) -> np.ndarray:
    """Single-environment max-margin reward from responses to fixed commitments.

    Maximizes ``sum_s t_s - penalty * ||r||_1`` where ``t_s`` is the smallest
    slack of the observed action over competitors at ``s``, subject to the
    feasibility rows and ``|r(s)| <= 1``.
    """
    if not observations:
        raise ValueError("need at least one observation")
    S = mdp.n_states
    cs = ConstraintSet.empty(S)
    margin_rows = []      # (state, row) pairs bounding t_s
    for pi1, pi2 in observations:
        block = constraints_for(mdp, pi1, pi2)
        cs = accumulate(cs, block)
        observed = np.argmax(pi2, axis=1)
        for b in range(mdp.n_a2):
            for s in range(S):
                if observed[s] != b:
                    margin_rows.append((s, block.rows[b * S + s]))
    has_margin = np.zeros(S, dtype=bool)
    for s, _ in margin_rows:
        has_margin[s] = True
    # variables: r (S, free), t (S, free), u (S, >= 0)
    n = 3 * S
    rows, rhs = [], []

    def add(coef_r=None, coef_t=None, coef_u=None, bound=0.0):
        row = np.zeros(n)
        if coef_r is not None:
            row[:S] = coef_r
        if coef_t is not None:
            row[S:2 * S] = coef_t
        if coef_u is not None:
            row[2 * S:] = coef_u
        rows.append(row)
        rhs.append(bound)

    eye = np.eye(S)
    for s, g in margin_rows:
        add(coef_r=g, coef_t=-eye[s])                       # g.r - t_s >= 0
    for g in cs.rows:
        if np.any(g):
            add(coef_r=g)                                   # g.r >= 0
    for s in range(S):
        add(coef_r=-eye[s], coef_u=eye[s])                  # u_s >= r_s
        add(coef_r=eye[s], coef_u=eye[s])                   # u_s >= -r_s
        add(coef_r=eye[s], bound=-1.0)                      # r_s >= -1
        add(coef_r=-eye[s], bound=-1.0)                     # r_s <= 1
    E = eye[~has_margin]
    E_full = np.hstack([np.zeros((E.shape[0], S)), E, np.zeros((E.shape[0], S))])  # t_s = 0
    c = np.concatenate([np.zeros(S), np.ones(S), -penalty * np.ones(S)])
    nonneg = np.concatenate([np.zeros(2 * S, dtype=bool), np.ones(S, dtype=bool)])
    sol = solve(LpProblem(c, np.array(rows), np.array(rhs), E_full, np.zeros(E.shape[0]), nonneg))
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"max-margin LP returned {sol.status.value}")
    return sol.x[:S]


def max_margin_regret(mdp: TwoAgentMdp, start, seed: int, penalty: float = 1.0) -> float:
    """Regret of planning on the max-margin reward from one random commitment's response."""
    start = check_start(start, mdp.n_states)
    pi1 = random_commitment(mdp, stream(seed, "objective"))
    pi2 = optimal_response(mdp, pi1, rng=stream(seed, "follower"))
    r_hat = max_margin_baseline(mdp, [(pi1, pi2)], penalty)
    plan = optimal_joint_policy(mdp.with_reward(r_hat))[0]
    vstar = float(start @ optimal_joint_policy(mdp)[2])
    return regret(mdp, start, plan, ResponseModel.optimal(), vstar)


__all__ = [
    "ALG1_COLUMNS", "EpisodeRecord", "regret", "optimal_reference_value", "run_algorithm1",
    "algorithm1_rows", "max_margin_baseline", "max_margin_regret", "random_commitment",
    "is_deterministic",
]
