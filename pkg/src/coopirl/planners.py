"""Follower response models and leader planning.

Response models map a commitment ``pi1`` to the follower's policy.  The
approximate value-iteration planners keep two value functions: ``V`` for
what the leader expects to actually receive and ``V_hat`` for what the
follower believes the game is worth.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .mdp_core import (
    TwoAgentMdp,
    _greedy,
    check_policy,
    deterministic_policy,
    evaluate_kernel,
    follower_optimal_q,
    joint_kernel,
    joint_value,
)

ARGMAX_TOL = 1e-9
AVI_TOL = 1e-8
AVI_MAX_SWEEPS = 10**5
ENUMERATION_CAP = 10**6


class ConvergenceError(RuntimeError):
    def __init__(self, message, value=None, belief_value=None):
        super().__init__(message)
        self.value = value
        self.belief_value = belief_value


class CapacityError(ValueError):
    """Brute-force enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class ResponseModel:
    """Behaviour of the follower: ``optimal``, ``boltzmann`` or ``eps_greedy``."""

    kind: str = "optimal"
    beta: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind == "boltzmann":
            if self.beta is None or self.beta < 0:
                raise ValueError("boltzmann model needs beta >= 0")
        elif self.kind == "eps_greedy":
            if self.epsilon is None or not 0.0 <= self.epsilon <= 1.0:
                raise ValueError("eps_greedy model needs epsilon in [0, 1]")
        elif self.kind != "optimal":
            raise ValueError(f"unknown response model {self.kind!r}")

    @classmethod
    def optimal(cls):
        return cls("optimal")

    @classmethod
    def boltzmann(cls, beta: float):
        return cls("boltzmann", beta=float(beta))

    @classmethod
    def eps_greedy(cls, epsilon: float):
        return cls("eps_greedy", epsilon=float(epsilon))

    @classmethod
    def from_config(cls, cfg: dict) -> "ResponseModel":
        cfg = dict(cfg)
        kind = cfg.pop("model")
        unknown = set(cfg) - {"beta", "epsilon"}
        if unknown:
            raise ValueError(f"unknown response model keys: {sorted(unknown)}")
        return cls(kind, beta=cfg.get("beta"), epsilon=cfg.get("epsilon"))

    def to_config(self) -> dict:
        cfg = {"model": self.kind}
        if self.kind == "boltzmann":
            cfg["beta"] = self.beta
        if self.kind == "eps_greedy":
            cfg["epsilon"] = self.epsilon
        return cfg

    def respond(self, mdp: TwoAgentMdp, pi1, rng=None) -> np.ndarray:
        if self.kind == "optimal":
            return optimal_response(mdp, pi1, rng=rng)
        if self.kind == "boltzmann":
            return boltzmann_response(mdp, pi1, self.beta)
        return eps_greedy_response(mdp, pi1, self.epsilon)


@dataclass
class PlanResult:
    pi1: np.ndarray
    predicted_value: np.ndarray
    follower_belief_value: np.ndarray
    sweeps: int = 0

    def to_dict(self) -> dict:
        return {
            "pi1": self.pi1.tolist(),
            "predicted_value": self.predicted_value.tolist(),
            "follower_belief_value": self.follower_belief_value.tolist(),
        }


def argmax_set(Q: np.ndarray, tol: float = ARGMAX_TOL) -> np.ndarray:
    """Boolean mask of actions within ``tol`` of the row maximum."""
    return Q >= Q.max(axis=-1, keepdims=True) - tol


def optimal_joint_policy(mdp: TwoAgentMdp, tol: float = 1e-10, max_iter: int = 10**6):
    """Optimal joint policy by value iteration over A1 x A2.

    Returns deterministic ``(pi1, pi2, V)``; ties over ``(a, b)`` go to the
    lowest flattened index, i.e. lowest ``a`` then lowest ``b``.
    """
    S, A, B = mdp.n_states, mdp.n_a1, mdp.n_a2
    P = mdp.transition.reshape(S, A * B, S)
    r, g = mdp.reward, mdp.discount
    V = np.zeros(S)
    for _ in range(max_iter):
        V_new = (r[:, None] + g * P @ V).max(axis=1)
        delta = np.max(np.abs(V_new - V))
        V = V_new
        if delta <= tol:
            break
    joint = _greedy(r[:, None] + g * P @ V, None)
    rows = np.arange(S)
    # exact policy-iteration polish so the returned value is exact
    for _ in range(100):
        V = evaluate_kernel(P[rows, joint], r, g)
        new = _greedy(r[:, None] + g * P @ V, joint)
        if np.array_equal(new, joint):
            break
        joint = new
    pi1 = deterministic_policy(joint // B, A)
    pi2 = deterministic_policy(joint % B, B)
    return pi1, pi2, V


def optimal_response(mdp: TwoAgentMdp, pi1, rng=None, tol: float = ARGMAX_TOL) -> np.ndarray:
    """Optimal follower response with uniform tie-breaking.

    Without ``rng`` the result spreads mass uniformly over the argmax set of
    every state.  With ``rng`` one argmax action per state is drawn uniformly,
    giving a deterministic policy.
    """
    mask = argmax_set(follower_optimal_q(mdp, pi1), tol)
    if rng is None:
        return mask / mask.sum(axis=1, keepdims=True)
    actions = [rng.choice(np.flatnonzero(row)) for row in mask]
    return deterministic_policy(actions, mdp.n_a2)


def lowest_index_response(mdp: TwoAgentMdp, pi1, tol: float = ARGMAX_TOL) -> np.ndarray:
    mask = argmax_set(follower_optimal_q(mdp, pi1), tol)
    return deterministic_policy(np.argmax(mask, axis=1), mdp.n_a2)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def boltzmann_response(mdp: TwoAgentMdp, pi1, beta: float) -> np.ndarray:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return softmax_rows(beta * follower_optimal_q(mdp, pi1))


def eps_greedy_response(mdp: TwoAgentMdp, pi1, epsilon: float) -> np.ndarray:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    greedy = optimal_response(mdp, pi1)
    return (1.0 - epsilon) * greedy + epsilon / mdp.n_a2


def commitment_value(mdp: TwoAgentMdp, pi1, model: ResponseModel) -> np.ndarray:
    """Value vector of committing ``pi1`` when the follower acts per ``model``."""
    return joint_value(mdp, pi1, model.respond(mdp, pi1))


def avi_boltzmann(mdp: TwoAgentMdp, beta: float, follower_backup: str = "softmax",
                  tol: float = AVI_TOL, max_sweeps: int = AVI_MAX_SWEEPS) -> PlanResult:
    """Approximate commitment planning against a Boltzmann-rational follower.

    ``follower_backup`` selects how the follower's believed value is backed
    up: ``"softmax"`` (expected under its own Boltzmann policy) or ``"max"``.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if follower_backup not in ("softmax", "max"):
        raise ValueError("follower_backup must be 'softmax' or 'max'")
    P, r, g = mdp.transition, mdp.reward, mdp.discount
    S = mdp.n_states
    rows = np.arange(S)
    V = np.zeros(S)
    V_hat = np.zeros(S)
    for sweep in range(1, max_sweeps + 1):
        cont_hat = P @ V_hat                       # (S, A, B)
        sigma = softmax_rows(beta * cont_hat)      # follower's Boltzmann choice per (s, a)
        leader_q = np.einsum("sab,sab->sa", sigma, P @ V)
        a_star = np.argmax(leader_q, axis=1)
        V_new = r + g * leader_q[rows, a_star]
        if follower_backup == "softmax":
            follower_cont = np.einsum("sb,sb->s", sigma[rows, a_star], cont_hat[rows, a_star])
        else:
            follower_cont = cont_hat[rows, a_star].max(axis=1)
        V_hat = r + g * follower_cont
        delta = np.max(np.abs(V_new - V))
        V = V_new
        if delta <= tol:
            return PlanResult(deterministic_policy(a_star, mdp.n_a1), V, V_hat, sweep)
    raise ConvergenceError("avi_boltzmann did not converge", V, V_hat)


def avi_eps_greedy(mdp: TwoAgentMdp, epsilon: float, tol: float = AVI_TOL,
                   max_sweeps: int = AVI_MAX_SWEEPS) -> PlanResult:
    """Approximate commitment planning against an epsilon-greedy follower."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    P, r, g = mdp.transition, mdp.reward, mdp.discount
    S = mdp.n_states
    rows = np.arange(S)
    P_unif = P.mean(axis=2)                       # P(.|s, a, U(A2))
    V = np.zeros(S)
    V_hat = np.zeros(S)
    for sweep in range(1, max_sweeps + 1):
        b_star = np.argmax(P @ V_hat, axis=2)     # follower's greedy choice per (s, a)
        P_greedy = np.take_along_axis(P, b_star[:, :, None, None], axis=2)[:, :, 0]
        P_eps = epsilon * P_unif + (1.0 - epsilon) * P_greedy   # (S, A, S)
        leader_q = P_eps @ V
        a_star = np.argmax(leader_q, axis=1)
        V_new = r + g * leader_q[rows, a_star]
        V_hat = r + g * P_greedy[rows, a_star] @ V_hat
        delta = np.max(np.abs(V_new - V))
        V = V_new
        if delta <= tol:
            return PlanResult(deterministic_policy(a_star, mdp.n_a1), V, V_hat, sweep)
    raise ConvergenceError("avi_eps_greedy did not converge", V, V_hat)


def enumerate_commitments(mdp: TwoAgentMdp, cap: int = ENUMERATION_CAP):
    count = mdp.n_a1 ** mdp.n_states
    if count > cap:
        raise CapacityError(f"{count} deterministic commitments exceed cap {cap}")
    for actions in itertools.product(range(mdp.n_a1), repeat=mdp.n_states):
        yield deterministic_policy(actions, mdp.n_a1)


def commitment_values(mdp: TwoAgentMdp, model: ResponseModel, cap: int = ENUMERATION_CAP):
    """All deterministic commitments and their value vectors, in index order."""
    policies = list(enumerate_commitments(mdp, cap))
    values = np.array([commitment_value(mdp, pi1, model) for pi1 in policies])
    return policies, values


def dominating_policy_check(mdp: TwoAgentMdp, model: ResponseModel, cap: int = ENUMERATION_CAP,
                            tol: float = 1e-9):
    """A deterministic commitment whose value dominates all others, or ``None``."""
    policies, values = commitment_values(mdp, model, cap)
    best = values.max(axis=0)
    for pi1, v in zip(policies, values):
        if np.all(v >= best - tol):
            return pi1
    return None


def best_commitment_for_start(mdp: TwoAgentMdp, start, model: ResponseModel,
                              cap: int = ENUMERATION_CAP):
    """``(V*, pi1)`` maximizing the expected start value over deterministic commitments."""
    policies, values = commitment_values(mdp, model, cap)
    scores = values @ np.asarray(start, dtype=float)
    i = int(np.argmax(scores))
    return float(scores[i]), policies[i]


def trajectory_logits(Q: np.ndarray, beta: float) -> np.ndarray:
    """Log Boltzmann probabilities ``beta Q - logsumexp(beta Q)`` per state."""
    z = beta * Q
    return z - logsumexp(z, axis=-1, keepdims=True)


__all__ = [
    "ConvergenceError", "CapacityError", "ResponseModel", "PlanResult", "argmax_set",
    "optimal_joint_policy", "optimal_response", "lowest_index_response", "boltzmann_response",
    "eps_greedy_response", "commitment_value", "avi_boltzmann", "avi_eps_greedy",
    "dominating_policy_check", "best_commitment_for_start", "commitment_values",
    "check_policy", "joint_kernel",
]
