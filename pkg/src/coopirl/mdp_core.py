"""Dense two-agent MDPs and exact value computations.

Policies are plain ``numpy`` arrays: a commitment policy ``pi1`` has shape
``(n_states, n_a1)`` and a response policy ``pi2`` has shape
``(n_states, n_a2)``; every row is a distribution over actions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

STOCHASTIC_TOL = 1e-12
VI_TOL = 1e-10
VI_MAX_ITER = 10**6


class ShapeError(ValueError):
    """Raised when array dimensions do not agree with the MDP."""


@dataclass(frozen=True, eq=False)
class TwoAgentMdp:
    """Cooperative two-agent MDP with a state-only reward.

    ``transition[s, a, b, s']`` is the probability of moving to ``s'`` when
    the leader plays ``a`` and the follower plays ``b`` in state ``s``.
    """

    transition: np.ndarray
    reward: np.ndarray
    discount: float

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "discount", float(self.discount))
        if P.ndim != 4 or P.shape[0] != P.shape[3]:
            raise ShapeError(f"transition must be (S, A1, A2, S), got {P.shape}")
        if r.shape != (P.shape[0],):
            raise ShapeError(f"reward must have length {P.shape[0]}, got {r.shape}")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=-1) - 1.0)) > STOCHASTIC_TOL:
            raise ValueError("transition slices must be probability distributions")
        if not np.all(np.isfinite(r)):
            raise ValueError("reward must be finite")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_a1(self) -> int:
        return self.transition.shape[1]

    @property
    def n_a2(self) -> int:
        return self.transition.shape[2]

    def with_reward(self, reward) -> "TwoAgentMdp":
        return TwoAgentMdp(self.transition, np.asarray(reward, dtype=float), self.discount)

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_a1": self.n_a1,
            "n_a2": self.n_a2,
            "discount": self.discount,
            "reward": self.reward.tolist(),
            "transition": self.transition.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TwoAgentMdp":
        P = np.asarray(data["transition"], dtype=float)
        expected = (data["n_states"], data["n_a1"], data["n_a2"], data["n_states"])
        if P.shape != tuple(expected):
            raise ShapeError(f"transition shape {P.shape} does not match header {expected}")
        return cls(P, np.asarray(data["reward"], dtype=float), data["discount"])

    def to_json(self) -> str:
        # json emits repr() floats, which round-trip exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TwoAgentMdp":
        return cls.from_dict(json.loads(text))


def check_policy(pi, n_states: int, n_actions: int, name: str = "policy") -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (n_states, n_actions):
        raise ShapeError(f"{name} must have shape {(n_states, n_actions)}, got {pi.shape}")
    if np.any(pi < 0) or np.max(np.abs(pi.sum(axis=1) - 1.0)) > STOCHASTIC_TOL:
        raise ValueError(f"{name} rows must be probability distributions")
    return pi


def deterministic_policy(actions, n_actions: int) -> np.ndarray:
    """One-hot policy matrix from a vector of action indices."""
    actions = np.asarray(actions, dtype=int)
    pi = np.zeros((actions.size, n_actions))
    pi[np.arange(actions.size), actions] = 1.0
    return pi


def is_deterministic(pi, tol: float = 1e-12) -> bool:
    pi = np.asarray(pi)
    return bool(np.all((np.abs(pi) <= tol) | (np.abs(pi - 1.0) <= tol)))


def uniform_policy(n_states: int, n_actions: int) -> np.ndarray:
    return np.full((n_states, n_actions), 1.0 / n_actions)


def marginalize(mdp: TwoAgentMdp, pi1) -> np.ndarray:
    """Follower-facing kernel ``K[s, b, s'] = sum_a pi1(a|s) P(s'|s, a, b)``."""
    pi1 = check_policy(pi1, mdp.n_states, mdp.n_a1, "pi1")
    return np.einsum("sa,sabt->sbt", pi1, mdp.transition)


def joint_kernel(mdp: TwoAgentMdp, pi1, pi2) -> np.ndarray:
    """State-to-state matrix under the joint policy ``(pi1, pi2)``."""
    pi2 = check_policy(pi2, mdp.n_states, mdp.n_a2, "pi2")
    return np.einsum("sb,sbt->st", pi2, marginalize(mdp, pi1))


def evaluate_kernel(P: np.ndarray, reward: np.ndarray, discount: float) -> np.ndarray:
    n = P.shape[0]
    return np.linalg.solve(np.eye(n) - discount * P, reward)


def joint_value(mdp: TwoAgentMdp, pi1, pi2) -> np.ndarray:
    """``V = (I - gamma P_{pi1,pi2})^{-1} r`` by a dense solve."""
    return evaluate_kernel(joint_kernel(mdp, pi1, pi2), mdp.reward, mdp.discount)


def joint_q(mdp: TwoAgentMdp, pi1, pi2) -> np.ndarray:
    """Q(s, a, b) of a joint action followed by ``(pi1, pi2)``."""
    V = joint_value(mdp, pi1, pi2)
    return mdp.reward[:, None, None] + mdp.discount * mdp.transition @ V


def _greedy(Q: np.ndarray, current: np.ndarray | None, tol: float = 1e-12) -> np.ndarray:
    """Lowest-index argmax per row; keeps ``current`` when it is still within tol."""
    best = Q.max(axis=-1, keepdims=True)
    scale = np.maximum(1.0, np.abs(best))
    new = np.argmax(Q >= best - tol * scale, axis=-1)
    if current is not None:
        cur_val = np.take_along_axis(Q, current[..., None], axis=-1)
        keep = (cur_val >= best - tol * scale)[..., 0]
        new = np.where(keep, current, new)
    return new


def single_agent_value_iteration(kernel: np.ndarray, reward: np.ndarray, discount: float,
                                 tol: float = VI_TOL, max_iter: int = VI_MAX_ITER) -> np.ndarray:
    """Optimal Q for a single-agent MDP with kernel ``(S, B, S)``.

    Runs value iteration to ``tol`` in sup norm, then polishes the greedy
    policy with exact evaluations so the result is exact up to solver error.
    """
    V = np.zeros(kernel.shape[0])
    for _ in range(max_iter):
        Q = reward[:, None] + discount * kernel @ V
        V_new = Q.max(axis=1)
        delta = np.max(np.abs(V_new - V))
        V = V_new
        if delta <= tol:
            break
    policy = _greedy(reward[:, None] + discount * kernel @ V, None)
    idx = np.arange(kernel.shape[0])
    for _ in range(100):
        V = evaluate_kernel(kernel[idx, policy], reward, discount)
        Q = reward[:, None] + discount * kernel @ V
        new = _greedy(Q, policy)
        if np.array_equal(new, policy):
            return Q
        policy = new
    return Q


def follower_optimal_q(mdp: TwoAgentMdp, pi1) -> np.ndarray:
    """Q*_{pi1}(s, b): optimal follower values in the marginalized MDP."""
    return single_agent_value_iteration(marginalize(mdp, pi1), mdp.reward, mdp.discount)


def batched_optimal_q(kernels: np.ndarray, reward: np.ndarray, discount: float,
                      max_iter: int = 200) -> np.ndarray:
    """Optimal Q for a stack of single-agent kernels ``(P, S, B, S)`` by policy iteration."""
    n_pol, n_s = kernels.shape[:2]
    eye = np.eye(n_s)
    rows = np.arange(n_s)
    policy = _greedy(reward[None, :, None] + discount * kernels @ reward, None)
    for _ in range(max_iter):
        P_pi = kernels[np.arange(n_pol)[:, None], rows[None, :], policy]
        V = np.linalg.solve(eye - discount * P_pi, np.broadcast_to(reward, (n_pol, n_s))[..., None])[..., 0]
        Q = reward[None, :, None] + discount * np.einsum("psbt,pt->psb", kernels, V)
        new = _greedy(Q, policy)
        if np.array_equal(new, policy):
            return Q
        policy = new
    raise RuntimeError("policy iteration did not converge")


def influence(mdp: TwoAgentMdp, agent: int) -> float:
    """Largest L1 change in the next-state distribution one agent can cause.

    ``agent`` is 1 for the leader (A1) and 2 for the follower (A2).
    """
    if agent == 1:
        P = mdp.transition
    elif agent == 2:
        P = mdp.transition.transpose(0, 2, 1, 3)
    else:
        raise ValueError("agent must be 1 or 2")
    n = P.shape[1]
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            best = max(best, float(np.abs(P[:, i] - P[:, j]).sum(axis=-1).max()))
    return best
