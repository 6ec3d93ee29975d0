"""Posterior sampling of reward and inverse temperature from observed trajectories.

Rewards live on a grid over the simplex with step ``delta``; a state is
stored as integer counts ``k`` with ``r = k * delta``.  Trajectories are
grouped by the commitment they were played under, so one batched
policy-iteration call yields the follower's Q-values for every group.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .environments import rollout, sample_episode_length
from .feasible_set import simplex_normalize
from .interactive_irl import EpisodeRecord, check_start, random_commitment
from .mdp_core import TwoAgentMdp, batched_optimal_q, follower_optimal_q, joint_value, marginalize
from .planners import (
    ENUMERATION_CAP,
    CapacityError,
    ResponseModel,
    avi_boltzmann,
    best_commitment_for_start,
    boltzmann_response,
)
from .seeding import stream

ALG2_COLUMNS = ("episode", "posterior_mean_beta", "reward_L1_error_to_true", "realized_return",
                "regret_if_available")
CHAIN_COLUMNS = ("episode", "samples", "accepted", "acceptance_rate")


@dataclass(frozen=True)
class BayesConfig:
    """Sampler settings.

    ``ratio`` is ``"hastings"`` for the standard Metropolis-Hastings ratio with
    reverse-move densities, or ``"printed"`` for the score
    ``likelihood * priors / (forward proposal densities)`` compared against
    the previous accepted score.
    """

    delta: float | None = None          # default 1 / (10 |S|)
    beta_prior_rate: float = 0.1
    gamma_shape: float = 20.0
    ratio: str = "hastings"
    beta_init: float | None = None      # default: prior mean
    planner_backup: str = "softmax"

    def __post_init__(self):
        if self.ratio not in ("hastings", "printed"):
            raise ValueError("ratio must be 'hastings' or 'printed'")
        if self.beta_prior_rate <= 0 or self.gamma_shape <= 0:
            raise ValueError("prior rate and proposal shape must be positive")

    def grid_steps(self, n_states: int) -> int:
        delta = 1.0 / (10 * n_states) if self.delta is None else self.delta
        steps = round(1.0 / delta)
        if steps < 1 or abs(steps * delta - 1.0) > 1e-9:
            raise ValueError("1 / delta must be a positive integer")
        return steps


@dataclass
class PosteriorState:
    counts: np.ndarray       # integer grid coordinates, sum == steps
    beta: float
    log_score: float
    steps: int

    @property
    def r(self) -> np.ndarray:
        return self.counts / self.steps

    def check(self):
        if self.counts.min() < 0 or self.counts.sum() != self.steps:
            raise AssertionError("chain left the simplex grid")
        if not (self.beta > 0 and math.isfinite(self.log_score)):
            raise AssertionError("invalid chain state")


@dataclass
class ObservationLog:
    """Trajectories grouped by commitment: ``counts[g][s, b]`` tallies follower choices."""

    mdp: TwoAgentMdp
    commitments: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    kernels: list = field(default_factory=list)
    n_trajectories: int = 0

    def add(self, pi1, tau):
        if len(tau) < 2:
            raise ValueError("trajectories need at least two steps")
        pi1 = np.asarray(pi1, dtype=float)
        g = next((i for i, p in enumerate(self.commitments) if np.array_equal(p, pi1)), None)
        if g is None:
            self.commitments.append(pi1)
            self.counts.append(np.zeros((self.mdp.n_states, self.mdp.n_a2)))
            self.kernels.append(marginalize(self.mdp, pi1))
            g = len(self.commitments) - 1
        for s, _, b in tau:
            if not (0 <= s < self.mdp.n_states and 0 <= b < self.mdp.n_a2):
                raise ValueError(f"step {(s, b)} out of range")
            self.counts[g][s, b] += 1
        self.n_trajectories += 1

    def __len__(self):
        return self.n_trajectories


def log_boltzmann(Q: np.ndarray, beta: float) -> np.ndarray:
    z = beta * Q
    return z - logsumexp(z, axis=-1, keepdims=True)


def trajectory_log_likelihood(mdp: TwoAgentMdp, pi1, tau, r, beta: float) -> float:
    """Exact log-probability of the follower's choices along ``tau`` (normalizers included)."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    for s, a, b in tau:
        if not (0 <= s < mdp.n_states and 0 <= a < mdp.n_a1 and 0 <= b < mdp.n_a2):
            raise ValueError(f"step {(s, a, b)} out of range")
    logp = log_boltzmann(follower_optimal_q(mdp.with_reward(r), pi1), beta)
    return float(sum(logp[s, b] for s, _, b in tau))


class LikelihoodCache:
    """Chain-local cache of stacked follower Q-values per reward grid point.

    Q-values depend only on the reward and the set of commitments, so the
    cache is cleared when a new commitment appears; the choice tallies are
    restacked whenever a trajectory is added.
    """

    MAX_ENTRIES = 50000

    def __init__(self, log: ObservationLog):
        self.log = log
        self._store = {}
        self._groups = -1
        self._version = -1
        self._kernels = None
        self._tally = None

    def _sync(self):
        if self._groups != len(self.log.commitments):
            self._store.clear()
            self._groups = len(self.log.commitments)
            self._kernels = np.stack(self.log.kernels)
        if self._version != self.log.n_trajectories:
            self._version = self.log.n_trajectories
            self._tally = np.stack(self.log.counts)

    def q_values(self, counts: np.ndarray) -> np.ndarray:
        self._sync()
        key = counts.tobytes()
        Q = self._store.get(key)
        if Q is None:
            Q = batched_optimal_q(self._kernels, counts / counts.sum(), self.log.mdp.discount)
            if len(self._store) >= self.MAX_ENTRIES:
                self._store.clear()
            self._store[key] = Q
        return Q

    def log_likelihood(self, counts: np.ndarray, beta: float) -> float:
        if not self.log.commitments:
            return 0.0
        Q = self.q_values(counts)
        return float(np.sum(self._tally * log_boltzmann(Q, beta)))


def log_beta_prior(beta: float, rate: float) -> float:
    return math.log(rate) - rate * beta


def log_gamma_proposal(new: float, old: float, shape: float) -> float:
    """Log density of Gamma(shape, scale=old/shape) at ``new``."""
    scale = old / shape
    return (shape - 1) * math.log(new) - new / scale - gammaln(shape) - shape * math.log(scale)


def admissible_pairs(counts: np.ndarray) -> int:
    """Ordered pairs (i, j), i != j, that can move one grid step of mass from i to j."""
    return int(np.count_nonzero(counts)) * (counts.size - 1)


def propose_counts(counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Move one grid step of mass between a uniformly chosen admissible ordered pair."""
    n = counts.size
    while True:                                  # resample pairs with an empty source
        i, j = rng.choice(n, size=2, replace=False)
        if counts[i] > 0:
            break
    new = counts.copy()
    new[i] -= 1
    new[j] += 1
    return new


def log_score(cache: LikelihoodCache, counts, beta, cfg: BayesConfig, log_forward: float) -> float:
    """Unnormalized log posterior (uniform reward prior), minus ``log_forward`` for the printed ratio."""
    base = cache.log_likelihood(counts, beta) + log_beta_prior(beta, cfg.beta_prior_rate)
    return base - log_forward if cfg.ratio == "printed" else base


def initial_state(n_states: int, cfg: BayesConfig, cache: LikelihoodCache) -> PosteriorState:
    steps = cfg.grid_steps(n_states)
    counts = np.full(n_states, steps // n_states)
    counts[: steps - counts.sum()] += 1
    beta = 1.0 / cfg.beta_prior_rate if cfg.beta_init is None else float(cfg.beta_init)
    return PosteriorState(counts, beta, log_score(cache, counts, beta, cfg, 0.0), steps)


def rescore(state: PosteriorState, cache: LikelihoodCache, cfg: BayesConfig) -> PosteriorState:
    """Recompute the score after new observations arrived (the log_forward term is kept at 0)."""
    return replace(state, log_score=log_score(cache, state.counts, state.beta, cfg, 0.0))


def mh_step(state: PosteriorState, cache: LikelihoodCache, cfg: BayesConfig,
            rng: np.random.Generator, fixed_beta: bool = False):
    """One Metropolis-Hastings update; returns ``(new_state, accepted)``."""
    counts_new = propose_counts(state.counts, rng)
    if fixed_beta:
        beta_new = state.beta
        lg_fwd = lg_rev = 0.0
    else:
        beta_new = float(rng.gamma(cfg.gamma_shape, state.beta / cfg.gamma_shape))
        if beta_new <= 0.0:
            return state, False
        lg_fwd = log_gamma_proposal(beta_new, state.beta, cfg.gamma_shape)
        lg_rev = log_gamma_proposal(state.beta, beta_new, cfg.gamma_shape)
    lr_fwd = -math.log(admissible_pairs(state.counts))
    lr_rev = -math.log(admissible_pairs(counts_new))
    if cfg.ratio == "printed":
        score = log_score(cache, counts_new, beta_new, cfg, lr_fwd + lg_fwd)
        log_alpha = score - state.log_score
    else:
        score = log_score(cache, counts_new, beta_new, cfg, 0.0)
        log_alpha = score - state.log_score + (lr_rev + lg_rev) - (lr_fwd + lg_fwd)
    if log_alpha >= 0 or rng.random() < math.exp(log_alpha):
        new = PosteriorState(counts_new, beta_new, score, state.steps)
        new.check()
        return new, True
    return state, False


def run_chain(state: PosteriorState, cache: LikelihoodCache, cfg: BayesConfig, n_samples: int,
              rng: np.random.Generator):
    """``n_samples`` MH steps; returns the visited states' rewards, betas, final state and accept count."""
    rewards = np.empty((n_samples, state.counts.size))
    betas = np.empty(n_samples)
    accepted = 0
    for k in range(n_samples):
        state, ok = mh_step(state, cache, cfg, rng)
        accepted += ok
        rewards[k] = state.r
        betas[k] = state.beta
    return rewards, betas, state, accepted


def reward_l1_error(estimate, truth) -> float:
    return float(np.abs(simplex_normalize(estimate) - simplex_normalize(truth)).sum())


def run_algorithm2(mdp: TwoAgentMdp, start, episodes: int, samples: int, true_beta: float,
                   seed: int, cfg: BayesConfig = BayesConfig(), interactive: bool = True,
                   cap: int = ENUMERATION_CAP):
    """Commit, observe one Boltzmann trajectory, sample the posterior, replan.

    With ``interactive=False`` the first commitment is kept for every episode.
    Returns ``(records, chain_rows)``.
    """
    if episodes < 1 or samples < 0:
        raise ValueError("need episodes >= 1 and samples >= 0")
    start = check_start(start, mdp.n_states)
    env_rng = stream(seed, "follower")
    prop_rng = stream(seed, "proposal")
    leader_rng = stream(seed, "objective")
    model = ResponseModel.boltzmann(true_beta)
    try:
        vstar = best_commitment_for_start(mdp, start, model, cap)[0]
    except CapacityError:
        vstar = None
    skeleton = mdp.with_reward(np.zeros(mdp.n_states))   # the learner never reads the reward
    log = ObservationLog(skeleton)
    cache = LikelihoodCache(log)
    state = initial_state(mdp.n_states, cfg, cache)
    pi1 = random_commitment(mdp, leader_rng)
    records, chain_rows = [], []
    for t in range(1, episodes + 1):
        pi2 = boltzmann_response(mdp, pi1, true_beta)
        realized = float(start @ joint_value(mdp, pi1, pi2))
        tau = rollout(mdp, pi1, pi2, start, sample_episode_length(env_rng, mdp.discount), env_rng)
        log.add(pi1, tau)
        state = rescore(state, cache, cfg)    # carry the last sample over as the first candidate
        if samples:
            rewards, betas, state, accepted = run_chain(state, cache, cfg, samples, prop_rng)
            r_mean, beta_mean = rewards.mean(axis=0), float(betas.mean())
        else:
            accepted = 0
            r_mean, beta_mean = state.r, state.beta
        records.append(EpisodeRecord(
            t, pi1, tau, r_mean, realized, None if vstar is None else vstar - realized,
            {"posterior_mean_beta": beta_mean,
             "reward_L1_error_to_true": reward_l1_error(r_mean, mdp.reward)},
        ))
        chain_rows.append({"episode": t, "samples": samples, "accepted": accepted,
                           "acceptance_rate": accepted / samples if samples else 0.0})
        if interactive:
            pi1 = avi_boltzmann(skeleton.with_reward(r_mean), beta_mean, cfg.planner_backup).pi1
    return records, chain_rows


def algorithm2_rows(records) -> list[dict]:
    return [{
        "episode": rec.index,
        "posterior_mean_beta": rec.extras["posterior_mean_beta"],
        "reward_L1_error_to_true": rec.extras["reward_L1_error_to_true"],
        "realized_return": rec.realized_value,
        "regret_if_available": "" if rec.regret is None else rec.regret,
    } for rec in records]
