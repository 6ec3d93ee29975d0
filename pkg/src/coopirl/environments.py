"""Environment builders: Maze-Maker, random MDPs and small counterexample games."""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from .mdp_core import TwoAgentMdp, influence
from .seeding import stream

# direction order shared by doors and moves: (drow, dcol)
DIRECTIONS = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
DIR_NAMES = tuple(DIRECTIONS)
DOOR_PAIRS = tuple(itertools.combinations(range(4), 2))
MIN_TRAJECTORY_LENGTH = 2


@dataclass(frozen=True)
class MazeMakerSpec:
    """Grid maze where the leader unlocks two doors and the follower moves the cart.

    ``reward_cells`` of ``None`` places the rewards on distinct random cells
    drawn from ``seed``.  ``slip_respects_doors`` makes random slips obey the
    locked doors instead of ignoring them; ``all_open`` unlocks every door
    regardless of the leader's action (debugging aid).
    """

    side: int = 7
    reward_cells: tuple | None = None
    reward_values: tuple = (1.0, 2.0, 3.0)
    success_prob: float = 0.8
    discount: float = 0.9
    slip_respects_doors: bool = False
    all_open: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.side < 2:
            raise ValueError("side must be at least 2")
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError("success_prob must lie in [0, 1]")
        if self.reward_cells is not None:
            cells = [tuple(c) for c in self.reward_cells]
            object.__setattr__(self, "reward_cells", tuple(cells))
            if len(cells) != len(self.reward_values):
                raise ValueError("one reward cell per reward value")
            if len(set(cells)) != len(cells):
                raise ValueError("reward cells must be distinct")
            for r, c in cells:
                if not (0 <= r < self.side and 0 <= c < self.side):
                    raise ValueError(f"reward cell {(r, c)} outside the grid")
        object.__setattr__(self, "reward_values", tuple(float(v) for v in self.reward_values))

    @property
    def n_bits(self) -> int:
        return len(self.reward_values)

    @property
    def n_states(self) -> int:
        return self.side * self.side * 2 ** self.n_bits

    def resolved_cells(self) -> tuple:
        if self.reward_cells is not None:
            return self.reward_cells
        rng = stream(self.seed, "environment")
        flat = rng.choice(self.side * self.side, size=self.n_bits, replace=False)
        return tuple((int(i) // self.side, int(i) % self.side) for i in flat)

    def state_index(self, row: int, col: int, bits: int) -> int:
        return (row * self.side + col) * 2 ** self.n_bits + bits

    def decode(self, s: int):
        cell, bits = divmod(s, 2 ** self.n_bits)
        return cell // self.side, cell % self.side, bits


def build_maze_maker(spec: MazeMakerSpec = MazeMakerSpec()) -> TwoAgentMdp:
    """Maze-Maker MDP with states (cell, collected bits).

    The reward of a cell is paid in the state where the cart stands on it with
    its bit unset; every transition out of that state sets the bit, so each
    reward pays at most once and set bits never clear.
    """
    side, nb = spec.side, spec.n_bits
    n_masks = 2 ** nb
    S = spec.n_states
    cells = spec.resolved_cells()
    cell_bit = {cell: k for k, cell in enumerate(cells)}
    slip = (1.0 - spec.success_prob) / 4.0
    P = np.zeros((S, len(DOOR_PAIRS), 4, S))
    reward = np.zeros(S)

    def neighbour(r, c, d):
        dr, dc = DIRECTIONS[DIR_NAMES[d]]
        nr, nc = r + dr, c + dc
        if 0 <= nr < side and 0 <= nc < side:
            return nr, nc
        return r, c

    for r, c, bits in itertools.product(range(side), range(side), range(n_masks)):
        s = spec.state_index(r, c, bits)
        k = cell_bit.get((r, c))
        next_bits = bits
        if k is not None and not bits >> k & 1:
            reward[s] = spec.reward_values[k]
            next_bits = bits | (1 << k)
        for a, doors in enumerate(DOOR_PAIRS):
            open_doors = set(range(4)) if spec.all_open else set(doors)
            for b in range(4):
                row = np.zeros(S)
                if b not in open_doors or neighbour(r, c, b) == (r, c):
                    row[spec.state_index(r, c, next_bits)] = 1.0
                else:
                    tr, tc = neighbour(r, c, b)
                    row[spec.state_index(tr, tc, next_bits)] += spec.success_prob
                    for d in range(4):
                        blocked = spec.slip_respects_doors and d not in open_doors
                        nr, nc = (r, c) if blocked else neighbour(r, c, d)
                        row[spec.state_index(nr, nc, next_bits)] += slip
                P[s, a, b] = row
    return TwoAgentMdp(P, reward, spec.discount)


def maze_start_distribution(spec: MazeMakerSpec) -> np.ndarray:
    """Uniform over cells with no reward collected."""
    D = np.zeros(spec.n_states)
    for r, c in itertools.product(range(spec.side), repeat=2):
        D[spec.state_index(r, c, 0)] = 1.0
    return D / D.sum()


@dataclass(frozen=True)
class RandomMdpSpec:
    n_states: int = 10
    n_a1: int = 2
    n_a2: int = 2
    concentration: float = 1.0
    reward_a: float = 1.0
    reward_b: float = 1.0
    influence_cap_a1: float | None = None
    influence_cap_a2: float | None = None
    discount: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.n_states < 2:
            raise ValueError("n_states must be at least 2")
        if self.n_a1 < 1 or self.n_a2 < 1:
            raise ValueError("each agent needs at least one action")
        if self.concentration <= 0:
            raise ValueError("concentration must be positive")
        for cap in (self.influence_cap_a1, self.influence_cap_a2):
            if cap is not None and cap < 0:
                raise ValueError("influence caps must be nonnegative")


def _cap_influence(P: np.ndarray, axis: int, cap: float | None, agent: int, mdp_args) -> np.ndarray:
    if cap is None:
        return P
    current = influence(TwoAgentMdp(P, *mdp_args), agent)
    if current <= cap:
        return P
    lam = 1.0 - cap / current
    mixed = (1.0 - lam) * P + lam * P.mean(axis=axis, keepdims=True)
    # renormalize against rounding drift
    return mixed / mixed.sum(axis=-1, keepdims=True)


def build_random_mdp(spec: RandomMdpSpec = RandomMdpSpec()) -> TwoAgentMdp:
    rng = stream(spec.seed, "environment")
    S = spec.n_states
    P = rng.dirichlet(np.full(S, spec.concentration), size=(S, spec.n_a1, spec.n_a2))
    reward = rng.beta(spec.reward_a, spec.reward_b, size=S)
    args = (reward, spec.discount)
    P = _cap_influence(P, 1, spec.influence_cap_a1, 1, args)
    P = _cap_influence(P, 2, spec.influence_cap_a2, 2, args)
    return TwoAgentMdp(P, reward, spec.discount)


def _chain_mdp(n_states, n_a1, n_a2, edges, reward, discount):
    """Assemble a deterministic MDP from ``edges[(s, a, b)] = s'``; unspecified moves self-loop."""
    P = np.zeros((n_states, n_a1, n_a2, n_states))
    for s, a, b in itertools.product(range(n_states), range(n_a1), range(n_a2)):
        P[s, a, b, edges.get((s, a, b), s)] = 1.0
    return TwoAgentMdp(P, reward, discount)


def build_theorem3_fixture(x: float, y: float, discount: float = 0.9) -> TwoAgentMdp:
    """Game where no commitment is best in every state against a Boltzmann follower.

    States ``0..5`` are s0, s1, s2, s3, s4 and an absorbing terminal.  At s0
    the follower picks b1 (to s1, worth ``x``) or b2 (to s2).  At s2 the
    leader's a1 leads to s3 (worth ``y``) and a2 to s4 (worth 0).  Rewards
    are divided by the discount raised to their depth so that follower
    Q-values at s0 equal ``x`` and ``y`` exactly.
    """
    if x <= 0 or y <= 0:
        raise ValueError("x and y must be positive")
    T = 5
    edges = {}
    for a, b in itertools.product(range(2), range(2)):
        edges[(0, a, b)] = 1 if b == 0 else 2
        edges[(2, a, b)] = 3 if a == 0 else 4
        for s in (1, 3, 4):
            edges[(s, a, b)] = T
    reward = np.zeros(6)
    reward[1] = x / discount
    reward[3] = y / discount**2
    return _chain_mdp(6, 2, 2, edges, reward, discount)


def build_lemma3_fixture(delta: float, epsilon: float = 0.5, discount: float = 0.9) -> TwoAgentMdp:
    """Game where no commitment is best in every state against an epsilon-greedy follower.

    States ``0..6`` are s0..s5 and an absorbing terminal.  At s0 the follower
    picks b1 (to s1, reward 1) or b2 (to s2).  At s2 under a1 the follower
    picks b1 (to s3, reward 2) or b2 (to s4, a penalty sized so that the
    epsilon-greedy value of s2 is ``delta (1 - epsilon/2)``); under a2 both
    moves reach s5 (reward 0).  Rewards are divided by the discount raised to
    their depth so start-state values are free of discounting.
    """
    if not 0.0 < delta < 2.0:
        raise ValueError("delta must lie in (0, 2)")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    T = 6
    edges = {}
    for a, b in itertools.product(range(2), range(2)):
        edges[(0, a, b)] = 1 if b == 0 else 2
        edges[(2, a, b)] = (3 if b == 0 else 4) if a == 0 else 5
        for s in (1, 3, 4, 5):
            edges[(s, a, b)] = T
    penalty = (2.0 - delta) * (2.0 - epsilon) / epsilon
    reward = np.zeros(7)
    reward[1] = 1.0 / discount
    reward[3] = 2.0 / discount**2
    reward[4] = -penalty / discount**2
    return _chain_mdp(7, 2, 2, edges, reward, discount)


def lemma3_closed_forms(delta: float, epsilon: float) -> dict:
    """Start-state and s2 values of the two s2-commitments under epsilon-greedy play."""
    k = 1.0 - epsilon / 2.0
    return {
        "V_a1_s2": delta * k,
        "V_a1_s0": delta * k**2 + epsilon / 2.0,
        "V_a2_s0": k,
    }


def commit_at(n_states: int, n_a1: int, choices: dict, default: int = 0) -> np.ndarray:
    """Deterministic commitment playing ``default`` except at the states in ``choices``."""
    actions = np.full(n_states, default)
    for s, a in choices.items():
        actions[s] = a
    pi = np.zeros((n_states, n_a1))
    pi[np.arange(n_states), actions] = 1.0
    return pi


def sample_episode_length(rng: np.random.Generator, discount: float,
                          minimum: int = MIN_TRAJECTORY_LENGTH) -> int:
    """Number of steps when the episode ends with probability ``1 - discount`` after each step."""
    return max(minimum, int(rng.geometric(1.0 - discount)))


def rollout(mdp: TwoAgentMdp, pi1, pi2, start, length: int, rng: np.random.Generator):
    """Sample ``length`` steps ``(s, a, b)`` of joint play."""
    steps = []
    s = int(rng.choice(mdp.n_states, p=start))
    for h in range(length):
        a = int(rng.choice(mdp.n_a1, p=pi1[s]))
        b = int(rng.choice(mdp.n_a2, p=pi2[s]))
        steps.append((s, a, b))
        if h + 1 < length:
            s = int(rng.choice(mdp.n_states, p=mdp.transition[s, a, b]))
    return steps


def spec_to_config(spec) -> dict:
    cfg = asdict(spec)
    if isinstance(spec, MazeMakerSpec):
        cfg["kind"] = "maze"
        if cfg["reward_cells"] is not None:
            cfg["reward_cells"] = [list(c) for c in cfg["reward_cells"]]
        cfg["reward_values"] = list(cfg["reward_values"])
    else:
        cfg["kind"] = "random"
    return cfg
