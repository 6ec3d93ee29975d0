import numpy as np
import pytest

from coopirl.environments import RandomMdpSpec, build_random_mdp
from coopirl.interactive_irl import (
    ALG1_COLUMNS,
    algorithm1_rows,
    max_margin_baseline,
    max_margin_regret,
    optimal_reference_value,
    run_algorithm1,
)
from coopirl.mdp_core import deterministic_policy
from coopirl.planners import ResponseModel, lowest_index_response, optimal_joint_policy


def env(seed, n=6):
    mdp = build_random_mdp(RandomMdpSpec(n_states=n, seed=seed))
    return mdp, np.full(n, 1.0 / n)


def test_records_and_rows():
    mdp, D = env(0)
    recs = run_algorithm1(mdp, D, 8, seed=0)
    rows = algorithm1_rows(recs)
    assert [r["episode"] for r in rows] == list(range(1, 9))
    assert all(set(r) == set(ALG1_COLUMNS) for r in rows)
    assert all(r["regret"] >= -1e-9 for r in rows)
    cum = [r["cumulative_regret"] for r in rows]
    assert all(b >= a - 1e-12 for a, b in zip(cum, cum[1:]))
    assert recs[-1].extras["n_constraints"] == 8 * mdp.n_states * mdp.n_a2


def test_deterministic_given_seed():
    mdp, D = env(1)
    a = algorithm1_rows(run_algorithm1(mdp, D, 5, seed=3))
    b = algorithm1_rows(run_algorithm1(mdp, D, 5, seed=3))
    assert a == b


def test_bad_inputs():
    mdp, D = env(2)
    with pytest.raises(ValueError):
        run_algorithm1(mdp, D, 0, seed=0)
    with pytest.raises(ValueError):
        run_algorithm1(mdp, np.ones(6), 3, seed=0)


def test_reference_value_for_optimal_follower():
    mdp, D = env(3)
    assert optimal_reference_value(mdp, D, ResponseModel.optimal()) == pytest.approx(
        D @ optimal_joint_policy(mdp)[2])
    big = build_random_mdp(RandomMdpSpec(n_states=25, seed=0))
    assert optimal_reference_value(big, np.full(25, 0.04), ResponseModel.boltzmann(1.0), cap=10) is None


def test_max_margin_reward_explains_observation():
    mdp, D = env(4)
    pi1 = deterministic_policy([0, 1, 0, 1, 0, 1], 2)
    pi2 = lowest_index_response(mdp, pi1)
    r = max_margin_baseline(mdp, [(pi1, pi2)])
    from coopirl.feasible_set import constraints_for
    assert constraints_for(mdp, pi1, pi2).satisfied(r, 1e-7)
    assert np.abs(r).max() <= 1 + 1e-9
    assert max_margin_regret(mdp, D, seed=0) >= -1e-9
