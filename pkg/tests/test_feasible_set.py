import numpy as np
import pytest

from coopirl.environments import RandomMdpSpec, build_random_mdp
from coopirl.feasible_set import (
    ConstraintSet,
    DegenerateRegionError,
    accumulate,
    build_ideal_environment,
    constraints_for,
    distance_to_affine_span,
    random_off_plane,
    sample_feasible_vertex,
    simplex_normalize,
    verify_affine_of_true,
)
from coopirl.mdp_core import deterministic_policy
from coopirl.planners import lowest_index_response, optimal_response


def observation(seed):
    mdp = build_random_mdp(RandomMdpSpec(n_states=5, n_a1=2, n_a2=3, seed=seed))
    pi1 = deterministic_policy(np.random.default_rng(seed).integers(2, size=5), 2)
    return mdp, pi1, lowest_index_response(mdp, pi1)


@pytest.mark.parametrize("seed", range(5))
def test_true_reward_is_feasible(seed):
    mdp, pi1, pi2 = observation(seed)
    cs = constraints_for(mdp, pi1, pi2)
    assert cs.rows.shape == (15, 5)
    assert cs.satisfied(mdp.reward, 1e-9)


def test_rows_match_value_differences():
    mdp, pi1, pi2 = observation(11)
    cs = constraints_for(mdp, pi1, pi2)
    from coopirl.mdp_core import joint_value, marginalize
    V = joint_value(mdp, pi1, pi2)
    K = marginalize(mdp, pi1)
    for b in range(3):
        gap = ((pi2[:, :, None] * K).sum(1) - K[:, b]) @ V     # one-step deviation to b
        np.testing.assert_allclose(cs.rows[b * 5:(b + 1) * 5] @ mdp.reward, gap, atol=1e-9)


def test_stochastic_response_rejected():
    mdp, pi1, _ = observation(0)
    with pytest.raises(ValueError):
        constraints_for(mdp, pi1, np.full((5, 3), 1 / 3))


def test_text_round_trip():
    mdp, pi1, pi2 = observation(2)
    cs = accumulate(ConstraintSet.empty(5), constraints_for(mdp, pi1, pi2, episode=1))
    back = ConstraintSet.from_text(cs.to_text())
    assert np.array_equal(back.rows, cs.rows)
    assert len(back.provenance) == 3


def test_sampled_vertex_feasible_and_nonconstant():
    mdp, pi1, pi2 = observation(3)
    cs = constraints_for(mdp, pi1, pi2)
    r, draws = sample_feasible_vertex(cs, np.random.default_rng(0), return_draws=True)
    assert draws >= 1
    assert cs.satisfied(r, 1e-8) and abs(r.sum() - 1) < 1e-9 and r.min() >= -1e-12
    assert np.ptp(r) > 1e-9


def test_degenerate_region_raises():
    n = 3
    # only the constant reward survives r_i - r_j >= 0 for all ordered pairs
    rows = [np.eye(n)[i] - np.eye(n)[j] for i in range(n) for j in range(n) if i != j]
    with pytest.raises(DegenerateRegionError):
        sample_feasible_vertex(ConstraintSet(np.array(rows)), np.random.default_rng(0))


def test_simplex_normalize_and_distance():
    r = np.array([3.0, 1.0, 2.0])
    assert distance_to_affine_span(5 * r - 7, r) < 1e-12
    assert distance_to_affine_span(-r, r) > 0.1
    np.testing.assert_allclose(simplex_normalize(np.ones(3)), 1 / 3)


@pytest.mark.parametrize("N", [2, 3, 6])
def test_ideal_environment_properties(N):
    rng = np.random.default_rng(N)
    r = rng.dirichlet(np.ones(N))
    env = build_ideal_environment(r, 0.9)
    K1, K2 = env.kernel_b1, env.kernel_b2
    np.testing.assert_allclose(env.phi.sum(1), 0, atol=1e-12)
    np.testing.assert_allclose((K1 - K2) @ np.linalg.inv(np.eye(N) - 0.9 * K1), env.phi, atol=1e-9)
    oracle = lambda m, p: lowest_index_response(m.with_reward(r), p)  # noqa: E731
    assert verify_affine_of_true(r, 0.9, oracle)
    assert verify_affine_of_true(3 * r - 1, 0.9, oracle)
    if N > 2:
        assert not verify_affine_of_true(random_off_plane(r, rng), 0.9, oracle)


def test_constant_target_needs_flag():
    with pytest.raises(ValueError):
        build_ideal_environment(np.ones(4), 0.9)
    env = build_ideal_environment(np.ones(4), 0.9, allow_constant=True)
    assert np.all(env.kernel_b2 >= 0)


def test_verify_rejects_stochastic_oracle():
    with pytest.raises(ValueError):
        verify_affine_of_true(np.array([0.2, 0.3, 0.5]), 0.9, lambda m, p: np.full((3, 2), 0.5))


def test_optimal_response_rng_stays_feasible():
    mdp, pi1, _ = observation(4)
    pi2 = optimal_response(mdp, pi1, rng=np.random.default_rng(0))
    assert constraints_for(mdp, pi1, pi2).satisfied(mdp.reward, 1e-9)
