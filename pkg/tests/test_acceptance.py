"""Acceptance checks, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL ...`` line (visible with ``-s``)
and asserts at the stated tolerance.
"""
import time

import numpy as np
import pytest

from coopirl.bayesian_irl import run_algorithm2, trajectory_log_likelihood
from coopirl.environments import (
    MazeMakerSpec,
    RandomMdpSpec,
    build_lemma3_fixture,
    build_maze_maker,
    build_random_mdp,
    build_theorem3_fixture,
    commit_at,
    maze_start_distribution,
)
from coopirl.feasible_set import build_ideal_environment, constraints_for, random_off_plane
from coopirl.interactive_irl import algorithm1_rows, run_algorithm1
from coopirl.lp_solver import LpProblem, solve
from coopirl.mdp_core import deterministic_policy, follower_optimal_q
from coopirl.planners import (
    ResponseModel,
    argmax_set,
    avi_boltzmann,
    avi_eps_greedy,
    commitment_value,
    dominating_policy_check,
    lowest_index_response,
    optimal_joint_policy,
)
from lp_oracle import brute_force


def report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def random_instance(rng, seed):
    return build_random_mdp(RandomMdpSpec(
        n_states=int(rng.integers(2, 9)), n_a1=int(rng.integers(1, 4)),
        n_a2=int(rng.integers(2, 4)), seed=seed))


def random_commitment(mdp, rng):
    return deterministic_policy(rng.integers(mdp.n_a1, size=mdp.n_states), mdp.n_a1)


def test_criterion_01_feasibility_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst, caught = np.inf, 0
    for seed in range(50):
        mdp = random_instance(rng, 1000 + seed)
        pi1 = random_commitment(mdp, rng)
        pi2 = lowest_index_response(mdp, pi1)
        cs = constraints_for(mdp, pi1, pi2)
        worst = min(worst, cs.slack(mdp.reward).min())
        observed = np.argmax(pi2, axis=1)
        for _ in range(200):
            r = rng.normal(size=mdp.n_states)
            Q = follower_optimal_q(mdp.with_reward(r), pi1)
            gap = Q.max(axis=1) - Q[np.arange(mdp.n_states), observed]
            if gap.max() > 1e-4:          # observed response suboptimal somewhere under r
                caught += cs.slack(r).min() < -1e-6
                break
    elapsed = time.perf_counter() - t0
    ok = worst >= -1e-9 and caught >= 45 and elapsed < 30
    assert report(1, ok, f"min true slack {worst:.2e}, caught {caught}/50, {elapsed:.1f}s")


def test_criterion_02_affine_indistinguishability():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    mismatches = 0
    for seed in range(20):
        mdp = build_random_mdp(RandomMdpSpec(n_states=int(rng.integers(3, 9)), n_a2=3, seed=2000 + seed))
        pi1 = random_commitment(mdp, rng)
        base = argmax_set(follower_optimal_q(mdp, pi1), 1e-9)
        for lam1 in (0.5, 2.0):
            for lam2 in (-1.0, 0.0, 1.0):
                mapped = mdp.with_reward(lam1 * mdp.reward + lam2)
                mismatches += not np.array_equal(base, argmax_set(follower_optimal_q(mapped, pi1), 1e-9))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    assert report(2, ok, f"{mismatches} argmax-set mismatches over 120 maps, {elapsed:.1f}s")


def test_criterion_03_ideal_environment():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    failures = []
    for N in range(3, 11):
        for _ in range(10):
            r = rng.dirichlet(np.ones(N))
            env = build_ideal_environment(r, 0.9)
            phi, K1, K2 = env.phi, env.kernel_b1, env.kernel_b2
            identity = (K1 - K2) @ np.linalg.inv(np.eye(N) - 0.9 * K1)
            mdp = env.as_mdp()
            pi1 = np.ones((N, 1))
            cs = constraints_for(mdp, pi1, lowest_index_response(mdp, pi1))
            probes = sum(cs.slack(random_off_plane(r, rng)).min() < -1e-9 for _ in range(20))
            checks = {
                "row sums": np.max(np.abs(phi.sum(axis=1))) <= 1e-9,
                "entry range": phi.min() >= 1 / N - 1 - 1e-12 and phi.max() <= 1 / N + 1e-12,
                "stochastic": K2.min() >= 0 and np.max(np.abs(K2.sum(axis=1) - 1)) <= 1e-12,
                "identity": np.max(np.abs(identity - phi)) <= 1e-9,
                "feasible": cs.satisfied(r, 1e-9),
                "probes": probes == 20,
            }
            failures += [(N, k) for k, v in checks.items() if not v]
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 20
    assert report(3, ok, f"{len(failures)} failed checks {failures[:3]}, {elapsed:.1f}s")


def test_criterion_04_leader_part_of_joint_optimum():
    rng = np.random.default_rng(404)
    worst = 0.0
    for seed in range(50):
        mdp = random_instance(rng, 4000 + seed)
        pi1, _, V = optimal_joint_policy(mdp)
        worst = max(worst, np.max(np.abs(commitment_value(mdp, pi1, ResponseModel.optimal()) - V)))
    assert report(4, worst <= 1e-8, f"max |V_commit - V_joint| {worst:.2e}")


def test_criterion_05_algorithm1_regret():
    """Asserted reading: regret reaches <= 1e-6 at some episode <= 50 on >= 90% of seeds."""
    t0 = time.perf_counter()
    reached, final, monotone = 0, 0, True
    for seed in range(20):
        mdp = build_random_mdp(RandomMdpSpec(n_states=10, n_a1=2, n_a2=2, seed=seed))
        rows = algorithm1_rows(run_algorithm1(mdp, np.full(10, 0.1), 50, seed))
        regret = np.array([r["regret"] for r in rows])
        cum = np.array([r["cumulative_regret"] for r in rows])
        reached += bool(np.any(regret <= 1e-6))
        final += bool(regret[-1] <= 1e-6)
        monotone &= bool(np.all(np.diff(cum) >= -1e-12))
    elapsed = time.perf_counter() - t0
    ok = reached >= 18 and monotone and elapsed < 300
    assert report(5, ok, f"reached {reached}/20 (at episode 50: {final}/20), "
                         f"cumulative monotone {monotone}, {elapsed:.1f}s")


def test_criterion_06_counterexamples():
    t0 = time.perf_counter()
    # y=1, beta=1: the conflict needs sigma(x,0) x > sigma(x,1) x + sigma(1,x), true for x >= 2
    boltz = [dominating_policy_check(build_theorem3_fixture(x, 1.0), ResponseModel.boltzmann(1.0)) is None
             for x in (2.0, 2.5, 3.0, 4.0, 6.0)]
    boltz_opt = [dominating_policy_check(build_theorem3_fixture(x, 1.0), ResponseModel.optimal()) is not None
                 for x in (2.0, 2.5, 3.0, 4.0, 6.0)]
    lemma = build_lemma3_fixture(0.1, 0.5)
    eps_none = dominating_policy_check(lemma, ResponseModel.eps_greedy(0.5)) is None
    eps_opt = dominating_policy_check(lemma, ResponseModel.optimal()) is not None
    model = ResponseModel.eps_greedy(0.5)
    v_a1 = float(commitment_value(lemma, commit_at(7, 2, {2: 0}), model)[0])
    v_a2 = float(commitment_value(lemma, commit_at(7, 2, {2: 1}), model)[0])
    values_ok = abs(v_a1 - 0.30625) <= 1e-12 and abs(v_a2 - 0.75) <= 1e-12
    elapsed = time.perf_counter() - t0
    ok = all(boltz) and all(boltz_opt) and eps_none and eps_opt and values_ok and elapsed < 5
    assert report(6, ok, f"boltzmann none {boltz}, eps none {eps_none}, optimal found "
                         f"{all(boltz_opt) and eps_opt}, V_a1 {v_a1!r} V_a2 {v_a2!r}, {elapsed:.1f}s")


def test_criterion_07_approximate_planners():
    t0 = time.perf_counter()
    spec = MazeMakerSpec(side=4, seed=0)
    mdp = build_maze_maker(spec)
    D = maze_start_distribution(spec)
    joint_pi1 = optimal_joint_policy(mdp)[0]

    def gaps(models, planner):
        out = []
        for param, model in models:
            avi = D @ commitment_value(mdp, planner(param).pi1, model)
            base = D @ commitment_value(mdp, joint_pi1, model)
            out.append(avi - base)
        return np.array(out)

    betas = (2.0, 5.0, 10.0, 20.0)
    g_b = gaps([(b, ResponseModel.boltzmann(b)) for b in betas], lambda b: avi_boltzmann(mdp, b))
    eps = (0.0, 0.1, 0.3, 0.5)
    g_e = gaps([(e, ResponseModel.eps_greedy(e)) for e in eps], lambda e: avi_eps_greedy(mdp, e))
    elapsed = time.perf_counter() - t0
    ok = (np.all(g_b >= -1e-6) and g_b[-1] <= g_b[0]
          and np.all(g_e >= -1e-6) and abs(g_e[0]) <= 1e-8 and g_e[1] <= g_e[-1]
          and elapsed < 120)
    assert report(7, ok, f"boltzmann gaps {np.round(g_b, 4)}, eps gaps {np.round(g_e, 4)}, {elapsed:.1f}s")


def test_criterion_08_bayesian_pipeline():
    t0 = time.perf_counter()
    # likelihood oracle: all length-3 trajectories of a 2-state MDP
    import itertools
    import math
    small = build_random_mdp(RandomMdpSpec(n_states=2, seed=8))
    pi1 = np.array([[0.5, 0.5], [0.2, 0.8]])
    D2 = np.array([0.5, 0.5])
    total = 0.0
    for seq in itertools.product(itertools.product(range(2), repeat=3), repeat=3):
        p = D2[seq[0][0]]
        for h, (s, a, b) in enumerate(seq):
            p *= pi1[s, a]
            if h < 2:
                p *= small.transition[s, a, b, seq[h + 1][0]]
        total += p * math.exp(trajectory_log_likelihood(small, pi1, list(seq), small.reward, 10.0))
    improved, err_int, err_frozen = 0, [], []
    for seed in range(10):
        mdp = build_random_mdp(RandomMdpSpec(n_states=5, seed=seed))
        D = np.full(5, 0.2)
        recs, _ = run_algorithm2(mdp, D, 30, 2000, 10.0, seed)
        regret = np.array([r.regret for r in recs])
        improved += regret[20:].mean() < regret[:10].mean()
        frozen, _ = run_algorithm2(mdp, D, 30, 2000, 10.0, seed, interactive=False)
        err_int.append(recs[-1].extras["reward_L1_error_to_true"])
        err_frozen.append(frozen[-1].extras["reward_L1_error_to_true"])
    elapsed = time.perf_counter() - t0
    ok = (abs(total - 1) <= 1e-10 and improved >= 8
          and np.mean(err_int) <= np.mean(err_frozen) and elapsed < 600)
    assert report(8, ok, f"likelihood sum {float(total)!r}, regret improved {improved}/10, "
                         f"L1 interactive {np.mean(err_int):.3f} vs frozen {np.mean(err_frozen):.3f}, "
                         f"{elapsed:.1f}s")


def test_criterion_09_lp_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(909)
    mismatches = 0
    for _ in range(100):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 11))
        A = rng.integers(-3, 4, size=(m, n)).astype(float)
        b = rng.integers(-4, 3, size=m).astype(float)
        c = rng.normal(size=n).round(2)
        status, value = brute_force(c, A, b, None, None)
        sol = solve(LpProblem(c, A, b))
        mismatches += sol.status.value != status or (
            status == "optimal" and abs(sol.objective_value - value) > 1e-7)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    assert report(9, ok, f"{mismatches}/100 mismatches, {elapsed:.1f}s")


def test_criterion_10_maze_structure():
    spec = MazeMakerSpec(seed=0)
    mdp = build_maze_maker(spec)
    shape_ok = (mdp.n_states, mdp.n_a1, mdp.n_a2) == (392, 6, 4)
    row_err = float(np.max(np.abs(mdp.transition.sum(axis=-1) - 1)))
    rng = np.random.default_rng(1010)
    cells = spec.resolved_cells()
    violations = 0
    for _ in range(10_000):
        s, a, b = int(rng.integers(392)), int(rng.integers(6)), int(rng.integers(4))
        t = int(rng.choice(392, p=mdp.transition[s, a, b]))
        r0, c0, bits = spec.decode(s)
        _, _, nbits = spec.decode(t)
        k = cells.index((r0, c0)) if (r0, c0) in cells else None
        expect = bits | (1 << k) if k is not None else bits
        violations += nbits != expect
        # a collected cell never pays again
        for j, cell in enumerate(cells):
            if nbits >> j & 1 and spec.decode(t)[:2] == cell:
                violations += mdp.reward[t] != 0.0
    ok = shape_ok and row_err <= 1e-12 and violations == 0
    assert report(10, ok, f"shape ok {shape_ok}, row error {row_err:.1e}, {violations} bit violations")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
