from fractions import Fraction

import numpy as np
import pytest

from oracles import brute_force_value
from symintel.framework import (
    FunctionAgent,
    FunctionEnvironment,
    MeasureNotNormalized,
    Permutation,
    RandomTableAgent,
    RandomTableEnvironment,
    dual_agent,
    dual_environment,
    dual_history,
    permute_agent,
    permute_environment,
    point_mass,
    quiescent,
    rounds,
    uniform_measure,
)
from symintel.spaces import default_space, make_space
from symintel.valuation import (
    BudgetExceeded,
    HorizonTooLarge,
    NotQuiescent,
    certification_outcome,
    certify_well_behaved,
    rollout,
    value_dual_identity_check,
    value_exact,
)
from symintel.verify import check_permutation_values

SP = default_space()
HALF = Fraction(1, 2)
ZERO = Fraction(0)


def tables(pi, mu, n):
    """Dense per-prefix probability arrays for the vectorised Monte Carlo oracle."""
    sp = mu.space
    env, agent = {}, {}

    def visit(s, k):
        env[s] = np.array([float(mu.measure(s).get(x, 0)) for x in sp.outcomes])
        for x in sp.outcomes:
            t = s + x
            agent[t] = np.array([float(pi.measure(t).get(a, 0)) for a in sp.actions])
            if k < n:
                for a in sp.actions:
                    visit(t + (a,), k + 1)

    visit((), 0)
    return env, agent


def monte_carlo(pi, mu, n, samples, seed):
    sp = mu.space
    env, agent = tables(pi, mu, n)
    rng = np.random.default_rng(seed)
    rewards = np.array([float(r) for _, r in sp.outcomes])
    keys = [()] * samples
    totals = np.zeros(samples)
    for _ in range(n + 1):
        groups = {}
        for i, s in enumerate(keys):
            groups.setdefault(s, []).append(i)
        new_keys = list(keys)
        for s, idx in groups.items():
            idx = np.array(idx)
            xs = rng.choice(len(sp.outcomes), size=len(idx), p=env[s])
            totals[idx] += rewards[xs]
            for x in np.unique(xs):
                sel = idx[xs == x]
                t = s + sp.outcomes[x]
                acts = rng.choice(len(sp.actions), size=len(sel), p=agent[t])
                for j, a in zip(sel, acts):
                    new_keys[j] = t + (sp.actions[a],)
        keys = new_keys
    return totals.mean(), totals.std(ddof=1) / np.sqrt(samples)


def const_env(m):
    return FunctionEnvironment(SP, lambda s: m)


def test_zero_reward_environment_has_value_zero():
    mu = const_env({("o0", ZERO): Fraction(1, 3), ("o1", ZERO): Fraction(2, 3)})
    for n in range(4):
        assert value_exact(RandomTableAgent(SP, n), mu, n).value == 0
    assert value_dual_identity_check(RandomTableAgent(SP, 0), mu, 2)[1].value == 0


def test_single_reward_at_step_zero():
    mu = FunctionEnvironment(SP, lambda s: point_mass(("o0", HALF if not s else ZERO)))
    for seed in range(3):
        assert value_exact(RandomTableAgent(SP, seed), mu, 1).value == HALF


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("n", [0, 1, 2])
def test_matches_brute_force(seed, n):
    pi, mu = RandomTableAgent(SP, seed), RandomTableEnvironment(SP, seed, quiet=0.3)
    assert value_exact(pi, mu, n).value == brute_force_value(pi, mu, n)


def test_histories_enumerated_counts_positive_sequences():
    pi = FunctionAgent(SP, lambda s: uniform_measure(SP.actions))
    mu = const_env(uniform_measure(SP.outcomes))
    assert value_exact(pi, mu, 1).histories_enumerated == 12**2
    pi0 = FunctionAgent(SP, lambda s: point_mass("a0"))
    assert value_exact(pi0, mu, 1).histories_enumerated == 6**2


def test_matches_monte_carlo_oracle():
    space = make_space(["a0", "a1"], ["o0"], ["-1/2", "0", "1/2"])
    pi, mu = RandomTableAgent(space, 7), RandomTableEnvironment(space, 7)
    exact = value_exact(pi, mu, 2).value
    mean, se = monte_carlo(pi, mu, 2, 10**6, seed=2024)
    assert abs(mean - float(exact)) <= 3 * se


def test_rollout_mean_matches_value():
    pi, mu = RandomTableAgent(SP, 4), RandomTableEnvironment(SP, 4)
    totals = np.array([float(rollout(pi, mu, 2, seed).total) for seed in range(20000)])
    se = totals.std(ddof=1) / np.sqrt(len(totals))
    assert abs(totals.mean() - float(value_exact(pi, mu, 2).value)) <= 3 * se


def test_rollout_is_seed_deterministic():
    pi, mu = RandomTableAgent(SP, 1), RandomTableEnvironment(SP, 1)
    assert rollout(pi, mu, 3, 99) == rollout(pi, mu, 3, 99)
    det_pi = FunctionAgent(SP, lambda s: point_mass("a1"))
    det_mu = FunctionEnvironment(SP, lambda s: point_mass(("o1", HALF if rounds(s) % 2 else -HALF)))
    assert rollout(det_pi, det_mu, 3, 1) == rollout(det_pi, det_mu, 3, 2)


@pytest.mark.parametrize("seed", range(20))
def test_dual_coupled_rollout_negates_trajectory(seed):
    pi, mu = RandomTableAgent(SP, seed), RandomTableEnvironment(SP, seed)
    a = rollout(pi, mu, 3, seed)
    b = rollout(dual_agent(pi), dual_environment(mu), 3, seed, flip_rewards=True)
    assert b.history == dual_history(a.history)
    assert b.total == -a.total


@pytest.mark.parametrize("seed", range(10))
def test_dual_identity_and_twist(seed):
    pi, mu = RandomTableAgent(SP, seed), RandomTableEnvironment(SP, seed)
    for n in range(3):
        v, w = value_dual_identity_check(pi, mu, n)
        assert w.value == -v.value
        assert value_exact(pi, dual_environment(mu), n).value == -value_exact(dual_agent(pi), mu, n).value


def test_horizon_budget():
    pi, mu = RandomTableAgent(SP, 0), RandomTableEnvironment(SP, 0)
    with pytest.raises(HorizonTooLarge):
        value_exact(pi, mu, 3, max_histories=1000)
    with pytest.raises(ValueError):
        value_exact(pi, mu, -1)


def test_defective_measure_aborts():
    bad = const_env({("o0", ZERO): HALF})
    with pytest.raises(MeasureNotNormalized):
        value_exact(RandomTableAgent(SP, 0), bad, 0)


def paying(steps):
    def fn(s):
        return point_mass(("o0", HALF if rounds(s) in steps else ZERO))

    return FunctionEnvironment(SP, fn)


def test_certify_zero_reward():
    mu = quiescent(const_env(point_mass(("o0", ZERO))), 3)
    cert = certify_well_behaved(mu, 3)
    assert cert.budget == 0 and cert.quiescent


def test_certify_two_halves():
    cert = certify_well_behaved(quiescent(paying({0, 1}), 1), 1)
    assert cert.budget == 1 and cert.horizon == 1


def test_refuse_three_halves_with_witness():
    with pytest.raises(BudgetExceeded) as info:
        certify_well_behaved(quiescent(paying({0, 1, 2}), 2), 2)
    assert info.value.budget == Fraction(3, 2)
    assert rounds(info.value.witness) == 3


def test_refuse_undeclared_or_noisy_tail():
    with pytest.raises(NotQuiescent):
        certify_well_behaved(paying({0}), 1)
    mu = paying({0, 2})
    mu.quiescent_after = 1
    with pytest.raises(NotQuiescent) as info:
        certify_well_behaved(mu, 1)
    assert rounds(info.value.witness) == 2


def test_alternating_rewards_are_refused():
    def fn(s):
        return point_mass(("o0", HALF if rounds(s) % 2 == 0 else -HALF))

    mu = quiescent(FunctionEnvironment(SP, fn), 3)
    assert certification_outcome(mu, 3) == ("BudgetExceeded", Fraction(2))


@pytest.mark.parametrize("seed", range(12))
def test_certificate_duality(seed):
    mu = RandomTableEnvironment(SP, seed, quiet=0.9)
    for cand in (mu, quiescent(mu, 2)):
        assert certification_outcome(cand, 2) == certification_outcome(dual_environment(cand), 2)


def test_permutation_identities_on_three_actions():
    space = make_space(["a0", "a1", "a2"], ["o0"], ["-1/2", "0", "1/2"])
    fixtures = [(RandomTableAgent(space, k, 2), RandomTableEnvironment(space, k, 2)) for k in range(4)]
    res = check_permutation_values(fixtures, range(3))
    assert res.passed and res.checked == 4 * 3 * 5 * 2
    # with a 3-cycle the inverse must sit on the environment side of the conjugation
    P = Permutation.from_images(space.actions, ["a1", "a2", "a0"])
    pi, mu = fixtures[0]
    v = value_exact(pi, mu, 2).value
    assert v != value_exact(permute_agent(P, pi), permute_environment(P.inverse(), mu), 2).value
    assert v == value_exact(permute_agent(P, pi), permute_environment(P, mu), 2).value
