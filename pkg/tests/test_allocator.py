import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmmfa import matroid as mat
from bmmfa.allocator import (
    Policy,
    PolicyConfig,
    PotentialTracker,
    choose_allocation,
    init_phase_allocation,
    potential,
    resolve_epsilon,
    run_policy,
)
from bmmfa.benchmark import solve_pstar
from bmmfa.core import (
    ConfigurationError,
    InputError,
    Instance,
    PreconditionError,
    RngHandle,
    UtilityLedger,
)
from bmmfa.env import ValueStream, apply_allocation
from bmmfa.estimator import UcbState, default_c_rad, is_clean, update


@pytest.mark.parametrize("schedule, n, T, want", [
    ("log_over_sqrt", 2, 102, math.log(100) / 10),
    ("sqrt_n_log_n", 4, 10_000, math.sqrt(4 * math.log(4) / 10_000)),
    ("log_over_sqrt", 2, 3, 1e-3),
])
def test_resolve_epsilon_examples(schedule, n, T, want):
    assert abs(resolve_epsilon(schedule, n, 1, T) - want) <= 1e-12


def test_resolve_epsilon_reference_numbers():
    assert abs(resolve_epsilon("log_over_sqrt", 2, 1, 102) - 0.4605) < 1e-4
    assert abs(resolve_epsilon("sqrt_n_log_n", 4, 1, 10_000) - 0.02355) < 1e-5
    assert resolve_epsilon("log_over_sqrt", 2, 1, 10) == 0.5
    assert resolve_epsilon("manual", 2, 2, 10, manual=0.3) == 0.3


@pytest.mark.parametrize("schedule, n, T", [
    ("log_over_sqrt", 3, 3),
    ("sqrt_n_log_n", 1, 100),
    ("sqrt_n_log_n", 5, 4),
])
def test_resolve_epsilon_preconditions(schedule, n, T):
    with pytest.raises(ConfigurationError):
        resolve_epsilon(schedule, n, 1, T)


def test_init_phase_allocation():
    assert init_phase_allocation(1, 3, 2).owner == (0, 0)
    assert init_phase_allocation(3, 3, 2).owner == (2, 2)
    with pytest.raises(PreconditionError):
        init_phase_allocation(4, 3, 2)


def state_with_ucbs(ucbs, c_rad=1e-9):
    # huge counts with tiny c_rad make the UCB equal to the empirical mean
    ucbs = np.asarray(ucbs, dtype=float)
    counts = np.full(ucbs.shape, 10**9)
    return UcbState(counts, ucbs * counts, c_rad, clip=False)


@pytest.mark.parametrize("u, want", [((0.0, 0.0), 0), ((2.0, 0.0), 1)])
def test_choose_allocation_examples(u, want):
    led = UtilityLedger(np.zeros(2), np.zeros(2), np.array(u))
    alloc = choose_allocation(state_with_ucbs([[0.9], [0.5]]), led, PolicyConfig(epsilon=0.5))
    assert alloc.owner == (want,)


def test_choose_allocation_ties_go_low():
    led = UtilityLedger.zeros(3)
    alloc = choose_allocation(state_with_ucbs([[0.5, 0.2], [0.5, 0.7], [0.5, 0.7]]), led, PolicyConfig())
    assert alloc.owner == (0, 1)


def test_choose_allocation_needs_samples():
    with pytest.raises(PreconditionError):
        choose_allocation(UcbState.fresh(2, 2, 1.0), UtilityLedger.zeros(2), PolicyConfig())


def random_state(gen, n, m):
    counts = gen.integers(1, 30, size=(n, m))
    sums = gen.random((n, m)) * counts
    return UcbState(counts, sums, float(gen.uniform(0.01, 5)), clip=bool(gen.integers(0, 2)))


def exhaustive_argmax(state, ledger, eps):
    n, m = state.shape
    ucb = state.ucb_matrix()
    disc = (1 - eps) ** (ledger.ucb / m)
    best, best_val = None, -1.0
    for owner in itertools.product(range(n), repeat=m):
        val = sum(disc[i] * ucb[i, e] for e, i in enumerate(owner))
        if val > best_val + 1e-12:
            best, best_val = owner, val
    return best, best_val


def objective(state, ledger, eps, owner):
    m = state.shape[1]
    disc = (1 - eps) ** (ledger.ucb / m)
    return sum(disc[i] * state.ucb_matrix()[i, e] for e, i in enumerate(owner))


def test_choose_allocation_matches_exhaustive_search():
    gen = np.random.default_rng(42)
    for _ in range(1000):
        n, m = int(gen.integers(1, 4)), int(gen.integers(1, 5))
        state = random_state(gen, n, m)
        led = UtilityLedger(np.zeros(n), np.zeros(n), gen.random(n) * 10 * m)
        eps = float(gen.uniform(0.01, 0.5))
        got = choose_allocation(state, led, PolicyConfig(epsilon=eps))
        best, best_val = exhaustive_argmax(state, led, eps)
        assert abs(objective(state, led, eps, got.owner) - best_val) <= 1e-12 * max(1.0, best_val)
        assert got.owner == best


@settings(max_examples=100)
@given(st.integers(0, 10**6), st.floats(0.01, 0.99))
def test_common_scaling_keeps_allocation(seed, c):
    gen = np.random.default_rng(seed)
    n, m = 3, 4
    ucbs = gen.uniform(0.01, 1.0, size=(n, m))
    led = UtilityLedger(np.zeros(n), np.zeros(n), gen.random(n) * 4)
    cfg = PolicyConfig(epsilon=0.2)
    a = choose_allocation(state_with_ucbs(ucbs), led, cfg)
    b = choose_allocation(state_with_ucbs(c * ucbs), led, cfg)
    assert a == b


def test_potential_examples():
    tr = PotentialTracker.start(n=2, m=2, T=3, init_rounds=2, p_star=1.0, epsilon=0.1)
    assert abs(potential(tr, 2) - 1.9) <= 1e-12
    tr = PotentialTracker.start(n=3, m=2, T=10, init_rounds=3, p_star=1.0, epsilon=0.1)
    assert abs(potential(tr, 10) - 3.0) <= 1e-12


def test_potential_formula():
    tr = PotentialTracker(p_star=0.8, epsilon=0.2, T=20, m=3, init_rounds=2,
                          ucb_reward_sums=np.array([4.0, 1.5]))
    want = sum(0.8 ** (s / 3) for s in (4.0, 1.5)) * (1 - 0.2 * 0.8 / 3) ** (20 - 7)
    assert abs(potential(tr, 7) - want) <= 1e-12


def test_potential_guards():
    with pytest.raises(ConfigurationError):
        PotentialTracker.start(2, 1, 10, 2, p_star=2.0, epsilon=0.5)
    tr = PotentialTracker.start(2, 2, 10, 2, p_star=1.0, epsilon=0.1)
    with pytest.raises(InputError):
        tr.log_value(1)
    with pytest.raises(InputError):
        tr.add([3.0, 0.0])


def lemma4_holds(n, m, T, p_star, eps):
    """log of Phi(n) / (1-eps)^((1-eps) W'/m) against log of n exp(-eps^2 W'/(2m))."""
    w_prime = p_star * (T - n)
    tr = PotentialTracker.start(n, m, T, n, p_star, eps)
    lhs = tr.log_value(n) - (1 - eps) * w_prime / m * math.log1p(-eps)
    rhs = math.log(n) - eps ** 2 * w_prime / (2 * m)
    return lhs <= rhs + 1e-12


def test_start_potential_bound_small_grid():
    for eps in (0.05, 0.25, 0.45):
        for T in (10, 100):
            assert lemma4_holds(2, 2, T, 1.0, eps)


def test_point_instance_converges():
    T = 100
    inst = Instance.from_means([[1.0, 0.0], [0.0, 1.0]], T, kind="point")
    run = run_policy(inst, "algorithm1", PolicyConfig(epsilon=0.1), RngHandle(0))
    # A zero-valued cell keeps UCB min(C/N, 1) = 1 until N > C; each agent
    # samples its wrong item every other round, so the last miss is round 2*ceil(C).
    last_miss = 2 * math.ceil(default_c_rad(2, 2, T))
    assert last_miss == 36
    assert all(run.owners[t - 1].tolist() == [0, 1] for t in range(last_miss + 1, T + 1))
    assert run.owners[last_miss - 1].tolist() != [0, 1]
    assert run.ledger.expected.min() >= (T - 2) - last_miss / 2 - 2
    assert run.ledger.expected.tolist() == [82.0, 82.0]


def test_fixed_allocation_two_goods():
    T = 200
    inst = Instance.from_means([[1.0, 0.1], [1.0, 0.1]], T, kind="point")
    run = run_policy(inst, "fixed_allocation:0,1")
    assert abs(run.ledger.expected.min() - 0.1 * T) <= 1e-9


def test_round_robin_symmetric():
    n, m, T = 2, 2, 50
    inst = Instance.from_means(np.full((n, m), 0.5), T)
    run = run_policy(inst, "round_robin", rng=RngHandle(1))
    assert run.ledger.expected.tolist() == [0.5 * m * T / n] * n
    assert not run.ledger.ucb.any()


def reference_run(inst, cfg, rng, p_star):
    """Straightforward per-round loop built from the public pieces."""
    n, m, T = inst.n, inst.m, inst.T
    state = UcbState.fresh(n, m, default_c_rad(n, m, T), cfg.clip_ucb)
    led = UtilityLedger.zeros(n)
    eps = resolve_epsilon(cfg.epsilon_schedule, n, m, T, p_star, cfg.epsilon)
    stream = ValueStream(inst, rng)
    owners, clean, log_phi = [], [], []
    sums = np.zeros(n)

    def log_potential(s):
        terms = (1 - eps) ** (sums / m) * (1 - eps * p_star / m) ** (T - s)
        return math.log(terms.sum())

    log_phi.append(log_potential(n))
    for t in range(1, T + 1):
        alloc = init_phase_allocation(t, n, m) if t <= n else choose_allocation(state, led, cfg, eps)
        values = stream.round(t)
        fb, rewards = apply_allocation(values, alloc)
        xbar = np.zeros(n)
        if t > n:
            ucb = state.ucb_matrix()
            for i, e, _ in fb:
                xbar[i] += ucb[i, e]
            sums += xbar
            log_phi.append(log_potential(t))
        exp = np.zeros(n)
        for e, i in enumerate(alloc.owner):
            exp[i] += inst.means[i, e]
        led.add_round(rewards, exp, xbar)
        update(state, fb)
        clean.append(is_clean(state, inst.means) if t >= n else None)
        owners.append(alloc.owner)
    return owners, led, clean, log_phi


@pytest.mark.parametrize("seed", range(5))
def test_run_policy_matches_reference_loop(seed):
    gen = np.random.default_rng(seed)
    inst = Instance.from_means(gen.random((3, 4)), 120)
    cfg = PolicyConfig(epsilon=0.15, clip_ucb=bool(seed % 2))
    p_star = solve_pstar(inst.means).p_star
    run = run_policy(inst, "algorithm1", cfg, RngHandle(seed), p_star=p_star)
    owners, led, clean, log_phi = reference_run(inst, cfg, RngHandle(seed), p_star)
    assert [tuple(o) for o in run.owners.tolist()] == owners
    assert np.allclose(run.ledger.realized, led.realized, atol=1e-9)
    assert np.allclose(run.ledger.expected, led.expected, atol=1e-9)
    assert np.allclose(run.ledger.ucb, led.ucb, atol=1e-9)
    assert [bool(c) for c in run.clean[inst.n - 1:]] == clean[inst.n - 1:]
    assert np.allclose(run.log_phi, log_phi, atol=1e-9)


def test_run_policy_deterministic():
    inst = Instance.from_means(np.random.default_rng(3).random((2, 3)), 80)
    a = run_policy(inst, "algorithm1", rng=RngHandle(5), p_star=0.5)
    b = run_policy(inst, "algorithm1", rng=RngHandle(5), p_star=0.5)
    for field in ("owners", "realized", "expected", "ucb", "clean", "log_phi"):
        assert np.array_equal(getattr(a, field), getattr(b, field))


def test_environment_shared_across_policies():
    inst = Instance.from_means(np.full((2, 2), 0.5), 40)
    a = run_policy(inst, "round_robin", rng=RngHandle(8))
    b = run_policy(inst, "fixed_allocation:1,0", rng=RngHandle(8))
    # round 2 of round robin is (1, 0): identical realized values
    assert np.array_equal(a.realized[1] - a.realized[0], b.realized[1] - b.realized[0])


def test_ledger_invariants():
    inst = Instance.from_means(np.random.default_rng(2).random((3, 2)), 60)
    run = run_policy(inst, "algorithm1", rng=RngHandle(1))
    for arr in (run.realized, run.expected, run.ucb):
        assert np.all(arr >= 0) and np.all(np.diff(arr, axis=0) >= -1e-12)
    for t in (1, 30, 60):
        run.ledger_at(t).check(inst.m)


def test_horizon_too_short():
    inst = Instance.from_means(np.full((3, 2), 0.5), 2)
    with pytest.raises(ConfigurationError):
        run_policy(inst, "algorithm1")
    inst = Instance.from_means(np.full((2, 2), 0.5), 3)
    with pytest.raises(ConfigurationError):
        run_policy(inst, "algorithm1_matroid", matroid=mat.agent_cap(2, 2, 1))


def test_phi_monotone_on_clean_runs():
    gen = np.random.default_rng(77)
    checked = 0
    for seed in range(200):
        inst = Instance.from_means(gen.random((2, 3)), 60)
        p_star = solve_pstar(inst.means).p_star
        run = run_policy(inst, "algorithm1", PolicyConfig(epsilon=0.2), RngHandle(seed), p_star=p_star)
        if run.all_clean:
            checked += 1
            assert run.phi_monotone()
    assert checked >= 190


def test_matroid_variant_respects_constraints():
    n, m, T = 2, 3, 60
    inst = Instance.from_means(np.random.default_rng(0).random((n, m)), T)
    oracle = mat.agent_cap(n, m, 1)
    p_star = solve_pstar(inst.means, oracle).p_star
    run = run_policy(inst, "algorithm1_matroid", rng=RngHandle(4), p_star=p_star, matroid=oracle)
    assert run.init_rounds == n * m
    for t in range(1, T + 1):
        owner = run.owners[t - 1]
        chosen = {mat.element_id(int(i), e, m) for e, i in enumerate(owner) if i >= 0}
        assert oracle.is_independent(chosen)
    assert run.phi_monotone() or not run.all_clean


def test_matroid_variant_with_free_matroid_matches_algorithm1_after_warmup():
    n, m, T = 2, 2, 40
    inst = Instance.from_means([[0.9, 0.2], [0.3, 0.8]], T, kind="point")
    run = run_policy(inst, "algorithm1_matroid", rng=RngHandle(0), matroid=mat.FreeMatroid(n * m))
    assert run.init_rounds == n * m
    assert np.all(run.owners[n * m:] >= 0)


def test_baselines_run():
    inst = Instance.from_means(np.random.default_rng(5).random((2, 2)), 30)
    for name in ("ucb_greedy_no_discount", "oracle_discounted", "round_robin"):
        assert run_policy(inst, name, rng=RngHandle(0)).owners.shape == (30, 2)
    obs = run_policy(inst, "algorithm1", PolicyConfig(utility_source="observed"), RngHandle(0))
    assert obs.owners.shape == (30, 2)


def test_policy_parsing():
    assert Policy.parse("fixed_allocation:0,1").owner == (0, 1)
    assert Policy.parse({"name": "round_robin"}).label == "round_robin"
    with pytest.raises(ConfigurationError):
        Policy.parse("nope")
    with pytest.raises(ConfigurationError):
        Policy("fixed_allocation")
    with pytest.raises(InputError):
        run_policy(Instance.from_means([[0.5, 0.5]], 3), "fixed_allocation:0,1")
