import warnings

import numpy as np
import pytest
from scipy import stats

from bmmfa import adversary as adv
from bmmfa.benchmark import solve_pstar
from bmmfa.core import InputError, RngHandle
from bmmfa.env import sample_round


def test_identity_single_block():
    alpha = adv.BlockAssignment.identity(2, 1)
    inst = adv.make_alpha_adversary(2, 1, 0.25, alpha)
    assert inst.means.tolist() == [[0.75, 0.5], [0.5, 0.75]]


def test_zero_eps_is_flat_and_matches_erased():
    alpha = adv.BlockAssignment.sample(3, 2, RngHandle(1))
    flat = adv.make_alpha_adversary(3, 2, 0.0, alpha)
    assert np.all(flat.means == 0.5)
    assert np.array_equal(flat.means, adv.make_alpha_minus_k(3, 2, 0.0, alpha, 1).means)


@pytest.mark.parametrize("eps", [-0.01, 0.26])
def test_eps_range(eps):
    with pytest.raises(InputError):
        adv.make_alpha_adversary(2, 1, eps, adv.BlockAssignment.identity(2, 1))


def test_invalid_alpha_and_shape():
    with pytest.raises(InputError):
        adv.BlockAssignment(((0, 0),))
    with pytest.raises(InputError):
        adv.make_alpha_adversary(3, 1, 0.1, adv.BlockAssignment.identity(2, 1))


def test_erased_block_examples():
    one = adv.make_alpha_minus_k(2, 1, 0.25, adv.BlockAssignment.identity(2, 1), 0)
    assert np.all(one.means == 0.5)
    alpha = adv.BlockAssignment.identity(2, 2)
    two = adv.make_alpha_minus_k(2, 2, 0.25, alpha, 1)
    assert two.means.tolist() == [[0.75, 0.5, 0.5, 0.5], [0.5, 0.75, 0.5, 0.5]]
    with pytest.raises(InputError):
        adv.make_alpha_minus_k(2, 2, 0.25, alpha, 2)


def test_erased_block_forgets_that_block():
    a = adv.BlockAssignment(((0, 1, 2), (2, 0, 1)))
    b = adv.BlockAssignment(((0, 1, 2), (1, 2, 0)))
    x = adv.make_alpha_minus_k(3, 2, 0.2, a, 1).means
    y = adv.make_alpha_minus_k(3, 2, 0.2, b, 1).means
    assert np.array_equal(x, y)
    assert not np.array_equal(adv.make_alpha_adversary(3, 2, 0.2, a).means,
                              adv.make_alpha_adversary(3, 2, 0.2, b).means)


@pytest.mark.parametrize("T, want", [(1, 0.125), (64, 0.015625), (10_000, 0.00125)])
def test_lb_epsilon(T, want):
    assert abs(adv.lb_epsilon(T) - want) <= 1e-12


def test_lb_epsilon_range():
    with pytest.raises(InputError):
        adv.lb_epsilon(0)
    assert all(adv.lb_epsilon(T) <= 0.125 for T in (1, 2, 100))


@pytest.mark.parametrize("n, b, eps", [(2, 2, 0.1), (3, 4, 0.2), (5, 1, 0.01)])
def test_elevation_pattern_and_benchmark(n, b, eps):
    alpha = adv.BlockAssignment.sample(n, b, RngHandle(n + b))
    mu = adv.make_alpha_adversary(n, b, eps, alpha).means
    lifted = np.isclose(mu, 0.5 + eps)
    assert np.all(np.isclose(mu, 0.5) | lifted)
    blocks = lifted.reshape(n, b, n)  # agent, block, position
    assert np.all(blocks.sum(axis=0) == 1)
    assert np.all(blocks.sum(axis=2) == 1)
    assert abs(solve_pstar(mu).p_star - b * (0.5 + eps)) <= 1e-9


def test_optimal_policy_allocation():
    alpha = adv.BlockAssignment.identity(2, 2)
    assert adv.optimal_policy_allocation(alpha).owner == (0, 1, 0, 1)
    alpha = adv.BlockAssignment.sample(4, 3, RngHandle(9))
    owner = np.array(adv.optimal_policy_allocation(alpha).owner)
    assert np.bincount(owner, minlength=4).tolist() == [3] * 4
    mu = adv.make_alpha_adversary(4, 3, 0.1, alpha).means
    per_agent = np.bincount(owner, mu[owner, np.arange(12)], 4)
    assert np.allclose(per_agent, 3 * 0.6, atol=1e-12)


def test_alpha_sampling_is_uniform():
    n, b, draws = 3, 2, 10_000
    counts = np.zeros((b, n, n))
    gen_handle = RngHandle(31)
    for r in range(draws):
        alpha = adv.BlockAssignment.sample(n, b, RngHandle(gen_handle.seed, r))
        for k, block in enumerate(alpha.alpha):
            for j, i in enumerate(block):
                counts[k, j, i] += 1
    for k in range(b):
        for j in range(n):
            assert stats.chisquare(counts[k, j]).pvalue > 0.01


def test_correct_assignment_counts():
    alpha = adv.BlockAssignment.identity(2, 2)
    T = 5
    opt = np.tile(adv.optimal_policy_allocation(alpha).owner, (T, 1))
    assert adv.correct_assignment_counts(opt, alpha) == [2 * T, 2 * T]
    swapped = np.tile([1, 0, 0, 1], (T, 1))
    assert adv.correct_assignment_counts(swapped, alpha) == [0, 2 * T]


def test_concentration_guard():
    assert adv.opt_concentration_guard(2, 2, 4096)
    with pytest.warns(UserWarning):
        adv.warn_if_unguarded(2, 2, 4096)
    assert adv.opt_concentration_guard(1, 60_000, 4 * 10**9) == []
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        adv.warn_if_unguarded(1, 60_000, 4 * 10**9)


def test_optimal_min_utility_matches_round_loop():
    alpha = adv.BlockAssignment.sample(2, 2, RngHandle(3))
    inst = adv.make_alpha_adversary(2, 2, 0.1, alpha, T=300)
    owner = adv.optimal_policy_allocation(alpha).owner
    totals = np.zeros(2)
    for t in range(1, inst.T + 1):
        v = sample_round(inst, RngHandle(4), t).values
        for e, i in enumerate(owner):
            totals[i] += v[i, e]
    assert adv.optimal_min_utility(inst, alpha, RngHandle(4)) == pytest.approx(totals.min(), abs=1e-9)
