import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from winmp.markov import MarkovChain, invariant_distribution, simulate, strongly_connected_components, tarjan_bsccs


def cycle(n):
    m = np.zeros((n, n))
    m[np.arange(n), (np.arange(n) + 1) % n] = 1.0
    return MarkovChain.from_matrix(m)


def test_cycle_is_one_bscc_with_uniform_distribution():
    bsccs = tarjan_bsccs(cycle(8))
    assert len(bsccs) == 1 and bsccs[0].size == 8
    np.testing.assert_allclose(invariant_distribution(bsccs[0]), 1 / 8)


def test_two_absorbing_bsccs():
    # a -> b, a -> c, b -> b, c -> c
    chain = MarkovChain.from_matrix([[0, 0.5, 0.5], [0, 1, 0], [0, 0, 1]])
    assert [list(b.states) for b in tarjan_bsccs(chain)] == [[1], [2]]


def test_two_cycle_and_three_cycle_distributions():
    np.testing.assert_allclose(invariant_distribution(tarjan_bsccs(cycle(2))[0]), [0.5, 0.5])
    np.testing.assert_allclose(invariant_distribution(tarjan_bsccs(cycle(3))[0]), [1 / 3] * 3)


def test_hand_solved_two_state_chain():
    b = tarjan_bsccs(MarkovChain.from_matrix([[0.73, 0.27], [1.0, 0.0]]))[0]
    np.testing.assert_allclose(invariant_distribution(b), [1 / 1.27, 0.27 / 1.27], atol=1e-12)


def test_zero_probability_entries_ignored():
    chain = MarkovChain(2, [0, 0, 1], [0, 1, 1], [1.0, 0.0, 1.0], np.zeros((2, 1)), [1.0, 0.0])
    assert [list(b.states) for b in tarjan_bsccs(chain)] == [[0], [1]]


def random_stochastic(seed, n, density=0.5):
    rng = np.random.default_rng(seed)
    m = rng.random((n, n)) * (rng.random((n, n)) < density)
    m[np.arange(n), rng.integers(n, size=n)] += 0.1
    return m / m.sum(axis=1, keepdims=True)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 10))
def test_bsccs_partition_and_are_closed(seed, n):
    m = random_stochastic(seed, n, 0.25)
    chain = MarkovChain.from_matrix(m)
    bsccs = tarjan_bsccs(chain)
    seen = np.concatenate([b.states for b in bsccs])
    assert len(seen) == len(set(seen.tolist()))
    for b in bsccs:
        inside = np.zeros(n, bool)
        inside[b.states] = True
        assert np.all(m[b.states][:, ~inside] == 0)  # closed
        np.testing.assert_allclose(b.matrix().sum(axis=1), 1.0)
        x = invariant_distribution(b)
        assert x.min() >= -1e-12 and abs(x.sum() - 1) < 1e-10
        assert np.abs(x @ b.matrix() - x).max() <= 1e-10
    # every state reaches a BSCC
    reach = np.eye(n, dtype=bool) | (m > 0)
    for _ in range(n):
        reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
    assert all(reach[s, seen].any() for s in range(n))


def test_scc_on_graph_with_nested_cycles():
    comps = strongly_connected_components(5, np.array([0, 1, 2, 2, 3, 4]), np.array([1, 2, 0, 3, 4, 3]))
    assert sorted(sorted(c) for c in comps) == [[0, 1, 2], [3, 4]]


def test_simulate_deterministic_cycle_and_length():
    run = simulate(cycle(3), 7, seed=5)
    assert run.tolist() == [0, 1, 2, 0, 1, 2, 0]
    assert len(simulate(cycle(3), 1, seed=1)) == 1
    with pytest.raises(ValueError):
        simulate(cycle(3), 0)


def test_ergodic_frequencies_match_invariant_distribution():
    chain = MarkovChain.from_matrix([[0.73, 0.27], [1.0, 0.0]])
    run = simulate(chain, 10**6, seed=3)
    assert abs(np.mean(run == 0) - 0.7874) < 0.01


@pytest.mark.parametrize("seed", range(5))
def test_ergodic_frequencies_random_chains(seed):
    m = random_stochastic(seed, 6, 0.9)
    chain = MarkovChain.from_matrix(m)
    (b,) = tarjan_bsccs(chain)
    freq = np.bincount(simulate(chain, 10**6, seed=seed), minlength=6) / 10**6
    assert np.abs(freq - invariant_distribution(b)).max() < 0.01


def test_simulate_is_seeded():
    chain = MarkovChain.from_matrix(random_stochastic(1, 4, 1.0))
    assert np.array_equal(simulate(chain, 100, seed=9), simulate(chain, 100, seed=9))
