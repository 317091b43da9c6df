from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from winmp.benchgen import (
    K_TABLE,
    BudgetExceeded,
    Knapsack,
    Sat,
    SubsetSum,
    b_formula,
    brute_force_memoryless,
    gen_example1,
    gen_gadget,
    gen_ring3,
    ring_memory_size,
    knapsack_solvable,
    optimal_ring_strategy,
    ring_memory,
    sat_solvable,
    subset_sum_solvable,
)
from winmp.evals import parse_eval
from winmp.io import format_mdp, format_strategy
from winmp.markov import tarjan_bsccs
from winmp.mdp import FrStrategy, Mdp, build_augmented
from winmp.window import wval_bscc

GOLDEN = Path(__file__).parent / "golden"


def test_ring3_shape():
    mdp = gen_ring3(6)
    assert len(mdp.vertices) == 18 and len(mdp.edges) == 42
    assert {len(mdp.successors(v)) for v in mdp.vertices} == {2, 3}
    assert all(mdp.payoffs[mdp.index[f"in{i}"]].tolist() == [10, 0] for i in range(6))
    assert mdp.is_graph
    with pytest.raises(ValueError):
        gen_ring3(1)


@pytest.mark.parametrize("ell,d,b", [(2, 2, Fraction(2)), (6, 8, Fraction(17, 4)), (20, 20, Fraction(47, 10))])
def test_b_formula(ell, d, b):
    assert b_formula(ell, d) == b


@pytest.mark.parametrize("ell,d", [(3, 4), (4, 5), (0, 2)])
def test_b_formula_parity(ell, d):
    with pytest.raises(ValueError):
        b_formula(ell, d)


@pytest.mark.parametrize("ell,d,k", [(20, 18, 4), (18, 20, 5), (12, 12, 1), (2, 20, 5)])
def test_memory_table_entries(ell, d, k):
    assert ring_memory_size(ell, d) == k


def test_cycle_memory_matches_table_everywhere():
    assert len(K_TABLE) == 100
    for (ell, d), k in K_TABLE.items():
        assert ring_memory(ell, d) == k


def window_sums(strategy, d):
    chain = strategy.chain()
    (b,) = tarjan_bsccs(chain)
    assert np.all(b.weights == 1.0)  # deterministic cycle
    nxt = dict(zip(b.src.tolist(), b.dst.tolist()))
    out = []
    for s in range(b.size):
        total, cur = np.zeros(2, dtype=int), s
        for _ in range(d):
            total += b.payoffs[cur]
            cur = nxt[cur]
        out.append(total)
    return np.array(out)


@pytest.mark.parametrize("ell,d", [(2, 20), (6, 8), (10, 4), (20, 20), (4, 2)])
def test_optimal_cycle_windows_hit_bound_exactly(ell, d):
    strat = optimal_ring_strategy(ell, d)
    sums = window_sums(strat, d)
    assert Fraction(int(sums.min()), d) == b_formula(ell, d)
    assert strat.aug.alloc.size == ring_memory_size(ell, d)


def test_gen_example1():
    mdp, spec, d = gen_example1()
    assert spec == "l1target:1,1;penalty=5" and d == 8
    assert mdp.payoffs.tolist() == [[1, 0], [0, 8]]


def test_reference_strategy_values(example1_refs):
    ev = parse_eval("l1target:1,1;penalty=5")
    for name, (strat, expected) in example1_refs.items():
        value = min(float(wval_bscc(b, ev, 8)) for b in tarjan_bsccs(strat.chain()))
        assert value == pytest.approx(expected, abs=0.01 if "randomized" in name else 1e-9), name


def test_brute_force_example1_is_alternation(example1):
    mdp, ev, d = example1
    value, witness = brute_force_memoryless(mdp, ev, d)
    assert value == pytest.approx(3.5)
    assert witness.distribution(("A", 0))[("B", 0)] == 1.0


def test_brute_force_single_self_loop():
    mdp = Mdp.graph(["a"], [("a", "a")], [[3, 1]])
    value, _ = brute_force_memoryless(mdp, parse_eval("l1target:1,1;penalty=5"), 4)
    assert value == pytest.approx(2.0)


def test_brute_force_budget():
    with pytest.raises(BudgetExceeded):
        brute_force_memoryless(gen_ring3(20), parse_eval("threshold:4"), 4, budget=1000)


def test_subset_sum_gadgets():
    yes = gen_gadget(SubsetSum((3, 5, 7), 8))
    no = gen_gadget(SubsetSum((2, 4), 5))
    assert yes[2] == 6
    value, witness = brute_force_memoryless(*yes)
    assert value == 0.0
    picks = {v for v in ("u0", "u1", "u2") if witness.distribution(("s" + v[1], 0)).get((v, 0)) == 1.0}
    assert picks == {"u0", "u1"}
    assert brute_force_memoryless(*no)[0] > 0


def test_sat_gadget_assignment():
    mdp, ev, d = gen_gadget(Sat(((1, -2),), 2))
    aug = build_augmented(mdp, 1)
    probs = np.zeros(aug.n_edges)
    for a, b in [("s0", "u0"), ("s1", "u1"), ("u0", "s1"), ("t0", "s1"), ("u1", "s0"), ("t1", "s0")]:
        probs[aug.edge_index[(aug.state_index[(a, 0)], aug.state_index[(b, 0)])]] = 1.0
    strat = FrStrategy(aug, probs).check()
    assert min(float(wval_bscc(b, ev, d)) for b in tarjan_bsccs(strat.chain())) == 0.0


def test_knapsack_gadget_small():
    inst = Knapsack(((3, 2), (4, 3), (2, 2)), 5, 4)
    mdp, ev, d = gen_gadget(inst)
    assert (brute_force_memoryless(mdp, ev, d)[0] == 0) == knapsack_solvable(inst.items, 5, 4)


def test_gadget_invariants():
    with pytest.raises(ValueError):
        Knapsack(((1, 1),), 1, 5)
    with pytest.raises(ValueError):
        Sat(((3,),), 2)
    with pytest.raises(ValueError):
        Sat(((1,), (2,), (-1,)), 2, max_clause_exponent=2)
    with pytest.raises(TypeError):
        gen_gadget("x")


def test_independent_oracles():
    assert subset_sum_solvable([3, 5, 7], 8) and not subset_sum_solvable([2, 4], 5)
    assert sat_solvable([(1, -2)], 2) and not sat_solvable([(1,), (-1,)], 1)
    assert knapsack_solvable([(3, 2), (4, 3)], 4, 3) and not knapsack_solvable([(3, 2), (4, 3)], 7, 4)


@pytest.mark.parametrize(
    "name,make",
    [
        ("ring3_4.mdp", lambda: format_mdp(gen_ring3(4))),
        ("example1.mdp", lambda: format_mdp(gen_example1()[0])),
        ("subsetsum_3_5_7_t8.mdp", lambda: format_mdp(gen_gadget(SubsetSum((3, 5, 7), 8))[0])),
        ("ring_strategy_4_6.strategy", lambda: format_strategy(optimal_ring_strategy(4, 6))),
    ],
)
def test_golden_outputs(name, make):
    assert make() == (GOLDEN / name).read_text(encoding="utf-8")
