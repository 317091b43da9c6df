"""Instance generators and brute-force oracles.

* the two-vertex example graph and five hand-made strategies for it;
* the three-layer ring with payoffs (10,0)/(2,2)/(0,10), its maximal
  bound, the cyclic optimal strategy and the memory it needs;
* two-choice ring gadgets encoding Subset-Sum, Knapsack and SAT;
* exhaustive search over deterministic memoryless strategies.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .evals import AbsoluteValue, L1TargetWithPenalty, ThresholdShortfall, WindowEval, ZeroThresholdIndicator
from .mdp import Augmented, FrStrategy, Mdp, MemoryAllocation
from .markov import tarjan_bsccs
from .window import wval_bscc

__all__ = [
    "gen_example1",
    "example1_strategies",
    "gen_ring3",
    "ring_eval",
    "b_formula",
    "ring_cycle",
    "ring_memory",
    "optimal_ring_strategy",
    "ring_memory_size",
    "K_TABLE",
    "SubsetSum",
    "Knapsack",
    "Sat",
    "gen_gadget",
    "two_choice_ring",
    "brute_force_memoryless",
    "BudgetExceeded",
    "subset_sum_solvable",
    "knapsack_solvable",
    "sat_solvable",
]

EXAMPLE1_EVAL = "l1target:1,1;penalty=5"
EXAMPLE1_WINDOW = 8


def gen_example1() -> tuple[Mdp, str, int]:
    """Two vertices A (payoff (1,0)) and B (payoff (0,8)), all four edges."""
    mdp = Mdp.graph(
        ["A", "B"],
        [("A", "A"), ("A", "B"), ("B", "A"), ("B", "B")],
        [[1, 0], [0, 8]],
    )
    return mdp, EXAMPLE1_EVAL, EXAMPLE1_WINDOW


def _strategy(mdp: Mdp, size: int, moves: dict) -> FrStrategy:
    aug = Augmented(mdp, MemoryAllocation.full(mdp, size))
    probs = np.zeros(aug.n_edges)
    covered = set()
    for (a, b), p in moves.items():
        probs[aug.edge_index[(aug.state_index[a], aug.state_index[b])]] = p
        covered.add(a)
    for s in aug.states:
        if s not in covered:
            # unused memory states fall back into the pattern
            probs[aug.edge_index[(aug.state_index[s], aug.state_index[("A", 0)])]] = 1.0
    return FrStrategy(aug, probs).check()


def example1_strategies() -> dict[str, tuple[FrStrategy, float]]:
    """The five strategies of the example with their expected window values.

    Values of the randomized ones are given to two decimals.
    """
    mdp, _, _ = gen_example1()
    seven = {(("A", i), ("A", i + 1)): 1.0 for i in range(6)}
    seven[("A", 6), ("B", 0)] = 1.0
    seven[("B", 0), ("A", 0)] = 1.0
    return {
        "k1_deterministic": (_strategy(mdp, 1, {(("A", 0), ("B", 0)): 1.0, (("B", 0), ("A", 0)): 1.0}), 3.5),
        "k1_randomized": (
            _strategy(mdp, 1, {(("A", 0), ("A", 0)): 0.73, (("A", 0), ("B", 0)): 0.27, (("B", 0), ("A", 0)): 1.0}),
            1.43,
        ),
        "k2_deterministic": (
            _strategy(mdp, 2, {(("A", 0), ("A", 1)): 1.0, (("A", 1), ("B", 0)): 1.0, (("B", 0), ("A", 0)): 1.0}),
            2.0,
        ),
        "k2_randomized": (
            _strategy(
                mdp,
                2,
                {
                    (("A", 0), ("A", 0)): 0.55,
                    (("A", 0), ("A", 1)): 0.45,
                    (("A", 1), ("A", 1)): 0.55,
                    (("A", 1), ("B", 0)): 0.45,
                    (("B", 0), ("A", 0)): 1.0,
                },
            ),
            0.94,
        ),
        "k7_cycle": (_strategy(mdp, 7, seven), 0.125),
    }


# three-layer ring ---------------------------------------------------------

LAYERS = ("in", "mid", "out")
LAYER_PAY = {"in": (10, 0), "mid": (2, 2), "out": (0, 10)}
_LAYER_SUCC = {"in": ("in", "mid"), "mid": ("in", "mid", "out"), "out": ("mid", "out")}


def _rv(layer: str, pos: int) -> str:
    return f"{layer}{pos}"


def gen_ring3(ell: int) -> Mdp:
    """The 3*ell vertex three-layer directed ring (a graph, two payoffs)."""
    if ell < 2:
        raise ValueError("ring length must be at least 2")
    verts, pays, edges = [], [], []
    for i in range(ell):
        for layer in LAYERS:
            verts.append(_rv(layer, i))
            pays.append(LAYER_PAY[layer])
            for nxt in _LAYER_SUCC[layer]:
                edges.append((_rv(layer, i), _rv(nxt, (i + 1) % ell)))
    return Mdp.graph(verts, edges, pays)


def _check_even(ell: int, d: int) -> None:
    if ell < 2 or d < 2 or ell % 2 or d % 2:
        raise ValueError("ring scenarios need even ell, d >= 2")


def b_formula(ell: int, d: int) -> Fraction:
    """Largest bound both window averages can reach simultaneously."""
    _check_even(ell, d)
    return Fraction(10 * (d // 2 - 1) + 4, d)


def ring_eval(ell: int, d: int, slack=0) -> ThresholdShortfall:
    return ThresholdShortfall(b_formula(ell, d) + Fraction(slack))


def ring_cycle(ell: int, d: int) -> list[tuple[int, str]]:
    """The optimal cycle as (position, layer) pairs, length lcm(ell, d).

    One period is: middle, k times inner, middle, k times outer, with
    k = d/2 - 1, so every window of length d collects 10k+4 on both payoffs.
    """
    _check_even(ell, d)
    k = d // 2 - 1
    pattern = ["mid"] + ["in"] * k + ["mid"] + ["out"] * k
    return [(j % ell, pattern[j % d]) for j in range(math.lcm(ell, d))]


def ring_memory(ell: int, d: int) -> int:
    """Memory states used by the cycle: the most visits to one vertex."""
    return max(Counter(ring_cycle(ell, d)).values())


def optimal_ring_strategy(ell: int, d: int) -> FrStrategy:
    """Deterministic FR strategy following :func:`ring_cycle` forever.

    The j-th visit to a vertex uses memory state j.  Unused augmented
    vertices move into the cycle, so the cycle is the only BSCC.
    """
    cycle = ring_cycle(ell, d)
    mdp = gen_ring3(ell)
    size = ring_memory(ell, d)
    aug = Augmented(mdp, MemoryAllocation.full(mdp, size))
    seen: Counter = Counter()
    aug_cycle = []
    for pos, layer in cycle:
        v = _rv(layer, pos)
        aug_cycle.append((v, seen[v]))
        seen[v] += 1
    nxt = {a: aug_cycle[(j + 1) % len(aug_cycle)] for j, a in enumerate(aug_cycle)}
    probs = np.zeros(aug.n_edges)
    for s in aug.states:
        v, m = s
        if s in nxt:
            target = nxt[s]
        elif (v, 0) in nxt:
            target = nxt[(v, 0)]
        else:
            succ = mdp.successors(v)
            visited = [u for u in succ if (u, 0) in nxt]
            pos = mdp.index[v] // 3
            target = (visited[0], 0) if visited else (_rv("mid", (pos + 1) % ell), 0)
        probs[aug.edge_index[(aug.state_index[s], aug.state_index[target])]] = 1.0
    return FrStrategy(aug, probs).check()


# minimal memory of the optimal strategy, rows ell = 20, 18, ..., 2; columns d = 2, ..., 20
_K_ROWS = {
    20: (1, 1, 1, 2, 1, 2, 3, 2, 4, 1),
    18: (1, 2, 1, 2, 2, 2, 3, 4, 1, 5),
    16: (1, 1, 1, 1, 2, 2, 3, 1, 4, 3),
    14: (1, 2, 1, 2, 2, 3, 1, 4, 4, 5),
    12: (1, 1, 1, 2, 2, 1, 3, 2, 2, 3),
    10: (1, 2, 1, 2, 1, 3, 3, 4, 4, 2),
    8: (1, 1, 1, 1, 2, 2, 3, 2, 4, 3),
    6: (1, 2, 1, 2, 2, 2, 3, 4, 2, 5),
    4: (1, 1, 1, 2, 2, 2, 3, 2, 4, 3),
    2: (1, 2, 1, 2, 2, 3, 3, 4, 4, 5),
}
K_TABLE = {(ell, 2 * (j + 1)): k for ell, row in _K_ROWS.items() for j, k in enumerate(row)}


def ring_memory_size(ell: int, d: int) -> int:
    """Tabulated memory of the optimal ring strategy for even ell, d in [2, 20]."""
    try:
        return K_TABLE[(ell, d)]
    except KeyError:
        raise ValueError(f"no tabulated memory for scenario ({ell}, {d})") from None


# gadgets ------------------------------------------------------------------


@dataclass(frozen=True)
class SubsetSum:
    nums: tuple[int, ...]
    target: int

    def __post_init__(self):
        if not self.nums or any(n <= 0 for n in self.nums) or self.target <= 0:
            raise ValueError("subset-sum needs positive numbers and a positive target")


@dataclass(frozen=True)
class Knapsack:
    items: tuple[tuple[int, int], ...]  # (value, weight)
    value: int
    weight: int

    def __post_init__(self):
        if not self.items or any(v <= 0 or w <= 0 for v, w in self.items) or self.value <= 0 or self.weight <= 0:
            raise ValueError("knapsack needs positive values, weights and bounds")
        if sum(w for _, w in self.items) <= self.weight:
            raise ValueError("knapsack requires total weight above the bound")


@dataclass(frozen=True)
class Sat:
    """CNF over x_0..x_{n-1}; literal +i / -i stands for x_{i-1} / not x_{i-1}."""

    clauses: tuple[tuple[int, ...], ...]
    n_vars: int
    max_clause_exponent: int | None = None

    def __post_init__(self):
        if self.n_vars < 1 or not self.clauses:
            raise ValueError("SAT needs variables and clauses")
        for c in self.clauses:
            if not c or any(lit == 0 or abs(lit) > self.n_vars for lit in c):
                raise ValueError(f"bad clause {c}")
        r = self.max_clause_exponent
        if r is not None and len(self.clauses) > self.n_vars ** (1 / r):
            raise ValueError("too many clauses for the requested restriction")


def two_choice_ring(ell: int, pays: dict[str, Sequence[int]]) -> Mdp:
    """Ring s_i -> {t_i, u_i} -> s_{i+1 mod ell} with the given payoff vectors."""
    verts, edges = [], []
    for i in range(ell):
        verts += [f"s{i}", f"t{i}", f"u{i}"]
        nxt = f"s{(i + 1) % ell}"
        edges += [(f"s{i}", f"t{i}"), (f"s{i}", f"u{i}"), (f"t{i}", nxt), (f"u{i}", nxt)]
    return Mdp.graph(verts, edges, [pays[v] for v in verts])


def gen_gadget(instance) -> tuple[Mdp, WindowEval, int]:
    """Graph, evaluation function and window length encoding ``instance``.

    The source instance is a yes-instance iff some strategy has value 0.
    """
    if isinstance(instance, SubsetSum):
        ell = len(instance.nums)
        pays = {}
        for i, n in enumerate(instance.nums):
            pays[f"s{i}"] = [-instance.target if i == 0 else 0]
            pays[f"t{i}"] = [0]
            pays[f"u{i}"] = [n]
        return two_choice_ring(ell, pays), AbsoluteValue(), 2 * ell
    if isinstance(instance, Knapsack):
        ell = len(instance.items)
        d = 2 * ell
        w_max = max(w for _, w in instance.items)
        pays = {}
        for i, (v, w) in enumerate(instance.items):
            pays[f"s{i}"] = [0, w_max]
            pays[f"t{i}"] = [0, w_max]
            pays[f"u{i}"] = [v, w_max - w]
        ev = ZeroThresholdIndicator([Fraction(instance.value, d), w_max - Fraction(instance.weight, d)])
        return two_choice_ring(ell, pays), ev, d
    if isinstance(instance, Sat):
        ell = instance.n_vars
        d = 2 * ell
        k = len(instance.clauses)
        pays = {}
        for i in range(ell):
            pays[f"s{i}"] = [0] * k
            pays[f"u{i}"] = [int(i + 1 in c) for c in instance.clauses]
            pays[f"t{i}"] = [int(-(i + 1) in c) for c in instance.clauses]
        return two_choice_ring(ell, pays), ZeroThresholdIndicator([Fraction(1, d)] * k), d
    raise TypeError(f"unknown gadget instance {instance!r}")


class BudgetExceeded(RuntimeError):
    pass


def brute_force_memoryless(mdp: Mdp, ev: WindowEval, d: int, budget: int = 10**7):
    """Best value over deterministic memoryless strategies of a graph.

    Returns ``(value, strategy)`` for a minimizing strategy; every BSCC is
    evaluated by path enumeration.
    """
    if not mdp.is_graph:
        raise ValueError("brute force is defined for graphs only")
    choices = [mdp.successors(v) for v in mdp.vertices]
    if math.prod(len(c) for c in choices) > budget:
        raise BudgetExceeded("too many memoryless strategies to enumerate")
    aug = Augmented(mdp, MemoryAllocation.full(mdp, 1))
    ev = ev.bind(mdp.payoffs)
    best, witness = math.inf, None
    for pick in itertools.product(*choices):
        probs = np.zeros(aug.n_edges)
        for i, u in enumerate(pick):
            probs[aug.edge_index[(i, mdp.index[u])]] = 1.0
        strat = FrStrategy(aug, probs)
        for bscc in tarjan_bsccs(strat.chain()):
            value = float(wval_bscc(bscc, ev, d, method="dfs"))
            if value < best:
                best, witness = value, strat
    return best, witness


# independent oracles for the gadget sources -------------------------------


def subset_sum_solvable(nums: Sequence[int], target: int) -> bool:
    return any(
        sum(c) == target for r in range(len(nums) + 1) for c in itertools.combinations(nums, r)
    )


def knapsack_solvable(items: Sequence[tuple[int, int]], value: int, weight: int) -> bool:
    for r in range(len(items) + 1):
        for c in itertools.combinations(items, r):
            if sum(v for v, _ in c) >= value and sum(w for _, w in c) <= weight:
                return True
    return False


def sat_solvable(clauses: Sequence[Sequence[int]], n_vars: int) -> bool:
    for bits in itertools.product((False, True), repeat=n_vars):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            return True
    return False
