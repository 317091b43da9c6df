"""Self-check suites and a generator of small random instances."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import autodiff as ad
from .benchgen import example1_strategies, optimal_ring_strategy, ring_eval
from .evals import (
    AbsoluteValue,
    IntervalIndicator,
    L1TargetWithPenalty,
    MaxSum,
    ThresholdShortfall,
    WindowEval,
    ZeroThresholdIndicator,
)
from .markov import tarjan_bsccs
from .mdp import NONDETERMINISTIC, STOCHASTIC, Augmented, FrStrategy, Mdp, MemoryAllocation, materialize_strategy
from .window import wval_bscc, wval_strategy

__all__ = [
    "RandomCase",
    "random_mdp",
    "random_eval",
    "random_params",
    "random_case",
    "bscc_value",
    "tape_gradient",
    "finite_difference_check",
    "gradient_cases",
    "SUITES",
    "run_suite",
]


@dataclass
class RandomCase:
    mdp: Mdp
    aug: Augmented
    theta: np.ndarray
    ev: WindowEval
    d: int

    @property
    def strategy(self) -> FrStrategy:
        return materialize_strategy(self.aug, self.theta)


def random_mdp(rng: np.random.Generator, n_vertices: int, k: int, max_pay: int = 4) -> Mdp:
    """Strongly connected random MDP: a Hamiltonian cycle plus random chords."""
    verts = [f"v{i}" for i in range(n_vertices)]
    kinds = [STOCHASTIC if rng.random() < 0.3 else NONDETERMINISTIC for _ in verts]
    edges = set()
    for i in range(n_vertices):
        edges.add((i, (i + 1) % n_vertices))
        for j in range(n_vertices):
            if rng.random() < 0.35:
                edges.add((i, j))
    edges = sorted(edges)
    prob = {}
    for i, v in enumerate(verts):
        if kinds[i] == STOCHASTIC:
            succ = [j for a, j in edges if a == i]
            w = rng.integers(1, 4, size=len(succ))
            prob[v] = {verts[j]: float(Fraction(int(x), int(w.sum()))) for j, x in zip(succ, w)}
    pays = rng.integers(-max_pay, max_pay + 1, size=(n_vertices, k))
    return Mdp(tuple(verts), tuple(kinds), tuple((verts[a], verts[b]) for a, b in edges), prob, pays)


def random_eval(rng: np.random.Generator, k: int, max_pay: int = 4) -> WindowEval:
    choice = int(rng.integers(6))
    if choice == 0:
        bounds = []
        for _ in range(k):
            lo = int(rng.integers(-max_pay, max_pay))
            bounds.append((Fraction(lo), Fraction(lo + int(rng.integers(1, 4)))))
        return IntervalIndicator(bounds)
    if choice == 1:
        return ThresholdShortfall(Fraction(int(rng.integers(1, 2 * max_pay + 1)), 2))
    if choice == 2:
        targets = [Fraction(int(rng.integers(-2, 3))) for _ in range(k)]
        return L1TargetWithPenalty(targets, Fraction(int(rng.integers(1, 6))))
    if choice == 3:
        return MaxSum()
    if choice == 4:
        return ZeroThresholdIndicator([Fraction(int(rng.integers(-2, 3)), 2) for _ in range(k)], Fraction(3))
    return AbsoluteValue() if k == 1 else MaxSum()


def random_params(rng: np.random.Generator, aug: Augmented, sparse: bool = True) -> np.ndarray:
    """Random raw parameters; with ``sparse`` some softmax entries underflow to zero."""
    theta = rng.normal(0.0, 1.5, size=aug.n_edges)
    if sparse:
        ends = np.append(aug.group_start[1:], aug.n_edges)
        for a, b in zip(aug.group_start, ends):
            if b - a > 1:
                drop = rng.random(b - a) < 0.3
                drop[rng.integers(b - a)] = False
                theta[a:b][drop] = -1e3
    return theta


def random_case(seed: int, max_states: int = 6, max_d: int = 6, max_k: int = 2) -> RandomCase:
    """Random (instance, strategy, eval, window) with at most ``max_states`` augmented vertices."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, max_k + 1))
    n = int(rng.integers(1, min(4, max_states) + 1))
    mem = int(rng.integers(1, max(1, max_states // n) + 1))
    mdp = random_mdp(rng, n, k)
    aug = Augmented(mdp, MemoryAllocation.full(mdp, mem))
    return RandomCase(mdp, aug, random_params(rng, aug), random_eval(rng, k), int(rng.integers(1, max_d + 1)))


def bscc_value(case: RandomCase, theta: np.ndarray, index: int = 0, method: str = "dp"):
    """Value of the ``index``-th BSCC (support of ``case.theta``) at parameters ``theta``."""
    bscc = tarjan_bsccs(case.strategy.chain())[index]
    probs = materialize_strategy(case.aug, theta).probs
    return float(wval_bscc(bscc, case.ev.bind(case.mdp.payoffs), case.d, probs=probs, method=method))


def tape_gradient(case: RandomCase) -> np.ndarray:
    """Gradient of the first BSCC's value with respect to ``case.theta``."""
    bscc = tarjan_bsccs(case.strategy.chain())[0]
    tape = ad.Tape()
    th = tape.var(case.theta)
    value = wval_bscc(bscc, case.ev.bind(case.mdp.payoffs), case.d, probs=materialize_strategy(case.aug, th))
    return tape.backward(value)[th] if isinstance(value, ad.Var) else np.zeros_like(case.theta)


def finite_difference_check(case: RandomCase, h: float = 1e-5, rtol: float = 1e-4, atol: float = 1e-8):
    """Compare the tape gradient with central differences on every coordinate.

    A coordinate passes when the two agree to ``rtol`` relative error or
    differ by at most ``atol``.  Returns ``(ok, worst_relative_error)``.
    """
    grad = tape_gradient(case)
    worst, ok = 0.0, True
    for i in range(case.theta.size):
        e = np.zeros_like(case.theta)
        e[i] = h
        fd = (bscc_value(case, case.theta + e) - bscc_value(case, case.theta - e)) / (2 * h)
        err = abs(grad[i] - fd)
        rel = err / max(abs(grad[i]), abs(fd)) if err > 0 else 0.0
        worst = max(worst, rel)
        ok = ok and (err <= atol or rel <= rtol)
    return ok, worst


def gradient_cases(n: int, seed: int = 1000, min_grad: float = 1e-6):
    """First ``n`` random cases, at dense parameters, whose gradient is not flat."""
    out, s = [], seed
    while len(out) < n:
        case = random_case(s)
        case.theta = np.random.default_rng(s).normal(0.0, 1.0, size=case.aug.n_edges)
        if np.abs(tape_gradient(case)).max(initial=0.0) > min_grad:
            out.append((s, case))
        s += 1
    return out


# suites --------------------------------------------------------------------


def suite_smoke():
    lines, ok = [], True
    for name, (strategy, expected) in example1_strategies().items():
        value, _ = wval_strategy(strategy, L1TargetWithPenalty([1, 1], 5), 8)
        tol = 0.01 if "randomized" in name else 1e-9
        good = abs(value - expected) <= tol
        ok &= good
        lines.append(f"{name}: {value:.12g} (expected {expected}) {'ok' if good else 'FAIL'}")
    return ok, lines


def suite_oracle(n: int = 200, seed: int = 0, tol: float = 1e-9):
    worst, bad = 0.0, []
    for s in range(seed, seed + n):
        case = random_case(s)
        for i in range(len(tarjan_bsccs(case.strategy.chain()))):
            dp = bscc_value(case, case.theta, i, "dp")
            dfs = bscc_value(case, case.theta, i, "dfs")
            worst = max(worst, abs(dp - dfs))
            if abs(dp - dfs) > tol:
                bad.append(f"case {s} bscc {i}: dp {dp!r} dfs {dfs!r}")
    return not bad, bad + [f"{n} cases, max |dp - dfs| = {worst:.3g}"]


def suite_grad(n: int = 100, seed: int = 1000):
    worst, bad = 0.0, []
    for s, case in gradient_cases(n, seed):
        ok, err = finite_difference_check(case)
        worst = max(worst, err)
        if not ok:
            bad.append(f"case {s}: relative error {err:.3g}")
    return not bad, bad + [f"{n} cases, worst relative error {worst:.3g}"]


def suite_rings(max_ell: int = 20, max_d: int = 20):
    bad, n = [], 0
    for ell in range(2, max_ell + 1, 2):
        for d in range(2, max_d + 1, 2):
            n += 1
            chain = optimal_ring_strategy(ell, d).chain()
            exact = min(float(wval_bscc(b, ring_eval(ell, d), d)) for b in tarjan_bsccs(chain))
            loose = min(float(wval_bscc(b, ring_eval(ell, d, Fraction(1, 100)), d)) for b in tarjan_bsccs(chain))
            if abs(exact) > 1e-9 or not loose > 0:
                bad.append(f"ell={ell} d={d}: value {exact!r}, raised bound {loose!r}")
    return not bad, bad + [f"{n} ring scenarios checked"]


SUITES = {"smoke": suite_smoke, "oracle": suite_oracle, "grad": suite_grad, "rings": suite_rings}


def run_suite(name: str):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return SUITES[name]()

