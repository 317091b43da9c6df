"""Expected window evaluations on a bottom SCC.

Two evaluators compute the expected ``Eval`` of the window starting in a
given state:

* :func:`window_expectation_dp` propagates probability mass over
  ``(state, representative)`` keys, one step per window position, merging
  paths whose representatives coincide;
* :func:`window_expectation_dfs` enumerates every path of the window and
  applies the raw evaluation function to its payoff sums.

``wval_bscc`` weights the per-state expectations with the invariant
distribution.  Because the DP is linear in its initial mass, it seeds all
states at once with the invariant distribution instead of running once per
state.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .evals import DecomposableEval, WindowEval
from .markov import Bscc, MarkovChain, invariant_distribution, tarjan_bsccs

__all__ = [
    "window_expectation_dp",
    "window_expectation_dfs",
    "window_dp",
    "window_values_dfs",
    "wval_bscc",
    "wval_strategy",
    "gval_bscc",
    "DpStats",
    "WvalReport",
]

# keys are aggregated with a dense bincount while the key space stays below this
_DENSE_KEYS = 1 << 22


@dataclass
class DpStats:
    """Per-step diagnostics of one DP run: live keys and total mass."""

    live_keys: list[int] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)


def _csr(bscc: Bscc):
    order = np.argsort(bscc.src, kind="stable")
    indptr = np.searchsorted(bscc.src[order], np.arange(bscc.size + 1))
    return indptr, bscc.dst[order], order


def _aggregate(keys: np.ndarray, key_space: int):
    if key_space <= _DENSE_KEYS:
        present = np.bincount(keys, minlength=key_space) > 0
        uniq = np.flatnonzero(present)
        pos = np.cumsum(present) - 1
        return uniq, pos[keys]
    return np.unique(keys, return_inverse=True)


def _check_eval(ev, d, payoffs) -> DecomposableEval:
    if d < 1:
        raise ValueError("window length must be at least 1")
    if isinstance(ev, DecomposableEval):
        if ev.d != d:
            raise ValueError("decomposed evaluation was built for another window length")
        return ev
    return ev.decompose(d, payoffs)


def window_dp(bscc: Bscc, ev, d: int, seed_states, seed_mass, weights=None, stats: DpStats | None = None):
    """Run the DP from an initial mass over states; returns sum of mass * Eval.

    ``seed_mass`` and ``weights`` (transition probabilities per BSCC edge)
    may be tape Vars; the result is then a Var as well.
    """
    rep = _check_eval(ev, d, bscc.payoffs)
    w = bscc.weights if weights is None else weights
    pay = np.asarray(bscc.payoffs, dtype=np.int64)
    indptr, succ, edge_of = _csr(bscc)
    states = np.asarray(seed_states, dtype=np.intp)
    reps = rep.update(rep.initial()[None, :], pay[states])
    mass = seed_mass
    space = rep.size
    key_space = bscc.size * space
    if stats is not None:
        stats.live_keys.append(len(states))
        stats.mass.append(float(np.sum(ad._val(mass))))
    for _ in range(d - 1):
        deg = indptr[states + 1] - indptr[states]
        n_exp = int(deg.sum())
        src_entry = np.repeat(np.arange(len(states)), deg)
        first = np.cumsum(deg) - deg
        offs = np.arange(n_exp) - np.repeat(first, deg) + np.repeat(indptr[states], deg)
        nxt = succ[offs]
        new_reps = rep.update(reps[src_entry], pay[nxt])
        keys = nxt * space + rep.pack(new_reps)
        uniq, inv = _aggregate(keys, key_space)
        mass = ad.propagate(mass, w, src_entry, edge_of[offs], inv, len(uniq))
        states = uniq // space
        reps = rep.unpack(uniq % space)
        if stats is not None:
            stats.live_keys.append(len(uniq))
            stats.mass.append(float(np.sum(ad._val(mass))))
    return ad.dot(mass, rep.evaluate(reps))


def window_expectation_dp(bscc: Bscc, ev, d: int, start: int, weights=None, stats: DpStats | None = None):
    """Expected Eval of the length-``d`` window from global state ``start``."""
    s = bscc.local(start)
    return window_dp(bscc, ev, d, [s], np.ones(1), weights, stats)


def window_values_dfs(bscc: Bscc, ev: WindowEval, d: int, weights=None, starts=None, deadline: float | None = None):
    """Expected Eval per start state by exhaustive path enumeration.

    ``ev`` is used as a black box on the window averages.  Returns an array
    over ``starts`` (default: all local states), or a Var when ``weights``
    is a Var; its Jacobian is accumulated path by path.  ``deadline`` is an
    absolute ``time.perf_counter()`` value after which ``TimeoutError`` is
    raised.
    """
    if d < 1:
        raise ValueError("window length must be at least 1")
    if isinstance(ev, DecomposableEval):
        ev = ev.family
    ev = ev.bind(bscc.payoffs)
    ev.check_arity(bscc.payoffs.shape[1])
    wv = ad._val(bscc.weights if weights is None else weights)
    starts = np.arange(bscc.size) if starts is None else np.asarray(starts, dtype=np.intp)
    pay = [np.asarray(p, dtype=np.int64) for p in bscc.payoffs]
    adj = [[] for _ in range(bscc.size)]
    for e, (a, b) in enumerate(zip(bscc.src, bscc.dst)):
        if wv[e] > 0:
            adj[a].append((int(b), e, float(wv[e])))
    want_grad = isinstance(weights, ad.Var)
    jac = np.zeros((len(starts), len(wv))) if want_grad else None
    out = np.zeros(len(starts))
    path: list[int] = []
    leaves = 0

    def go(v, p, n, acc, row):
        nonlocal leaves
        if n == d:
            val = ev(acc / d)
            out[row] += p * val
            if want_grad:
                for e in path:
                    jac[row, e] += p * val / wv[e]
            leaves += 1
            if deadline is not None and leaves % 4096 == 0 and time.perf_counter() > deadline:
                raise TimeoutError("DFS evaluation exceeded its time budget")
            return
        for u, e, pe in adj[v]:
            path.append(e)
            go(u, p * pe, n + 1, acc + pay[u], row)
            path.pop()

    for row, s in enumerate(starts):
        go(int(s), 1.0, 1, pay[s].copy(), row)
    if not want_grad:
        return out
    return weights.tape.record("dfs", [weights], out, lambda g: [g @ jac])


def window_expectation_dfs(bscc: Bscc, ev: WindowEval, d: int, start: int, weights=None, deadline=None):
    """Expected Eval of the window from global state ``start`` by path enumeration."""
    vals = window_values_dfs(bscc, ev, d, weights, [bscc.local(start)], deadline)
    if isinstance(vals, ad.Var):
        return ad.total(vals)
    return float(vals[0])


def wval_bscc(bscc: Bscc, ev, d: int, probs=None, method: str = "dp", deadline=None, stats=None):
    """Invariant-distribution weighted expected window Eval of one BSCC.

    ``probs`` optionally gives transition probabilities for every edge of
    the parent chain (e.g. a Var produced by materializing parameters on a
    tape); the BSCC's entries are gathered from it.
    """
    weights = bscc.weights if probs is None else ad.gather(probs, bscc.edges)
    inv = invariant_distribution(bscc, weights)
    if method == "dp":
        return window_dp(bscc, ev, d, np.arange(bscc.size), inv, weights, stats)
    if method == "dfs":
        return ad.dot(inv, window_values_dfs(bscc, ev, d, weights, deadline=deadline))
    raise ValueError(f"unknown evaluation method {method!r}")


def gval_bscc(bscc: Bscc, ev: WindowEval) -> float:
    """Eval applied to the global mean payoffs of the component."""
    if isinstance(ev, DecomposableEval):
        ev = ev.family
    inv = invariant_distribution(bscc)
    gmp = inv @ bscc.payoffs
    return ev.bind(bscc.payoffs)(gmp)


@dataclass
class WvalReport:
    value: float
    best: int
    bsccs: list[Bscc]
    values: list[float]
    gvals: list[float]

    @property
    def bscc(self) -> Bscc:
        return self.bsccs[self.best]


def _as_chain(obj) -> MarkovChain:
    return obj if isinstance(obj, MarkovChain) else obj.chain()


def wval_strategy(strategy, ev: WindowEval, d: int, method: str = "dp") -> tuple[float, Bscc]:
    """Minimum window value over the BSCCs of the induced chain, with its BSCC."""
    report = evaluate_chain(strategy, ev, d, method)
    return report.value, report.bscc


def evaluate_chain(strategy, ev: WindowEval, d: int, method: str = "dp") -> WvalReport:
    chain = _as_chain(strategy)
    ev = ev.bind(chain.payoffs)
    bsccs = tarjan_bsccs(chain)
    values = [float(wval_bscc(b, ev, d, method=method)) for b in bsccs]
    gvals = [gval_bscc(b, ev) for b in bsccs]
    best = int(np.argmin(values))
    return WvalReport(values[best], best, bsccs, values, gvals)
