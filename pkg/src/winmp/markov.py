"""Induced Markov chains, bottom SCCs and invariant distributions."""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from . import autodiff as ad

__all__ = [
    "MarkovChain",
    "Bscc",
    "induced_chain",
    "tarjan_bsccs",
    "strongly_connected_components",
    "invariant_distribution",
    "simulate",
]


@dataclass(eq=False)
class MarkovChain:
    """A finite chain stored as an edge list.

    ``src``/``dst``/``prob`` list the transitions; zero-probability entries
    are allowed and ignored by the graph algorithms.  ``payoffs`` carries
    one payoff vector per state.
    """

    n_states: int
    src: np.ndarray
    dst: np.ndarray
    prob: np.ndarray
    payoffs: np.ndarray
    init: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.intp)
        self.dst = np.asarray(self.dst, dtype=np.intp)
        self.prob = np.asarray(self.prob, dtype=float)
        self.payoffs = np.asarray(self.payoffs)
        if self.payoffs.ndim == 1:
            self.payoffs = self.payoffs[:, None]
        self.init = np.asarray(self.init, dtype=float)
        if not (len(self.src) == len(self.dst) == len(self.prob)):
            raise ValueError("edge arrays differ in length")
        if self.payoffs.shape[0] != self.n_states or self.init.shape != (self.n_states,):
            raise ValueError("dimension mismatch between states, payoffs and initial distribution")

    @classmethod
    def from_matrix(cls, matrix, payoffs=None, init=None, labels=None) -> "MarkovChain":
        p = np.asarray(matrix, dtype=float)
        n = p.shape[0]
        src, dst = np.nonzero(p)
        if payoffs is None:
            payoffs = np.zeros((n, 1))
        if init is None:
            init = np.eye(n)[0]
        return cls(n, src, dst, p[src, dst], payoffs, init, labels)

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n_states, self.n_states))
        np.add.at(m, (self.src, self.dst), self.prob)
        return m

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.prob, minlength=self.n_states)

    def support(self) -> np.ndarray:
        return self.prob > 0


@dataclass(eq=False)
class Bscc:
    """A bottom SCC viewed as an irreducible chain.

    ``states`` are sorted global state indices.  ``src``/``dst`` are local
    indices of the positive transitions inside the component and ``edges``
    their positions in the parent chain's edge list, so a weight vector
    over the parent edges (possibly a tape Var) can be restricted with
    ``gather(weights, edges)``.
    """

    states: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    payoffs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.states)

    def __len__(self):
        return len(self.states)

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.size, self.size))
        np.add.at(m, (self.src, self.dst), self.weights)
        return m

    def local(self, state: int) -> int:
        """Local index of a global state."""
        i = int(np.searchsorted(self.states, state))
        if i >= self.size or self.states[i] != state:
            raise ValueError(f"state {state} is not in this BSCC")
        return i


def induced_chain(strategy, start=None) -> MarkovChain:
    """The chain over augmented vertices induced by an FR strategy.

    The initial distribution is a point mass on ``start`` (an augmented
    vertex, default the first one); window values do not depend on it.
    """
    aug = strategy.aug
    init = np.zeros(aug.n_states)
    init[0 if start is None else aug.state_index[start]] = 1.0
    return MarkovChain(aug.n_states, aug.src, aug.dst, strategy.probs, aug.payoffs, init, list(aug.states))


def strongly_connected_components(n: int, src: np.ndarray, dst: np.ndarray) -> list[list[int]]:
    """Strongly connected components as sorted state lists, ordered by least state."""
    graph = scipy.sparse.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    count, labels = scipy.sparse.csgraph.connected_components(graph, directed=True, connection="strong")
    comps = [[] for _ in range(count)]
    for state, label in enumerate(labels.tolist()):
        comps[label].append(state)
    return sorted(comps, key=lambda c: c[0])


@lru_cache(maxsize=256)
def _bottom_components(n: int, src_bytes: bytes, dst_bytes: bytes) -> tuple[tuple[int, ...], ...]:
    src = np.frombuffer(src_bytes, dtype=np.intp)
    dst = np.frombuffer(dst_bytes, dtype=np.intp)
    comps = strongly_connected_components(n, src, dst)
    comp_of = np.empty(n, dtype=np.intp)
    for c, members in enumerate(comps):
        comp_of[members] = c
    leaving = np.zeros(len(comps), dtype=bool)
    leaving[comp_of[src[comp_of[src] != comp_of[dst]]]] = True
    bottoms = [tuple(c) for i, c in enumerate(comps) if not leaving[i]]
    return tuple(sorted(bottoms, key=lambda c: c[0]))


def tarjan_bsccs(chain: MarkovChain) -> list[Bscc]:
    """All bottom SCCs of the positive-probability graph, ordered by least state.

    Components depend only on the support of the transition probabilities,
    so results are memoized on the support pattern.
    """
    pos = np.flatnonzero(chain.prob > 0)
    src, dst = chain.src[pos], chain.dst[pos]
    bottoms = _bottom_components(chain.n_states, src.tobytes(), dst.tobytes())
    out = []
    for members in bottoms:
        states = np.array(members, dtype=np.intp)
        inside = np.zeros(chain.n_states, dtype=bool)
        inside[states] = True
        local = np.full(chain.n_states, -1, dtype=np.intp)
        local[states] = np.arange(len(states))
        sel = pos[inside[src]]
        out.append(
            Bscc(
                states=states,
                src=local[chain.src[sel]],
                dst=local[chain.dst[sel]],
                edges=sel,
                weights=chain.prob[sel],
                payoffs=chain.payoffs[states],
            )
        )
    return out


def invariant_distribution(bscc: Bscc, weights=None):
    """Solve ``x = x P`` with ``sum(x) = 1`` on an irreducible component.

    ``weights`` overrides the component's transition probabilities (one per
    component edge) and may be a tape Var, in which case a Var is returned.
    """
    w = bscc.weights if weights is None else weights
    return ad.stationary(w, bscc.src, bscc.dst, bscc.size)


def simulate(chain: MarkovChain, steps: int, seed=None) -> np.ndarray:
    """Sample a run of ``steps`` states starting from the initial distribution."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    rng = np.random.default_rng(seed)
    n = chain.n_states
    order = np.lexsort((chain.dst, chain.src))
    src, dst, prob = chain.src[order], chain.dst[order], chain.prob[order]
    indptr = np.searchsorted(src, np.arange(n + 1))
    cum = [np.cumsum(prob[indptr[i] : indptr[i + 1]]).tolist() for i in range(n)]
    targets = [dst[indptr[i] : indptr[i + 1]].tolist() for i in range(n)]
    u = rng.random(steps).tolist()
    out = [0] * steps
    state = int(np.searchsorted(np.cumsum(chain.init), u[0] * chain.init.sum(), side="right"))
    state = out[0] = min(state, n - 1)
    for t in range(1, steps):
        c = cum[state]
        j = bisect.bisect_right(c, u[t] * c[-1])
        state = out[t] = targets[state][min(j, len(c) - 1)]
    run = np.array(out, dtype=np.intp)
    return run
