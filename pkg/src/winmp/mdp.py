"""MDPs, memory allocations, augmented vertices and FR strategies."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import autodiff as ad

__all__ = [
    "NONDETERMINISTIC",
    "STOCHASTIC",
    "Mdp",
    "MemoryAllocation",
    "Augmented",
    "FrStrategy",
    "MdpError",
    "validate_mdp",
    "build_augmented",
    "materialize_strategy",
]

NONDETERMINISTIC = "N"
STOCHASTIC = "S"

_ID = re.compile(r"[A-Za-z0-9_]+\Z")


class MdpError(ValueError):
    """Raised for malformed models, allocations or strategies."""


@dataclass(eq=False)
class Mdp:
    """A finite MDP with integer payoff vectors on vertices.

    ``prob`` maps each stochastic vertex to its successor distribution.
    ``payoffs`` is an ``(n_vertices, k)`` integer array.  Use
    :func:`validate_mdp` (or :meth:`check`) to verify the model invariants.
    """

    vertices: tuple[str, ...]
    kind: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    prob: Mapping[str, Mapping[str, float]]
    payoffs: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = tuple(self.vertices)
        self.kind = tuple(self.kind)
        self.index = {v: i for i, v in enumerate(self.vertices)}
        self.payoffs = np.asarray(self.payoffs, dtype=np.int64)
        if self.payoffs.ndim == 1:
            self.payoffs = self.payoffs[:, None]
        # fixed edge order: source position, then target position
        order = {v: i for i, v in enumerate(self.vertices)}
        self.edges = tuple(
            sorted(dict.fromkeys(tuple(e) for e in self.edges), key=lambda e: (order.get(e[0], -1), order.get(e[1], -1)))
        )
        self.prob = {v: dict(p) for v, p in self.prob.items()}
        self._succ: dict[str, list[str]] = {v: [] for v in self.vertices}
        for a, b in self.edges:
            self._succ.setdefault(a, []).append(b)

    @classmethod
    def graph(cls, vertices: Sequence[str], edges: Iterable[tuple[str, str]], payoffs) -> "Mdp":
        """Convenience constructor for a graph (no stochastic vertices)."""
        return cls(tuple(vertices), (NONDETERMINISTIC,) * len(vertices), tuple(edges), {}, payoffs)

    @property
    def n_payoffs(self) -> int:
        return self.payoffs.shape[1]

    @property
    def is_graph(self) -> bool:
        return STOCHASTIC not in self.kind

    def successors(self, v: str) -> list[str]:
        return self._succ.get(v, [])

    def is_stochastic(self, v: str) -> bool:
        return self.kind[self.index[v]] == STOCHASTIC

    def check(self) -> "Mdp":
        problems = validate_mdp(self)
        if problems:
            raise MdpError("; ".join(problems))
        return self


def validate_mdp(mdp: Mdp) -> list[str]:
    """Return a list of violated model invariants (empty when the model is ok)."""
    problems = []
    if len(set(mdp.vertices)) != len(mdp.vertices):
        problems.append("duplicate vertex id")
    for v in mdp.vertices:
        if not _ID.match(v):
            problems.append(f"bad vertex id {v!r}")
    if len(mdp.kind) != len(mdp.vertices):
        problems.append("kind list length differs from vertex count")
    for k in mdp.kind:
        if k not in (NONDETERMINISTIC, STOCHASTIC):
            problems.append(f"unknown vertex kind {k!r}")
    if mdp.payoffs.shape[0] != len(mdp.vertices):
        problems.append("payoff arity mismatch: one payoff vector per vertex required")
    if mdp.payoffs.shape[1] < 1:
        problems.append("payoff arity mismatch: at least one payoff function required")
    out: dict[str, list[str]] = {v: [] for v in mdp.vertices}
    for a, b in mdp.edges:
        if a not in mdp.index or b not in mdp.index:
            problems.append(f"dangling edge {a} -> {b}")
            continue
        out[a].append(b)
    for v in mdp.vertices:
        if not out[v]:
            problems.append(f"vertex {v}: no outgoing edge")
    for i, v in enumerate(mdp.vertices):
        stochastic = i < len(mdp.kind) and mdp.kind[i] == STOCHASTIC
        dist = mdp.prob.get(v)
        if not stochastic:
            if dist:
                problems.append(f"vertex {v}: probabilities on a nondeterministic vertex")
            continue
        if not dist:
            problems.append(f"vertex {v}: stochastic vertex without distribution")
            continue
        for u, p in dist.items():
            if u not in out[v]:
                problems.append(f"vertex {v}: probability on non-edge {v} -> {u}")
            if not p > 0:
                problems.append(f"vertex {v}: nonpositive probability to {u}")
        missing = [u for u in out[v] if u not in dist]
        if missing:
            problems.append(f"vertex {v}: edge without probability to {', '.join(missing)}")
        s = float(sum(dist.values()))
        if abs(s - 1.0) > 1e-9:
            problems.append(f"vertex {v}: distribution sum {s!r} != 1")
    for v in mdp.prob:
        if v not in mdp.index:
            problems.append(f"probabilities for unknown vertex {v}")
    return problems


@dataclass(frozen=True)
class MemoryAllocation:
    """Memory states ``0..size-1`` and the subset available at each vertex."""

    size: int
    alloc: Mapping[str, tuple[int, ...]]

    @classmethod
    def full(cls, mdp: Mdp, size: int) -> "MemoryAllocation":
        if size < 1:
            raise MdpError("memory size must be at least 1")
        states = tuple(range(size))
        return cls(size, {v: states for v in mdp.vertices})

    def __getitem__(self, v: str) -> tuple[int, ...]:
        return self.alloc[v]

    def check(self, mdp: Mdp) -> None:
        if self.size < 1:
            raise MdpError("memory size must be at least 1")
        for v in mdp.vertices:
            ms = self.alloc.get(v)
            if not ms:
                raise MdpError(f"empty memory allocation for vertex {v}")
            if any(not 0 <= m < self.size for m in ms):
                raise MdpError(f"memory state out of range at vertex {v}")
            if list(ms) != sorted(set(ms)):
                raise MdpError(f"memory states of {v} must be strictly increasing")


class Augmented:
    """Augmented vertices, augmented edges and the softmax grouping.

    States are ordered by vertex order, then memory state.  Edges are
    ordered by source state, then target state, so every softmax group is a
    contiguous slice of the edge arrays.

    Attributes
    ----------
    states : list of (vertex, memory) pairs
    vertex_of : int array, vertex index of each state
    src, dst : int arrays over augmented edges
    group_start : first edge index of every softmax group
    group_factor : multiplier of every group (1, or p(v)(v') at stochastic v)
    payoffs : (n_states, k) int array
    """

    def __init__(self, mdp: Mdp, alloc: MemoryAllocation):
        alloc.check(mdp)
        self.mdp = mdp
        self.alloc = alloc
        self.states = [(v, m) for v in mdp.vertices for m in alloc[v]]
        self.state_index = {s: i for i, s in enumerate(self.states)}
        self.vertex_of = np.array([mdp.index[v] for v, _ in self.states], dtype=np.intp)
        self.payoffs = mdp.payoffs[self.vertex_of]
        src, dst, starts, factors, group_of = [], [], [], [], []
        for i, (v, m) in enumerate(self.states):
            stochastic = mdp.is_stochastic(v)
            succ = mdp.successors(v)
            for u in succ:
                if stochastic or u == succ[0]:
                    starts.append(len(src))
                    factors.append(float(mdp.prob[v][u]) if stochastic else 1.0)
                for mm in alloc[u]:
                    src.append(i)
                    dst.append(self.state_index[(u, mm)])
                    group_of.append(len(starts) - 1)
        self.src = np.array(src, dtype=np.intp)
        self.dst = np.array(dst, dtype=np.intp)
        self.group_start = np.array(starts, dtype=np.intp)
        self.group_factor = np.array(factors, dtype=float)
        self.group_of = np.array(group_of, dtype=np.intp)
        self.edge_index = {(int(a), int(b)): e for e, (a, b) in enumerate(zip(self.src, self.dst))}

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def n_groups(self) -> int:
        return len(self.group_start)

    def group_sizes(self) -> np.ndarray:
        return np.diff(np.append(self.group_start, self.n_edges))

    def edge_list(self) -> list[tuple[tuple[str, int], tuple[str, int]]]:
        return [(self.states[a], self.states[b]) for a, b in zip(self.src, self.dst)]


def build_augmented(mdp: Mdp, alloc: MemoryAllocation | int) -> Augmented:
    if isinstance(alloc, int):
        alloc = MemoryAllocation.full(mdp, alloc)
    return Augmented(mdp, alloc)


@dataclass(eq=False)
class FrStrategy:
    """A finite-memory randomized strategy: one probability per augmented edge."""

    aug: Augmented
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.shape != (self.aug.n_edges,):
            raise MdpError("strategy length does not match the augmented edge count")

    def distribution(self, state: tuple[str, int]) -> dict[tuple[str, int], float]:
        i = self.aug.state_index[state]
        mask = self.aug.src == i
        return {self.aug.states[j]: float(p) for j, p in zip(self.aug.dst[mask], self.probs[mask])}

    def problems(self, tol: float = 1e-9) -> list[str]:
        aug = self.aug
        out = []
        if np.any(self.probs < 0) or not np.all(np.isfinite(self.probs)):
            out.append("negative or non-finite probability")
        rows = np.bincount(aug.src, weights=self.probs, minlength=aug.n_states)
        for i in np.flatnonzero(np.abs(rows - 1.0) > tol):
            v, m = aug.states[i]
            out.append(f"distribution of {v}:{m} sums to {rows[i]!r}")
        group_mass = np.add.reduceat(self.probs, aug.group_start) if aug.n_edges else np.zeros(0)
        for g in np.flatnonzero(np.abs(group_mass - aug.group_factor) > tol):
            e = aug.group_start[g]
            v, m = aug.states[aug.src[e]]
            if aug.mdp.is_stochastic(v):
                u = aug.states[aug.dst[e]][0]
                out.append(
                    f"stochastic consistency violated at {v}:{m} -> {u}: "
                    f"{group_mass[g]!r} != {aug.group_factor[g]!r}"
                )
        return out

    def check(self, tol: float = 1e-9) -> "FrStrategy":
        problems = self.problems(tol)
        if problems:
            raise MdpError("; ".join(problems))
        return self

    def pruned(self, threshold: float = 1e-6) -> "FrStrategy":
        """Zero entries below ``threshold`` and renormalize each softmax group."""
        p = np.where(self.probs < threshold, 0.0, self.probs)
        aug = self.aug
        mass = np.add.reduceat(p, aug.group_start)
        mass_e = mass[aug.group_of]
        # keep groups that would vanish entirely
        keep = mass_e <= 0
        p = np.where(keep, self.probs, p * aug.group_factor[aug.group_of] / np.where(keep, 1.0, mass_e))
        return FrStrategy(aug, p)

    def chain(self, start: tuple[str, int] | None = None):
        from .markov import induced_chain

        return induced_chain(self, start)


def materialize_strategy(aug: Augmented, params):
    """Softmax raw parameters into an FR strategy.

    ``params`` may be a plain array or a tape :class:`~winmp.autodiff.Var`;
    in the latter case the returned probabilities are a Var too.
    """
    pv = params.value if isinstance(params, ad.Var) else np.asarray(params, dtype=float)
    if pv.shape != (aug.n_edges,):
        raise MdpError("parameter vector does not match the augmented edge count")
    if not np.all(np.isfinite(pv)):
        raise MdpError("non-finite strategy parameter")
    probs = ad.softmax_groups(params, aug.group_start, aug.group_factor)
    if isinstance(probs, ad.Var):
        return probs
    return FrStrategy(aug, probs)


def parse_prob(text: str) -> float:
    """Parse ``0.25`` or ``1/4``."""
    return float(Fraction(text)) if "/" in text else float(text)
