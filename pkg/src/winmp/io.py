"""Line-oriented text formats for MDPs and FR strategies.

MDP::

    mdp payoffs=2
    vertex A N pay=1,0
    vertex s S pay=0,0
    edge A s
    edge s A prob=1/2

Strategy::

    strategy memory=2
    alloc A 0,1
    move A:0 -> A:1 0.45000000000000001
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .mdp import (
    STOCHASTIC,
    Augmented,
    FrStrategy,
    Mdp,
    MdpError,
    MemoryAllocation,
    parse_prob,
    validate_mdp,
)

__all__ = [
    "FormatError",
    "parse_mdp",
    "format_mdp",
    "read_mdp",
    "write_mdp",
    "parse_strategy",
    "format_strategy",
    "read_strategy",
    "write_strategy",
]

_ID = r"[A-Za-z0-9_]+"
_VERTEX = re.compile(rf"vertex\s+({_ID})\s+([NS])\s+pay=(\S+)\Z")
_EDGE = re.compile(rf"edge\s+({_ID})\s+({_ID})(?:\s+prob=(\S+))?\Z")
_MOVE = re.compile(rf"move\s+({_ID}):(\d+)\s*->\s*({_ID}):(\d+)\s+(\S+)\Z")
_ALLOC = re.compile(rf"alloc\s+({_ID})\s+(\d+(?:,\d+)*)\Z")


class FormatError(MdpError):
    """A text file does not follow the expected format."""


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def parse_mdp(text: str) -> Mdp:
    k = None
    verts, kinds, pays = [], [], []
    edges, prob = [], {}
    for no, line in _lines(text):
        if k is None:
            m = re.fullmatch(r"mdp\s+payoffs=(\d+)", line)
            if not m:
                raise FormatError(f"line {no}: expected 'mdp payoffs=<k>' header")
            k = int(m.group(1))
            if k < 1:
                raise FormatError(f"line {no}: need at least one payoff function")
            continue
        if m := _VERTEX.match(line):
            v, kind, pay = m.groups()
            try:
                vec = [int(x) for x in pay.split(",")]
            except ValueError:
                raise FormatError(f"line {no}: payoffs must be integers") from None
            if len(vec) != k:
                raise FormatError(f"line {no}: vertex {v} has {len(vec)} payoffs, expected {k}")
            if v in verts:
                raise FormatError(f"line {no}: duplicate vertex {v}")
            verts.append(v)
            kinds.append(kind)
            pays.append(vec)
        elif m := _EDGE.match(line):
            a, b, p = m.groups()
            edges.append((a, b))
            if p is not None:
                try:
                    prob.setdefault(a, {})[b] = parse_prob(p)
                except (ValueError, ZeroDivisionError):
                    raise FormatError(f"line {no}: bad probability {p!r}") from None
        else:
            raise FormatError(f"line {no}: cannot parse {line!r}")
    if k is None:
        raise FormatError("empty MDP file")
    kind_of = dict(zip(verts, kinds))
    for a, b in edges:
        if a in kind_of and (kind_of[a] == STOCHASTIC) != (b in prob.get(a, {})):
            raise FormatError(f"edge {a} -> {b}: prob= is required exactly on stochastic sources")
    mdp = Mdp(tuple(verts), tuple(kinds), tuple(edges), prob, np.array(pays, dtype=np.int64).reshape(len(verts), k))
    problems = validate_mdp(mdp)
    if problems:
        raise FormatError("; ".join(problems))
    return mdp


def format_mdp(mdp: Mdp) -> str:
    out = [f"mdp payoffs={mdp.n_payoffs}"]
    for v, kind, pay in zip(mdp.vertices, mdp.kind, mdp.payoffs):
        out.append(f"vertex {v} {kind} pay={','.join(str(int(x)) for x in pay)}")
    for a, b in mdp.edges:
        if mdp.is_stochastic(a):
            out.append(f"edge {a} {b} prob={mdp.prob[a][b]!r}")
        else:
            out.append(f"edge {a} {b}")
    return "\n".join(out) + "\n"


def read_mdp(path) -> Mdp:
    return parse_mdp(Path(path).read_text(encoding="utf-8"))


def write_mdp(mdp: Mdp, path) -> None:
    Path(path).write_text(format_mdp(mdp), encoding="utf-8")


def parse_strategy(text: str, mdp: Mdp, tol: float = 1e-9) -> FrStrategy:
    """Parse a strategy for ``mdp``; missing moves have probability zero."""
    size = None
    alloc: dict[str, tuple[int, ...]] = {}
    moves = []
    for no, line in _lines(text):
        if size is None:
            m = re.fullmatch(r"strategy\s+memory=(\d+)", line)
            if not m:
                raise FormatError(f"line {no}: expected 'strategy memory=<K>' header")
            size = int(m.group(1))
            continue
        if m := _ALLOC.match(line):
            v = m.group(1)
            if v not in mdp.index:
                raise FormatError(f"line {no}: unknown vertex {v}")
            alloc[v] = tuple(int(x) for x in m.group(2).split(","))
        elif m := _MOVE.match(line):
            a, ma, b, mb, p = m.groups()
            try:
                moves.append((no, (a, int(ma)), (b, int(mb)), parse_prob(p)))
            except (ValueError, ZeroDivisionError):
                raise FormatError(f"line {no}: bad probability {p!r}") from None
        else:
            raise FormatError(f"line {no}: cannot parse {line!r}")
    if size is None:
        raise FormatError("empty strategy file")
    for v in mdp.vertices:
        alloc.setdefault(v, tuple(range(size)))
    aug = Augmented(mdp, MemoryAllocation(size, alloc))
    probs = np.zeros(aug.n_edges)
    for no, a, b, p in moves:
        ia, ib = aug.state_index.get(a), aug.state_index.get(b)
        if ia is None or ib is None or (ia, ib) not in aug.edge_index:
            raise FormatError(f"line {no}: move {a[0]}:{a[1]} -> {b[0]}:{b[1]} is not an augmented edge")
        probs[aug.edge_index[(ia, ib)]] = p
    return FrStrategy(aug, probs).check(tol)


def format_strategy(strategy: FrStrategy, prune: float | None = None) -> str:
    """Render a strategy; probabilities get 17 significant digits.

    With ``prune`` set, entries below it are dropped and groups renormalized.
    """
    if prune is not None:
        strategy = strategy.pruned(prune)
    aug = strategy.aug
    out = [f"strategy memory={aug.alloc.size}"]
    for v in aug.mdp.vertices:
        out.append(f"alloc {v} {','.join(str(m) for m in aug.alloc[v])}")
    for (a, b), p in zip(aug.edge_list(), strategy.probs):
        if p > 0:
            out.append(f"move {a[0]}:{a[1]} -> {b[0]}:{b[1]} {p:.17g}")
    return "\n".join(out) + "\n"


def read_strategy(path, mdp: Mdp) -> FrStrategy:
    return parse_strategy(Path(path).read_text(encoding="utf-8"), mdp)


def write_strategy(strategy: FrStrategy, path, prune: float | None = None) -> None:
    Path(path).write_text(format_strategy(strategy, prune), encoding="utf-8")
