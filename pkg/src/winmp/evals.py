"""Evaluation functions over window mean payoffs and their decompositions.

A family object is the raw ``Eval`` (callable on a vector of window mean
payoffs).  ``family.decompose(d, payoffs)`` returns the
:class:`DecomposableEval` triple used by the DP evaluator: representatives
are integer vectors of accumulated payoffs, saturated at per-dimension caps
chosen so that the evaluation of a full window is unchanged.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "WindowEval",
    "IntervalIndicator",
    "ThresholdShortfall",
    "L1TargetWithPenalty",
    "MaxSum",
    "ZeroThresholdIndicator",
    "AbsoluteValue",
    "DecomposableEval",
    "parse_eval",
    "decomposability_check",
]

# slack for threshold comparisons made on floating window averages
_TOL = 1e-9


def _num(text: str) -> Fraction:
    text = text.strip()
    if not text:
        raise ValueError("empty number")
    return Fraction(text)


def _fmt(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else (str(float(x)) if float(x) == x else f"{x.numerator}/{x.denominator}")


class WindowEval:
    """Base class of the built-in evaluation families."""

    #: number of payoff functions the family expects (None = any)
    arity: int | None = None

    def __call__(self, wmp) -> float:
        return float(self.values(np.atleast_2d(np.asarray(wmp, dtype=float)))[0])

    def values(self, wmp: np.ndarray) -> np.ndarray:
        """Vectorized evaluation of a ``(n, k)`` array of window averages."""
        raise NotImplementedError

    def finalize(self, sums: np.ndarray, d: int) -> np.ndarray:
        """Evaluation of ``(n, k)`` integer window sums of length ``d``."""
        return self.values(sums / d)

    def caps(self, d: int, k: int) -> list[int | None]:
        """Saturation cap per dimension (None: keep exact sums)."""
        return [None] * k

    def bind(self, payoffs: np.ndarray) -> "WindowEval":
        """Specialize to a payoff table; most families need nothing."""
        return self

    def spec(self) -> str:
        raise NotImplementedError

    def check_arity(self, k: int) -> None:
        if self.arity is not None and self.arity != k:
            raise ValueError(f"{self.spec()} expects {self.arity} payoff functions, model has {k}")

    def decompose(self, d: int, payoffs: np.ndarray) -> "DecomposableEval":
        return DecomposableEval(self.bind(np.asarray(payoffs)), d, payoffs)

    def __repr__(self):
        return f"{type(self).__name__}({self.spec()!r})"


class IntervalIndicator(WindowEval):
    """0 when every window average lies in its interval, else 1."""

    def __init__(self, bounds: Sequence[tuple[float, float]]):
        self.bounds = [(Fraction(lo), Fraction(hi)) for lo, hi in bounds]
        if any(lo > hi for lo, hi in self.bounds):
            raise ValueError("interval with lo > hi")
        self.arity = len(self.bounds)
        self._lo = np.array([float(lo) for lo, _ in self.bounds])
        self._hi = np.array([float(hi) for _, hi in self.bounds])

    def values(self, wmp):
        inside = np.all((wmp >= self._lo) & (wmp <= self._hi), axis=1)
        return np.where(inside, 0.0, 1.0)

    def caps(self, d, k):
        # any sum above hi*d is outside; floor(hi*d)+1 is the first such integer
        return [max(0, math.floor(hi * d) + 1) for _, hi in self.bounds]

    def spec(self):
        return "interval:" + ",".join(f"{_fmt(lo)}..{_fmt(hi)}" for lo, hi in self.bounds)


class ThresholdShortfall(WindowEval):
    """Normalized shortfall below a common bound ``b``:
    ``sum_i max(0, b - P_i) / (k * b)``.
    """

    def __init__(self, bound):
        self.bound = Fraction(bound)
        if self.bound <= 0:
            raise ValueError("threshold bound must be positive")
        self._b = float(self.bound)

    def values(self, wmp):
        k = wmp.shape[1]
        return np.maximum(0.0, self._b - wmp).sum(axis=1) / (k * self._b)

    def caps(self, d, k):
        return [math.ceil(self.bound * d)] * k

    def spec(self):
        return f"threshold:{_fmt(self.bound)}"


class L1TargetWithPenalty(WindowEval):
    """L1 distance to a target vector if all averages are positive, else a penalty."""

    def __init__(self, targets: Sequence[float], penalty: float):
        self.targets = [Fraction(t) for t in targets]
        self.penalty = Fraction(penalty)
        self.arity = len(self.targets)
        self._t = np.array([float(t) for t in self.targets])

    def values(self, wmp):
        dist = np.abs(wmp - self._t).sum(axis=1)
        return np.where(np.all(wmp > 0, axis=1), dist, float(self.penalty))

    def spec(self):
        return f"l1target:{','.join(_fmt(t) for t in self.targets)};penalty={_fmt(self.penalty)}"


class MaxSum(WindowEval):
    """``sum_i (max Pay_i - P_i)``; the maxima come from the payoff table."""

    def __init__(self, pay_max: Sequence[float] | None = None):
        self.pay_max = None if pay_max is None else np.asarray(pay_max, dtype=float)

    def bind(self, payoffs):
        if self.pay_max is not None:
            return self
        return MaxSum(np.asarray(payoffs).max(axis=0))

    def values(self, wmp):
        if self.pay_max is None:
            raise ValueError("maxsum needs payoff maxima; call bind(payoffs) first")
        return (self.pay_max - wmp).sum(axis=1)

    def spec(self):
        return "maxsum"


class ZeroThresholdIndicator(WindowEval):
    """0 if every average reaches its threshold, else ``penalty``."""

    def __init__(self, thresholds: Sequence, penalty=1):
        self.thresholds = [Fraction(c) for c in thresholds]
        self.penalty = Fraction(penalty)
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")
        self.arity = len(self.thresholds)
        self._c = np.array([float(c) for c in self.thresholds])

    def values(self, wmp):
        ok = np.all(wmp >= self._c - _TOL, axis=1)
        return np.where(ok, 0.0, float(self.penalty))

    def finalize(self, sums, d):
        need = np.array([math.ceil(c * d) for c in self.thresholds])
        return np.where(np.all(sums >= need, axis=1), 0.0, float(self.penalty))

    def caps(self, d, k):
        return [max(0, math.ceil(c * d)) for c in self.thresholds]

    def spec(self):
        return f"gadget:{','.join(_fmt(c) for c in self.thresholds)};t={_fmt(self.penalty)}"


class AbsoluteValue(WindowEval):
    """``sum_i |P_i|``; with one payoff this is the absolute window average."""

    def values(self, wmp):
        return np.abs(wmp).sum(axis=1)

    def spec(self):
        return "abs"


class DecomposableEval:
    """The representative triple for one family, horizon and payoff table.

    Representatives are integer vectors; ``update`` adds a state's payoff
    and saturates at the caps, ``evaluate`` applies the family to full
    windows.  Caps are dropped on any dimension with a negative payoff,
    where saturation would not commute with later decrements.
    """

    def __init__(self, family: WindowEval, d: int, payoffs: np.ndarray):
        if d < 1:
            raise ValueError("window length must be at least 1")
        payoffs = np.asarray(payoffs, dtype=np.int64)
        if payoffs.ndim == 1:
            payoffs = payoffs[:, None]
        k = payoffs.shape[1]
        family.check_arity(k)
        self.family = family
        self.d = d
        self.k = k
        lo_pay = np.minimum(payoffs.min(axis=0, initial=0), 0)
        hi_pay = np.maximum(payoffs.max(axis=0, initial=0), 0)
        caps = family.caps(d, k)
        self.caps = np.array(
            [c if c is not None and lo_pay[i] >= 0 else np.iinfo(np.int64).max for i, c in enumerate(caps)],
            dtype=np.int64,
        )
        self.lo = d * lo_pay
        self.hi = np.minimum(d * hi_pay, self.caps)
        width = self.hi - self.lo + 1
        if math.prod(int(w) for w in width) >= 2**62:
            raise OverflowError("representative space too large to pack")
        self.width = width
        self.radix = np.concatenate([[1], np.cumprod(width[:-1])]).astype(np.int64)
        self.size = int(math.prod(int(w) for w in width))

    def initial(self) -> np.ndarray:
        return np.zeros(self.k, dtype=np.int64)

    def update(self, reps: np.ndarray, pay: np.ndarray) -> np.ndarray:
        return np.minimum(reps + pay, self.caps)

    def of_counts(self, counts: np.ndarray, payoffs: np.ndarray) -> np.ndarray:
        """Representative of an occupation vector (counts per state)."""
        return np.minimum(counts @ np.asarray(payoffs, dtype=np.int64), self.caps)

    def evaluate(self, reps: np.ndarray) -> np.ndarray:
        return self.family.finalize(np.atleast_2d(reps), self.d)

    def pack(self, reps: np.ndarray) -> np.ndarray:
        return (reps - self.lo) @ self.radix

    def unpack(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        return (codes[:, None] // self.radix) % self.width + self.lo


def parse_eval(text: str) -> WindowEval:
    """Parse an evaluation spec string.

    Accepted forms: ``interval:lo1..hi1,lo2..hi2``, ``threshold:b``,
    ``l1target:t1,t2;penalty=q``, ``maxsum``, ``gadget:c1,c2;t=T`` and
    ``abs``.  Numbers may be decimals or fractions ``a/b``.
    """
    text = text.strip()
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    try:
        if name == "interval":
            bounds = []
            for part in rest.split(","):
                lo, sep, hi = part.partition("..")
                if not sep:
                    raise ValueError(f"interval bound {part!r} lacks '..'")
                bounds.append((_num(lo), _num(hi)))
            return IntervalIndicator(bounds)
        if name == "threshold":
            return ThresholdShortfall(_num(rest))
        if name == "l1target":
            targets, _, opt = rest.partition(";")
            key, _, val = opt.partition("=")
            if key.strip() != "penalty":
                raise ValueError("l1target needs ';penalty=<q>'")
            return L1TargetWithPenalty([_num(t) for t in targets.split(",")], _num(val))
        if name == "maxsum" and not rest:
            return MaxSum()
        if name == "abs" and not rest:
            return AbsoluteValue()
        if name == "gadget":
            cs, _, opt = rest.partition(";")
            penalty = Fraction(1)
            if opt:
                key, _, val = opt.partition("=")
                if key.strip() != "t":
                    raise ValueError("gadget option must be 't=<t>'")
                penalty = _num(val)
            return ZeroThresholdIndicator([_num(c) for c in cs.split(",")], penalty)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad eval spec {text!r}: {exc}") from None
    raise ValueError(f"unknown eval spec {text!r}")


def _compositions(total: int, parts: int):
    """All vectors of ``parts`` non-negative ints summing to ``total``."""
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield out


def decomposability_check(
    family: WindowEval,
    d: int,
    payoffs=None,
    raw: Callable | None = None,
    n_states: int = 3,
    trials: int = 3,
    max_pay: int = 6,
    seed: int = 0,
    decomposed: DecomposableEval | None = None,
) -> bool:
    """Brute-force both decomposition laws over all occupation vectors.

    For every occupation vector ``x`` of length ``d`` the representative must
    evaluate like the raw function on the window averages, and for every
    shorter ``x`` and state ``v`` the representative of ``x + e_v`` must equal
    the update of ``r(x)`` by ``v``.  Payoff tables are ``payoffs`` if given,
    else ``trials`` random tables over ``n_states`` states.
    """
    raw = family if raw is None else raw
    if payoffs is not None:
        table = np.asarray(payoffs, dtype=np.int64)
        tables = [table[:, None] if table.ndim == 1 else table]
    else:
        rng = np.random.default_rng(seed)
        k = family.arity or 2
        tables = [rng.integers(0, max_pay + 1, size=(n_states, k)) for _ in range(trials)]
    for pay in tables:
        dec = decomposed if decomposed is not None else family.decompose(d, pay)
        bound = dec.family
        n = pay.shape[0]
        for t in range(0, d + 1):
            for x in _compositions(t, n):
                x = np.array(x, dtype=np.int64)
                rep = dec.of_counts(x, pay)
                if t == d:
                    wmp = (x @ pay) / d
                    direct = float(raw(wmp) if raw is not family else bound(wmp))
                    if not math.isclose(float(dec.evaluate(rep)[0]), direct, rel_tol=1e-12, abs_tol=1e-12):
                        return False
                    continue
                for v in range(n):
                    y = x.copy()
                    y[v] += 1
                    if not np.array_equal(dec.of_counts(y, pay), dec.update(rep, pay[v])):
                        return False
    return True
