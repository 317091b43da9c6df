"""scikit-learn style wrapper around strategy synthesis."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .evals import WindowEval, parse_eval
from .io import parse_mdp
from .mdp import FrStrategy, Mdp, MdpError
from .synthesis import SynthConfig, evaluate_strategy, synthesize

__all__ = ["WindowStrategySynthesizer", "check_mdp", "check_eval"]


def check_mdp(mdp) -> Mdp:
    """Accept an :class:`Mdp`, MDP text or a path to an MDP file; validate it."""
    if isinstance(mdp, Mdp):
        return mdp.check()
    if isinstance(mdp, Path) or (isinstance(mdp, str) and "\n" not in mdp and Path(mdp).is_file()):
        return parse_mdp(Path(mdp).read_text(encoding="utf-8"))
    if isinstance(mdp, str):
        return parse_mdp(mdp)
    raise TypeError(f"expected an Mdp, MDP text or a file path, got {type(mdp).__name__}")


def check_eval(ev, k: int | None = None) -> WindowEval:
    ev = parse_eval(ev) if isinstance(ev, str) else ev
    if not isinstance(ev, WindowEval):
        raise TypeError("eval must be a spec string or a WindowEval")
    if k is not None:
        ev.check_arity(k)
    return ev


class WindowStrategySynthesizer(BaseEstimator):
    """Finite-memory randomized strategy minimizing the expected window value.

    ``fit(mdp)`` runs gradient-based strategy improvement and stores the best
    strategy found.  ``score`` returns the negated window value of the fitted
    strategy (greater is better), ``evaluate`` a full report.

    Parameters
    ----------
    eval : str or WindowEval
        Evaluation function, e.g. ``"threshold:4.25"``.
    window : int
        Window length d.
    memory : int
        Memory states allocated to every vertex.
    steps, restarts, lr, init_a, init_b, random_state
        Optimizer settings; restart ``r`` draws from seed ``random_state + r``.

    Attributes
    ----------
    strategy_ : FrStrategy
    wval_ : float
    result_ : SynthResult
    """

    def __init__(
        self,
        eval="maxsum",
        window=8,
        memory=1,
        steps=1000,
        restarts=1,
        lr=0.1,
        init_a=1e-3,
        init_b=10.0,
        random_state=0,
        target=None,
    ):
        self.eval = eval
        self.window = window
        self.memory = memory
        self.steps = steps
        self.restarts = restarts
        self.lr = lr
        self.init_a = init_a
        self.init_b = init_b
        self.random_state = random_state
        self.target = target

    def _config(self) -> SynthConfig:
        if not isinstance(self.window, (int, np.integer)) or self.window < 1:
            raise ValueError(f"window must be a positive integer, got {self.window!r}")
        return SynthConfig(
            steps=int(self.steps),
            restarts=int(self.restarts),
            lr=float(self.lr),
            memory=int(self.memory),
            init_a=float(self.init_a),
            init_b=float(self.init_b),
            seed=int(self.random_state),
            target=self.target,
        )

    def fit(self, mdp, y=None):
        mdp = check_mdp(mdp)
        ev = check_eval(self.eval, mdp.n_payoffs)
        self.result_ = synthesize(mdp, ev, int(self.window), self._config())
        self.mdp_ = mdp
        self.strategy_ = self.result_.strategy
        self.wval_ = self.result_.wval
        self.trace_ = np.array([v for _, _, v in self.result_.trace])
        return self

    def evaluate(self, mdp=None, strategy: FrStrategy | None = None) -> dict:
        check_is_fitted(self, "strategy_")
        mdp = self.mdp_ if mdp is None else check_mdp(mdp)
        strategy = self.strategy_ if strategy is None else strategy
        if strategy.aug.mdp.vertices != mdp.vertices:
            raise MdpError("fitted strategy does not belong to this model")
        return evaluate_strategy(mdp, strategy, check_eval(self.eval, mdp.n_payoffs), int(self.window))

    def score(self, mdp=None, y=None) -> float:
        return -self.evaluate(mdp)["wval"]
