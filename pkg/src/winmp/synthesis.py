"""Strategy improvement by gradient descent on the window value."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .evals import WindowEval
from .markov import tarjan_bsccs
from .mdp import Augmented, FrStrategy, Mdp, MdpError, MemoryAllocation, materialize_strategy
from .window import evaluate_chain, wval_bscc

__all__ = [
    "SynthConfig",
    "SynthResult",
    "AdamState",
    "adam_step",
    "objective",
    "init_params_loguniform",
    "synthesize",
    "evaluate_strategy",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    steps: int = 1000
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    restarts: int = 1
    seed: int = 0
    memory: int = 1
    alloc: MemoryAllocation | None = None
    init_a: float = 1e-3
    init_b: float = 10.0
    clip_norm: float = 1e3
    target: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if not 0 < self.init_a < self.init_b:
            raise ValueError("log-uniform init needs 0 < a < b")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")

    def echo(self) -> dict:
        out = asdict(self)
        out["alloc"] = None if self.alloc is None else {v: list(m) for v, m in self.alloc.alloc.items()}
        return out


@dataclass
class SynthResult:
    strategy: FrStrategy
    params: np.ndarray
    wval: float
    bscc: int
    restart: int
    trace: list[tuple[int, int, float]]
    config: dict
    events: list[str] = field(default_factory=list)
    restart_best: list[float] = field(default_factory=list)

    def trace_csv(self) -> str:
        lines = ["step,restart,wval"]
        lines += [f"{s},{r},{v!r}" for s, r, v in self.trace]
        return "\n".join(lines) + "\n"


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grad, state: AdamState, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam descent step; returns ``(params, state)``.

    A non-finite gradient leaves parameters and moments untouched.
    """
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape:
        raise ValueError("gradient shape does not match parameters")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient")
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grad
    v = beta2 * state.v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


def init_params_loguniform(n: int, seed=None, a: float = 1e-3, b: float = 1.0) -> np.ndarray:
    """``exp(u)`` with ``u ~ Uniform[ln a, ln b]``, independently per parameter."""
    if not 0 < a < b:
        raise ValueError("log-uniform init needs 0 < a < b")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return np.exp(rng.uniform(math.log(a), math.log(b), size=n))


def objective(aug: Augmented, ev: WindowEval, d: int, theta: np.ndarray, method: str = "dp", deadline=None):
    """Window value of the best BSCC under raw parameters ``theta``.

    Returns ``(value, bscc_index, gradient)``.  ``ev`` must already be bound
    to the payoffs of ``aug``.
    """
    tape = ad.Tape()
    th = tape.var(theta)
    probs = materialize_strategy(aug, th)
    chain = FrStrategy(aug, probs.value).chain()
    values = [wval_bscc(b, ev, d, probs=probs, method=method, deadline=deadline) for b in tarjan_bsccs(chain)]
    best = int(np.argmin([float(v.value) for v in values]))
    grad = tape.backward(values[best])[th]
    return float(values[best].value), best, grad


def _run_restart(mdp: Mdp, ev: WindowEval, d: int, cfg: SynthConfig, restart: int):
    alloc = cfg.alloc or MemoryAllocation.full(mdp, cfg.memory)
    aug = Augmented(mdp, alloc)
    ev = ev.bind(mdp.payoffs)
    rng = np.random.default_rng(cfg.seed + restart)
    theta = init_params_loguniform(aug.n_edges, rng, cfg.init_a, cfg.init_b)
    state = AdamState.zeros(aug.n_edges)
    best = (math.inf, theta.copy(), 0)
    trace, events = [], []
    for step in range(cfg.steps):
        try:
            value, bscc, grad = objective(aug, ev, d, theta)
        except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
            events.append(f"restart {restart} aborted at step {step}: {exc}")
            log.warning(events[-1])
            break
        if not math.isfinite(value):
            events.append(f"restart {restart} aborted at step {step}: non-finite value")
            break
        trace.append((step, restart, value))
        if value < best[0]:
            best = (value, theta.copy(), bscc)
        if cfg.target is not None and value <= cfg.target:
            break
        if not np.all(np.isfinite(grad)):
            events.append(f"restart {restart} step {step}: non-finite gradient, step skipped")
            continue
        norm = float(np.linalg.norm(grad))
        if norm > cfg.clip_norm:
            grad = grad * (cfg.clip_norm / norm)
        theta, state = adam_step(theta, grad, state, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    return best, trace, events


def synthesize(mdp: Mdp, ev: WindowEval, d: int, config: SynthConfig | None = None) -> SynthResult:
    """Search an FR strategy with small window value.

    Every restart samples log-uniform parameters from ``seed + restart`` and
    runs ``steps`` Adam steps on the value of the currently best BSCC,
    keeping the best parameters seen.  The overall best restart wins; ties
    go to the lower restart index.
    """
    cfg = config or SynthConfig()
    mdp.check()
    if d < 1:
        raise ValueError("window length must be at least 1")
    ev.check_arity(mdp.n_payoffs)
    workers = max(1, min(cfg.workers, cfg.restarts))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_run_restart, *zip(*[(mdp, ev, d, cfg, r) for r in range(cfg.restarts)])))
    else:
        runs = [_run_restart(mdp, ev, d, cfg, r) for r in range(cfg.restarts)]
    trace, events, per_restart = [], [], []
    winner = None
    for r, (best, tr, ev_log) in enumerate(runs):
        trace += tr
        events += ev_log
        per_restart.append(best[0])
        if best[0] < math.inf and (winner is None or best[0] < winner[0][0]):
            winner = (best, r)
    if winner is None:
        raise RuntimeError("every restart aborted: " + "; ".join(events))
    (value, theta, bscc), restart = winner
    alloc = cfg.alloc or MemoryAllocation.full(mdp, cfg.memory)
    strategy = materialize_strategy(Augmented(mdp, alloc), theta)
    return SynthResult(strategy, theta, value, bscc, restart, trace, cfg.echo(), events, per_restart)


def evaluate_strategy(mdp: Mdp, strategy: FrStrategy, ev: WindowEval, d: int, method: str = "dp") -> dict:
    """Value per BSCC, the best BSCC and global values of a stored strategy."""
    if strategy.aug.mdp is not mdp and (
        strategy.aug.mdp.vertices != mdp.vertices or strategy.aug.mdp.edges != mdp.edges
    ):
        raise MdpError("strategy was built for a different model")
    strategy.check()
    report = evaluate_chain(strategy, ev, d, method)
    aug = strategy.aug
    return {
        "wval": report.value,
        "best_bscc": report.best,
        "bscc_values": report.values,
        "bscc_states": [[f"{aug.states[i][0]}:{aug.states[i][1]}" for i in b.states] for b in report.bsccs],
        "gval": report.gvals[report.best],
        "gvals": report.gvals,
    }
