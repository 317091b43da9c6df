"""Synthesis of finite-memory randomized strategies for window mean-payoff
objectives in Markov decision processes."""
from .benchgen import gen_example1, gen_gadget, gen_ring3, optimal_ring_strategy
from .estimator import WindowStrategySynthesizer
from .evals import DecomposableEval, WindowEval, parse_eval
from .io import parse_mdp, parse_strategy, read_mdp, read_strategy, write_mdp, write_strategy
from .mdp import Augmented, FrStrategy, Mdp, MdpError, MemoryAllocation, build_augmented, materialize_strategy
from .synthesis import SynthConfig, SynthResult, evaluate_strategy, synthesize
from .window import evaluate_chain, wval_bscc, wval_strategy

__version__ = "0.1.0"

__all__ = [
    "Augmented",
    "DecomposableEval",
    "FrStrategy",
    "Mdp",
    "MdpError",
    "MemoryAllocation",
    "SynthConfig",
    "SynthResult",
    "WindowEval",
    "WindowStrategySynthesizer",
    "build_augmented",
    "evaluate_chain",
    "evaluate_strategy",
    "gen_example1",
    "gen_gadget",
    "gen_ring3",
    "materialize_strategy",
    "optimal_ring_strategy",
    "parse_eval",
    "parse_mdp",
    "parse_strategy",
    "read_mdp",
    "read_strategy",
    "synthesize",
    "write_mdp",
    "write_strategy",
    "wval_bscc",
    "wval_strategy",
]
