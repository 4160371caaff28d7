"""Davis-Putnam refutations certified by an interactive protocol over a prime field."""
from .arith import UnivariatePoly, delta, eval_B, gamma, partial_eval_B, shape_check
from .dp import Kind, Macrostep, Trace, build_schedule, choose_order, full_cleanup, full_resolution, run
from .estimators import DavisPutnamSolver, InteractiveCertifier
from .field import FieldElement, PrimeField, is_prime, pick_protocol_prime, sample_prime
from .formula import Formula, parse_dimacs, preprocess
from .protocol import ProtocolParams, ProtocolResult, parse_adversary, run_protocol

__all__ = [
    "DavisPutnamSolver", "FieldElement", "Formula", "InteractiveCertifier", "Kind", "Macrostep",
    "PrimeField", "ProtocolParams", "ProtocolResult", "Trace", "UnivariatePoly", "build_schedule",
    "choose_order", "delta", "eval_B", "full_cleanup", "full_resolution", "gamma", "is_prime",
    "parse_adversary", "parse_dimacs", "partial_eval_B", "pick_protocol_prime", "preprocess",
    "run", "run_protocol", "sample_prime", "shape_check",
]
__version__ = "0.1.0"
