"""Robustness measure of non-Markovianity for depolarizing and dephasing evolutions."""
__version__ = "0.1.0"

from .charfun import CharacteristicFunction, build, from_constants, from_texts, mix
from .exprparse import differentiate, evaluate, parse, to_text
from .family import ChannelFamily, depolarizing, dephasing
from .gaps import extract_gaps
from .markov import classify_tractable, is_markovian, lower_bound_pstar
from .solver import SolveOptions, cross_check, measure_general

__all__ = [
    "CharacteristicFunction", "ChannelFamily", "SolveOptions", "build", "classify_tractable",
    "cross_check", "dephasing", "depolarizing", "differentiate", "evaluate", "extract_gaps",
    "from_constants", "from_texts", "is_markovian", "lower_bound_pstar", "measure_general",
    "mix", "parse", "to_text",
]
