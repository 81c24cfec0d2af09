"""Exact and numerical evaluation of G-Wishart normalising constants."""

from gwishart.evaluators import (
    LogValue,
    WishartSpec,
    log_constant,
    log_marginal_likelihood,
    log_normalising_constant,
)
from gwishart.graph import (
    ChordalCompletion,
    CliqueSequence,
    Graph,
    chordal_completion,
    classify,
    classify_graph,
    clique_sequence,
    mcs_order,
    prime_decomposition,
)
from gwishart.montecarlo import McConfig, mc_log_constant

__all__ = [
    "ChordalCompletion",
    "CliqueSequence",
    "Graph",
    "LogValue",
    "McConfig",
    "WishartSpec",
    "chordal_completion",
    "classify",
    "classify_graph",
    "clique_sequence",
    "log_constant",
    "log_marginal_likelihood",
    "log_normalising_constant",
    "mc_log_constant",
    "mcs_order",
    "prime_decomposition",
]

__version__ = "0.1.0"
