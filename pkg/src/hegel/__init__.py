"""Component-based synthesis of refinement-typed programs.

The package synthesizes loop-free compositions of annotated library
components that satisfy a refinement-typed query, representing the
candidate space as a constrained tree automaton and shrinking it with
entailment-based pruning and subtyping-based merging.
"""

from .syntax import (
    BaseType, Library, Query, Qualifier, RefinementType, Term,
    alpha_equivalent, anf_valid, call_count, qual_subst,
)
from .parser import ParseError, parse_library, parse_query, parse_term
from .printer import pretty
from .entailment import (
    EntailmentQuery, Oracle, OracleStats, OracleVerdict, fallback_prove,
    interpret_context,
)

__all__ = [
    "BaseType", "Library", "Query", "Qualifier", "RefinementType", "Term",
    "alpha_equivalent", "anf_valid", "call_count", "qual_subst",
    "ParseError", "parse_library", "parse_query", "parse_term", "pretty",
    "EntailmentQuery", "Oracle", "OracleStats", "OracleVerdict",
    "fallback_prove", "interpret_context",
]
