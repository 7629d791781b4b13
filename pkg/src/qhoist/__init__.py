"""Variable non-dependence and certified bounded-quantifier rewriting over finite models."""
from .nondep import FactBase, NonDepQuery, check_nondep, load_facts
from .rewrite import apply_rule, guard_context, simplify, verify_trace
from .semantics import FiniteModel, check_equivalent, load_model, meaning, satisfies, valid
from .syntax import Formula, Signature, VarId, VarTable, alpha_equal, parse, to_text

__version__ = "0.1.0"

__all__ = [
    "FactBase", "FiniteModel", "Formula", "NonDepQuery", "Signature", "VarId", "VarTable",
    "alpha_equal", "apply_rule", "check_equivalent", "check_nondep", "guard_context", "load_facts",
    "load_model", "meaning", "parse", "satisfies", "simplify", "to_text", "valid", "verify_trace",
]
