"""Variable non-dependence on finite models.

``phi`` is non-dependent of ``x`` provided ``theta`` in a model when changing
only the value of ``x`` never changes the truth of ``phi``, as long as
``theta`` holds before and after the change.  Three routes decide it:

* :func:`check_nondep` enumerates pairs (assignment, new x-value) directly;
* :func:`check_nondep_plain_equiv` checks validity of ``exists x phi <-> forall x phi``
  (only for the unconditioned case);
* :func:`check_nondep_subst` checks validity of the substitution form
  ``(theta[x:=y] & theta[x:=z]) -> (phi[x:=y] <-> phi[x:=z])`` for fresh y, z.

Satisfaction only depends on free variables, so enumerating assignments over
``free(phi) | free(theta) | {x}`` decides the property for all of ``M^omega``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .semantics import Assignment, FiniteModel, make_window, meaning, valid
from .syntax import (
    TRUE, And, BExists, BForall, Exists, FolError, Forall, Formula, Iff, Implies, Not, Or,
    Signature, VarId, VarTable, alpha_equal, conjoin, conjuncts, free_vars, fresh_after,
    parse, substitute, to_text,
)


@dataclass(frozen=True)
class NonDepQuery:
    phi: Formula
    var: VarId
    theta: Formula = TRUE

    def __str__(self) -> str:
        base = f"{self.phi} non-dependent of {self.var}"
        return base if self.theta == TRUE else f"{base} provided {self.theta}"


@dataclass(frozen=True)
class NonDepVerdict:
    holds: bool
    counterexample: tuple[Assignment, int] | None = None

    def __post_init__(self) -> None:
        if self.holds == (self.counterexample is not None):
            raise ValueError("a verdict fails exactly when it carries a counterexample")

    def __bool__(self) -> bool:
        return self.holds


def check_nondep(model: FiniteModel, phi: Formula, x: VarId, theta: Formula = TRUE) -> NonDepVerdict:
    """Decide non-dependence of ``phi`` on ``x`` provided ``theta``.

    The counterexample ``(a, b)`` is the least one, ordered by the assignment
    (lexicographically over the index-sorted window) and then by ``b``.
    """
    window = make_window(free_vars(phi) | free_vars(theta) | {x})
    t = meaning(model, theta, window).table
    f = meaning(model, phi, window).table
    axis = window.index(x)
    n = model.domain_size
    bad = np.zeros(t.shape + (n,), dtype=bool)
    for b in range(n):
        t_b = np.take(t, [b], axis=axis)
        f_b = np.take(f, [b], axis=axis)
        bad[..., b] = t & t_b & (f ^ f_b)
    hits = np.argwhere(bad)
    if len(hits) == 0:
        return NonDepVerdict(True)
    first = hits[0]
    return NonDepVerdict(False, (Assignment(window, tuple(int(i) for i in first[:-1])), int(first[-1])))


def check_nondep_plain_equiv(model: FiniteModel, phi: Formula, x: VarId) -> bool:
    return valid(model, Iff(Exists(x, phi), Forall(x, phi)))


def subst_form(phi: Formula, x: VarId, theta: Formula = TRUE) -> Formula:
    y, z = fresh_after(phi, theta, extra=[x], count=2)
    return Implies(And(substitute(theta, x, y), substitute(theta, x, z)),
                   Iff(substitute(phi, x, y), substitute(phi, x, z)))


def check_nondep_subst(model: FiniteModel, phi: Formula, x: VarId, theta: Formula = TRUE) -> bool:
    return valid(model, subst_form(phi, x, theta))


def formulations(phi: Formula, x: VarId, theta: Formula = TRUE) -> list[tuple[Formula, Formula]]:
    """The four meaning equalities that are each equivalent to non-dependence."""
    return [
        (And(theta, BExists(x, theta, phi)), And(theta, phi)),
        (And(theta, BForall(x, theta, phi)), And(theta, phi)),
        (Implies(theta, BForall(x, theta, phi)), Implies(theta, phi)),
        (Implies(theta, BExists(x, theta, phi)), Implies(theta, phi)),
    ]


def formulation_verdicts(model: FiniteModel, phi: Formula, x: VarId, theta: Formula = TRUE) -> list[bool]:
    from .semantics import check_equivalent
    out = [check_nondep(model, phi, x, theta).holds]
    out.extend(check_equivalent(model, lhs, rhs).holds for lhs, rhs in formulations(phi, x, theta))
    return out


# ---------------------------------------------------------------------------
# Facts


class FactError(FolError):
    """Malformed facts file."""


@dataclass(frozen=True)
class NonDepFact:
    query: NonDepQuery
    status: str = "asserted"
    models: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.status not in ("asserted", "verified"):
            raise ValueError(f"fact status must be 'asserted' or 'verified', got {self.status!r}")
        if self.status == "verified" and not self.models:
            raise ValueError("a verified fact names at least one model")


@dataclass(frozen=True)
class ValidityFact:
    formula: Formula
    status: str = "asserted"
    models: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"valid: {self.formula}"


Fact = NonDepFact | ValidityFact


def verify_fact(fact: NonDepFact, models: Mapping[str, FiniteModel]) -> NonDepFact:
    """Check ``fact`` on every model; returns it as verified or raises."""
    for name, model in models.items():
        verdict = check_nondep(model, fact.query.phi, fact.query.var, fact.query.theta)
        if not verdict:
            a, b = verdict.counterexample
            raise FactError(f"{fact.query} fails on {name}: {a} with {fact.query.var}->{b}")
    return NonDepFact(fact.query, "verified", tuple(models))


def covered(query: NonDepQuery, facts: Iterable[NonDepFact]) -> list[NonDepFact] | None:
    """Facts that justify ``query`` through the closure properties, or None.

    Discharged for free: ``x`` not free in ``phi``; ``phi`` a conjunct of
    ``theta``; ``phi`` of the form ``exists x`` / ``forall x``.  Otherwise a
    fact applies when its formula is alpha-equal to ``phi`` and its proviso's
    conjuncts are among the query's (monotonicity).  Boolean combinations are
    split (closedness), and ``exists y`` / ``forall y`` are looked through when
    y is not free in the proviso.
    """
    facts = list(facts)
    used: list[NonDepFact] = []
    if _covered(query.phi, query.var, query.theta, conjuncts(query.theta), facts, used):
        return used
    return None


def _covered(phi: Formula, x: VarId, theta: Formula, theta_parts: list[Formula],
             facts: list[NonDepFact], used: list[NonDepFact]) -> bool:
    if x not in free_vars(phi):
        return True
    if any(alpha_equal(phi, part) for part in theta_parts):
        return True
    for fact in facts:
        q = fact.query
        if q.var == x and alpha_equal(q.phi, phi):
            needed = conjuncts(q.theta)
            if all(any(alpha_equal(n, p) for p in theta_parts) for n in needed):
                used.append(fact)
                return True
    if isinstance(phi, (Exists, Forall, BExists, BForall)):
        if phi.var == x:
            return True
        if phi.var in free_vars(theta):
            return False
        parts = [phi.body] if isinstance(phi, (Exists, Forall)) else [phi.guard, phi.body]
        return all(_covered(p, x, theta, theta_parts, facts, used) for p in parts)
    if isinstance(phi, Not):
        return _covered(phi.arg, x, theta, theta_parts, facts, used)
    if isinstance(phi, (And, Or, Implies, Iff)):
        return (_covered(phi.left, x, theta, theta_parts, facts, used)
                and _covered(phi.right, x, theta, theta_parts, facts, used))
    return False


def validity_covered(formula: Formula, facts: Iterable[ValidityFact]) -> ValidityFact | None:
    for fact in facts:
        if alpha_equal(fact.formula, formula):
            return fact
    return None


@dataclass
class FactBase:
    nondep: list[NonDepFact] = field(default_factory=list)
    validity: list[ValidityFact] = field(default_factory=list)

    def add(self, fact: Fact) -> None:
        if isinstance(fact, NonDepFact):
            self.nondep.append(fact)
        else:
            self.validity.append(fact)

    def __iter__(self):
        yield from self.nondep
        yield from self.validity

    def __len__(self) -> int:
        return len(self.nondep) + len(self.validity)


def fact_to_json(fact: Fact) -> dict:
    if isinstance(fact, NonDepFact):
        return {"formula": to_text(fact.query.phi), "var": str(fact.query.var),
                "theta": to_text(fact.query.theta), "status": fact.status, "models": list(fact.models)}
    return {"formula": to_text(fact.formula), "var": None, "theta": None,
            "status": fact.status, "models": list(fact.models)}


def fact_from_json(entry: Mapping, sig: Signature | None, table: VarTable) -> Fact:
    try:
        formula = parse(entry["formula"], sig, table)
        status = entry.get("status", "asserted")
        models = tuple(entry.get("models", ()))
        var = entry.get("var")
        if var is None:
            return ValidityFact(formula, status, models)
        theta = parse(entry["theta"], sig, table) if entry.get("theta") else TRUE
        return NonDepFact(NonDepQuery(formula, table.get(var), theta), status, models)
    except (KeyError, TypeError, ValueError) as exc:
        raise FactError(f"malformed fact entry {entry!r}: {exc}") from exc


def load_facts(path: str | Path, sig: Signature | None = None, table: VarTable | None = None) -> FactBase:
    """Facts file: a JSON list of ``{formula, var, theta, status, models}``.

    An entry with ``var`` null records validity of ``formula`` instead.
    """
    table = table if table is not None else VarTable()
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FactError(f"{path}: {exc}") from exc
    if not isinstance(data, list):
        raise FactError(f"{path}: expected a JSON list of facts")
    base = FactBase()
    for entry in data:
        base.add(fact_from_json(entry, sig, table))
    return base


def save_facts(facts: Sequence[Fact], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([fact_to_json(f) for f in facts], fh, indent=1)
        fh.write("\n")


def conjoin_guards(theta: Formula, extra: Sequence[Formula]) -> Formula:
    """``theta`` strengthened by the given guards (duplicates dropped)."""
    parts = conjuncts(theta)
    for g in extra:
        if not any(alpha_equal(g, p) for p in parts):
            parts.append(g)
    return conjoin(parts)
