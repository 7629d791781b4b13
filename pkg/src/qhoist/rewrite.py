"""Certified rewrite rules for bounded quantifiers, with replayable traces.

A rule matches at a position, checks its syntactic side conditions, and
returns the rewritten node together with semantic *obligations*
(non-dependence queries and validity claims).  Obligations are discharged
syntactically, from a fact base, or by brute force on attached models; a
step is committed only when every obligation is discharged.

Rules are directed: the forward direction is the documented one, and
``reverse=True`` runs the other way where that makes sense.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .nondep import (
    FactBase, NonDepFact, NonDepQuery, check_nondep, conjoin_guards, covered, fact_to_json,
    validity_covered,
)
from .semantics import FiniteModel, check_equivalent, valid
from .syntax import (
    TRUE, And, BExists, BForall, BooleanTemplate, Eq, Exists, FolError, Forall, Formula, Implies,
    Not, Or, QuantifierPrefix, Truth, VarId, VarTable, alpha_equal, children, conjoin, conjuncts,
    free_vars, parse, positions, rename_free, replace_at, size, subformula, to_text, walk,
)


class RewriteError(FolError):
    """A rule could not be applied."""


class RuleMismatch(RewriteError):
    """The pattern does not match at the position."""


class FreenessError(RewriteError):
    """A syntactic side condition on free variables fails."""


class ObligationError(RewriteError):
    """A semantic obligation is neither asserted nor verified."""


class TraceError(FolError):
    """A trace file is malformed."""


@dataclass(frozen=True)
class Validity:
    formula: Formula

    def __str__(self) -> str:
        return f"valid: {self.formula}"


Obligation = NonDepQuery | Validity


# ---------------------------------------------------------------------------
# Bounded views and guard contexts


@dataclass(frozen=True)
class Bounded:
    """A bounded quantifier, either a first-class node or its desugared shape."""
    kind: str
    var: VarId
    guard: Formula
    body: Formula
    sugared: bool

    def rebind(self, new: VarId) -> Bounded | None:
        """Same quantifier over ``new``; None if ``new`` is free in it."""
        if new == self.var:
            return self
        node = self.build()
        if new in free_vars(node):
            return None
        m = {self.var: new}
        return Bounded(self.kind, new, rename_free(self.guard, m), rename_free(self.body, m), self.sugared)

    def build(self) -> Formula:
        return make_bounded(self.kind, self.var, self.guard, self.body, self.sugared)


def make_bounded(kind: str, var: VarId, guard: Formula, body: Formula, sugared: bool = True) -> Formula:
    if sugared:
        return BForall(var, guard, body) if kind == "forall" else BExists(var, guard, body)
    return Forall(var, Implies(guard, body)) if kind == "forall" else Exists(var, And(guard, body))


def as_bounded(f: Formula, sugared_only: bool = False) -> Bounded | None:
    if isinstance(f, BForall):
        return Bounded("forall", f.var, f.guard, f.body, True)
    if isinstance(f, BExists):
        return Bounded("exists", f.var, f.guard, f.body, True)
    if sugared_only:
        return None
    if isinstance(f, Forall) and isinstance(f.body, Implies):
        return Bounded("forall", f.var, f.body.left, f.body.right, False)
    if isinstance(f, Exists) and isinstance(f.body, And):
        return Bounded("exists", f.var, f.body.left, f.body.right, False)
    return None


@dataclass(frozen=True)
class GuardContext:
    """Guards known to hold wherever the value at a position matters.

    Collected from ``theta -> .`` (right side), ``theta & .`` (either side)
    and bodies of bounded quantifiers; every binder drops guards that
    mention its variable.  Outermost first.
    """
    guards: tuple[Formula, ...] = ()

    def conjuncts(self) -> list[Formula]:
        return [c for g in self.guards for c in conjuncts(g)]

    def contains(self, f: Formula) -> bool:
        return any(alpha_equal(f, c) for c in self.conjuncts())


def guard_context(f: Formula, path: Sequence[int]) -> GuardContext:
    guards: list[Formula] = []
    node = f
    for step in path:
        kids = children(node)
        if not 0 <= step < len(kids):
            raise IndexError(f"invalid position {tuple(path)}")
        if isinstance(node, And):
            guards.append(kids[1 - step])
        elif isinstance(node, Implies) and step == 1:
            guards.append(node.left)
        elif isinstance(node, (Exists, Forall, BForall, BExists)):
            guards = [g for g in guards if node.var not in free_vars(g)]
            if isinstance(node, (BForall, BExists)) and step == 1:
                guards.append(node.guard)
        node = kids[step]
    return GuardContext(tuple(guards))


# ---------------------------------------------------------------------------
# Rules


@dataclass(frozen=True)
class Match:
    after: Formula
    obligations: tuple[Obligation, ...] = ()
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Site:
    """Where a rule is applied: the node, its guard context and the whole formula."""
    node: Formula
    context: GuardContext
    whole: Formula


RuleFn = Callable[[Site, Mapping[str, Any], bool], Match]


@dataclass(frozen=True)
class Rule:
    name: str
    summary: str
    fn: RuleFn
    reversible: bool = True


RULES: dict[str, Rule] = {}


def _rule(name: str, summary: str, reversible: bool = True):
    def deco(fn: RuleFn) -> RuleFn:
        RULES[name] = Rule(name, summary, fn, reversible)
        return fn
    return deco


def _need(params: Mapping[str, Any], key: str, rule: str) -> Any:
    if key not in params:
        raise RuleMismatch(f"{rule} in reverse needs parameter {key!r}")
    return params[key]


def _free_check(ok: bool, message: str) -> None:
    if not ok:
        raise FreenessError(message)


def _nd(phi: Formula, x: VarId, theta: Formula) -> NonDepQuery:
    return NonDepQuery(phi, x, theta)


# Deduplication of a bounded quantifier whose guard is already asserted.

def _dedup(name: str, shape: type, kind: str) -> None:
    glyph = "&" if shape is And else "->"
    q = "exists" if kind == "exists" else "forall"

    def fn(site: Site, params: Mapping[str, Any], reverse: bool) -> Match:
        node = site.node
        if not isinstance(node, shape):
            raise RuleMismatch(f"{name} needs a {shape.__name__} node")
        if reverse:
            x = _need(params, "x", name)
            theta, phi = node.left, node.right
            return Match(shape(theta, make_bounded(kind, x, theta, phi)), (_nd(phi, x, theta),), {"x": x})
        sides = [(0, node.left, node.right)]
        if shape is And:
            sides.append((1, node.right, node.left))
        for bpos, other, b_node in [(1, node.left, node.right), (0, node.right, node.left)][: len(sides)]:
            b = as_bounded(b_node)
            if b and b.kind == kind and alpha_equal(b.guard, other):
                kids = [None, None]
                kids[bpos] = b.body
                kids[1 - bpos] = other
                return Match(shape(*kids), (_nd(b.body, b.var, b.guard),))
        raise RuleMismatch(f"{name} needs theta {glyph} {q} x in theta. phi")

    RULES[name] = Rule(name, f"theta {glyph} ({q} x in theta. phi) becomes theta {glyph} phi", fn)


_dedup("r_dedup_and_e", And, "exists")
_dedup("r_dedup_and_a", And, "forall")
_dedup("r_dedup_imp_a", Implies, "forall")
_dedup("r_dedup_imp_e", Implies, "exists")


def _flip_obligations(b: Bounded) -> tuple[Obligation, ...]:
    return (_nd(b.body, b.var, b.guard), Validity(Exists(b.var, b.guard)))


@_rule("r_flip", "bounded exists becomes bounded forall")
def _flip(site, params, reverse):
    b = as_bounded(site.node)
    want = "forall" if reverse else "exists"
    if not b or b.kind != want:
        raise RuleMismatch(f"r_flip needs a bounded {want}")
    other = "exists" if want == "forall" else "forall"
    return Match(make_bounded(other, b.var, b.guard, b.body, b.sugared), _flip_obligations(b))


def _neg_push(name: str, kind: str) -> None:
    def fn(site: Site, params: Mapping[str, Any], reverse: bool) -> Match:
        node = site.node
        if not reverse:
            b = as_bounded(node.arg) if isinstance(node, Not) else None
            if not b or b.kind != kind:
                raise RuleMismatch(f"{name} needs the negation of a bounded {kind}")
            return Match(make_bounded(kind, b.var, b.guard, Not(b.body), b.sugared), _flip_obligations(b))
        b = as_bounded(node)
        if not b or b.kind != kind or not isinstance(b.body, Not):
            raise RuleMismatch(f"{name} in reverse needs a bounded {kind} of a negation")
        inner = Bounded(kind, b.var, b.guard, b.body.arg, b.sugared)
        return Match(Not(inner.build()), _flip_obligations(inner))

    RULES[name] = Rule(name, f"negation moves inside a bounded {kind}", fn)


_neg_push("r_neg_push_e", "exists")
_neg_push("r_neg_push_a", "forall")


@_rule("r_dist_conj", "bounded forall distributes over a conjunction (reverse: contraction)")
def _dist(site, params, reverse):
    node = site.node
    if not reverse:
        b = as_bounded(node, sugared_only=True)
        if not b or b.kind != "forall" or not isinstance(b.body, And):
            raise RuleMismatch("r_dist_conj needs forall x in theta. (phi & psi)")
        return Match(And(make_bounded("forall", b.var, b.guard, b.body.left),
                         make_bounded("forall", b.var, b.guard, b.body.right)))
    if not isinstance(node, And):
        raise RuleMismatch("r_dist_conj in reverse needs a conjunction")
    left, right = as_bounded(node.left, True), as_bounded(node.right, True)
    if not (left and right and left.kind == right.kind == "forall"):
        raise RuleMismatch("r_dist_conj in reverse needs two bounded foralls")
    right = right.rebind(left.var)
    if right is None:
        raise FreenessError(f"{left.var} is free in the right conjunct")
    if not alpha_equal(left.guard, right.guard):
        raise RuleMismatch("r_dist_conj in reverse needs equal guards")
    return Match(make_bounded("forall", left.var, left.guard, And(left.body, right.body)))


# Hoisting through boolean templates and prefixes.

def _abstract(f: Formula, x: VarId, theta: Formula, kinds: Sequence[str], rule: str,
              ) -> tuple[BooleanTemplate, list[Formula], list[str | None]]:
    """Split ``f`` into a template whose leaves are bounded over ``x in theta`` or x-free."""
    def view(n: Formula) -> Bounded | None:
        b = as_bounded(n, sugared_only=True)
        if b is None or b.kind not in kinds:
            return None
        b = b.rebind(x)
        return b if b is not None and alpha_equal(b.guard, theta) else None

    template, leaves = BooleanTemplate.abstract(f, lambda n: view(n) is not None)
    phis: list[Formula] = []
    leaf_kinds: list[str | None] = []
    for leaf in leaves:
        b = view(leaf)
        if b is not None:
            phis.append(b.body)
            leaf_kinds.append(b.kind)
        elif x in free_vars(leaf):
            raise RuleMismatch(f"{rule}: leaf {leaf} mentions {x} outside a bounded quantifier over {theta}")
        else:
            phis.append(leaf)
            leaf_kinds.append(None)
    if not any(leaf_kinds):
        raise RuleMismatch(f"{rule}: no bounded quantifier over {x} in {theta} to pull out")
    return template, phis, leaf_kinds


def _first_bounded(f: Formula, kinds: Sequence[str]) -> Bounded | None:
    stack = [f]
    while stack:
        n = stack.pop()
        b = as_bounded(n, sugared_only=True)
        if b is not None and b.kind in kinds:
            return b
        if isinstance(n, (Not, And, Or, Implies)) or type(n).__name__ == "Iff":
            stack.extend(reversed(children(n)))
    return None


def _peel(f: Formula) -> tuple[QuantifierPrefix, Formula]:
    return QuantifierPrefix.split(f)


def _prefix_checks(x: VarId, theta: Formula, prefix: QuantifierPrefix, rule: str) -> None:
    _free_check(not (set(prefix.vars) & free_vars(theta)), f"{rule}: a prefix variable is free in {theta}")
    _free_check(x not in prefix.vars, f"{rule}: {x} is bound by the prefix")


def _pull_implication(site: Site, rule: str, with_prefix: bool) -> Match:
    node = site.node
    if not (isinstance(node, Implies) and isinstance(node.left, Exists)):
        raise RuleMismatch(f"{rule} needs (exists x theta) -> ...")
    x, theta = node.left.var, node.left.body
    prefix, matrix = _peel(node.right) if with_prefix else (QuantifierPrefix(), node.right)
    _prefix_checks(x, theta, prefix, rule)
    template, phis, _ = _abstract(matrix, x, theta, ("forall",), rule)
    obligations = tuple(_nd(p, x, theta) for p in phis)
    return Match(BForall(x, theta, prefix.apply(template.instantiate(phis))), obligations)


def _unpull(site: Site, rule: str, with_prefix: bool) -> Match:
    b = as_bounded(site.node, sugared_only=True)
    if not b or b.kind != "forall":
        raise RuleMismatch(f"{rule} in reverse needs forall x in theta. ...")
    x, theta = b.var, b.guard
    prefix, matrix = _peel(b.body) if with_prefix else (QuantifierPrefix(), b.body)
    _prefix_checks(x, theta, prefix, rule)
    template, leaves = BooleanTemplate.abstract(matrix, lambda n: False)
    wrapped = [BForall(x, theta, p) for p in leaves]
    obligations = tuple(_nd(p, x, theta) for p in leaves)
    return Match(Implies(Exists(x, theta), prefix.apply(template.instantiate(wrapped))), obligations)


@_rule("r_pull_bool", "(exists x theta) -> f(forall x in theta. phi_i) becomes forall x in theta. f(phi_i)")
def _pull_bool(site, params, reverse):
    return _unpull(site, "r_pull_bool", False) if reverse else _pull_implication(site, "r_pull_bool", False)


@_rule("r_pull_prefix", "(exists x theta) -> Qz f(forall x in theta. phi_i) becomes forall x in theta. Qz f(phi_i)")
def _pull_prefix(site, params, reverse):
    return _unpull(site, "r_pull_prefix", True) if reverse else _pull_implication(site, "r_pull_prefix", True)


@_rule("r_pull_prefix_mixed", "Qz f(bounded x in theta. phi_i) becomes bounded x in theta. Qz f(phi_i) "
       "when exists x theta is valid", reversible=False)
def _pull_mixed(site, params, reverse):
    if reverse:
        raise RuleMismatch("r_pull_prefix_mixed has no reverse direction")
    prefix, matrix = _peel(site.node)
    first = _first_bounded(matrix, ("forall", "exists"))
    if first is None:
        raise RuleMismatch("r_pull_prefix_mixed needs a bounded quantifier under the prefix")
    x, theta = first.var, first.guard
    _prefix_checks(x, theta, prefix, "r_pull_prefix_mixed")
    template, phis, kinds = _abstract(matrix, x, theta, ("forall", "exists"), "r_pull_prefix_mixed")
    outer = params.get("outer") or next(k for k in kinds if k)
    if outer not in ("forall", "exists"):
        raise RuleMismatch("outer must be 'forall' or 'exists'")
    obligations = tuple(_nd(p, x, theta) for p in phis) + (Validity(Exists(x, theta)),)
    return Match(make_bounded(outer, x, theta, prefix.apply(template.instantiate(phis))), obligations,
                 {"outer": outer})


@_rule("r_pull_exists", "forall x exists z (theta -> psi) becomes (exists x theta) -> exists z forall x in theta. psi")
def _pull_exists(site, params, reverse):
    node = site.node
    if reverse:
        if not (isinstance(node, Implies) and isinstance(node.left, Exists)):
            raise RuleMismatch("r_pull_exists in reverse needs (exists x theta) -> ...")
        x, theta = node.left.var, node.left.body
        zs, inner = [], node.right
        while isinstance(inner, Exists):
            zs.append(inner.var)
            inner = inner.body
        b = as_bounded(inner, sugared_only=True)
        if not b or b.kind != "forall" or b.var != x or not alpha_equal(b.guard, theta):
            raise RuleMismatch("r_pull_exists in reverse needs exists z. forall x in theta. psi")
        psi = b.body
    else:
        if not isinstance(node, Forall):
            raise RuleMismatch("r_pull_exists needs forall x. exists z. (theta -> psi)")
        x, zs, inner = node.var, [], node.body
        while isinstance(inner, Exists):
            zs.append(inner.var)
            inner = inner.body
        if not isinstance(inner, Implies):
            raise RuleMismatch("r_pull_exists needs forall x. exists z. (theta -> psi)")
        theta, psi = inner.left, inner.right
    _free_check(not (set(zs) & free_vars(theta)), "r_pull_exists: an existential variable is free in theta")
    _free_check(x not in zs, f"r_pull_exists: {x} is rebound in the block")
    block = QuantifierPrefix(tuple(("exists", z) for z in zs))
    lhs = Forall(x, block.apply(Implies(theta, psi)))
    rhs = Implies(Exists(x, theta), block.apply(BForall(x, theta, psi)))
    return Match(lhs if reverse else rhs, (_nd(psi, x, theta),))


@_rule("r_guard_drop", "a guard conjunct known from the context and free of x is dropped")
def _guard_drop(site, params, reverse):
    b = as_bounded(site.node)
    if b is None:
        raise RuleMismatch("r_guard_drop needs a bounded quantifier")
    parts = conjuncts(b.guard)
    if reverse:
        iota = _need(params, "iota", "r_guard_drop")
        _free_check(b.var not in free_vars(iota), f"r_guard_drop: {b.var} is free in {iota}")
        if not site.context.contains(iota):
            raise RuleMismatch(f"r_guard_drop: {iota} is not in the guard context")
        guard = And(iota, b.guard) if parts else iota
        return Match(make_bounded(b.kind, b.var, guard, b.body, b.sugared), (), {"iota": iota})
    candidates = [i for i, c in enumerate(parts) if b.var not in free_vars(c) and site.context.contains(c)]
    if "drop" in params:
        if params["drop"] not in candidates:
            raise RuleMismatch(f"r_guard_drop: conjunct {params['drop']} cannot be dropped")
        candidates = [params["drop"]]
    if not candidates:
        raise RuleMismatch("r_guard_drop: no guard conjunct is x-free and known from the context")
    i = candidates[0]
    rest = parts[:i] + parts[i + 1:]
    if rest:
        new = make_bounded(b.kind, b.var, conjoin(rest), b.body, b.sugared)
    else:
        new = Forall(b.var, b.body) if b.kind == "forall" else Exists(b.var, b.body)
    return Match(new, (), {"drop": i})


@_rule("r_simp", "(Q u in iota)... Qz f(forall x in eps. phi_i) becomes (Q u in iota)... forall x in eps. Qz f(phi_i)",
       reversible=False)
def _simp(site, params, reverse):
    if reverse:
        raise RuleMismatch("r_simp has no reverse direction")
    first = as_bounded(site.node, sugared_only=True)
    if first is None:
        raise RuleMismatch("r_simp needs a bounded quantifier chain")
    iota = first.guard
    chain: list[tuple[str, VarId]] = []
    cur: Formula = site.node
    while True:
        b = as_bounded(cur, sugared_only=True)
        if b is None or b.guard != iota:
            break
        chain.append((b.kind, b.var))
        cur = b.body
    # The innermost chain link must leave something to pull.
    prefix, matrix = _peel(cur)
    leaf = _first_bounded(matrix, ("forall",))
    if leaf is None:
        raise RuleMismatch("r_simp needs forall x in eps leaves under the chain")
    x, eps = leaf.var, leaf.guard
    binders = [u for _, u in chain] + list(prefix.vars) + [x]
    _free_check(len(set(binders)) == len(binders), "r_simp: binders are not distinct")
    _free_check(x not in free_vars(iota), f"r_simp: {x} is free in {iota}")
    _free_check(not (set(prefix.vars) & (free_vars(iota) | free_vars(eps))),
                "r_simp: a prefix variable is free in iota or eps")
    template, phis, _ = _abstract(matrix, x, eps, ("forall",), "r_simp")
    theta = And(iota, eps)
    obligations = tuple(_nd(p, x, theta) for p in phis) + (Validity(Exists(x, eps)),)
    body: Formula = BForall(x, eps, prefix.apply(template.instantiate(phis)))
    for kind, u in reversed(chain):
        body = make_bounded(kind, u, iota, body)
    return Match(body, obligations)


# Scoping equivalences; forward is miniscoping.

def _scope(n: int, outer: type, conn: type, summary: str, bounded_kind: str | None, side: str) -> None:
    """``side`` names where the x-free operand sits: 'left', 'right' or 'either'."""
    name = f"r_scope_{n}"

    def fn(site: Site, params: Mapping[str, Any], reverse: bool) -> Match:
        node = site.node
        if reverse:
            x = _need(params, "x", name)
            if n == 5:
                if not (isinstance(node, Implies) and isinstance(node.left, Exists) and node.left.var == x):
                    raise RuleMismatch(f"{name} in reverse needs (exists x psi) -> phi")
                _free_check(x not in free_vars(node.right), f"{name}: {x} is free in the consequent")
                return Match(Forall(x, Implies(node.left.body, node.right)), (), {"x": x})
            if not isinstance(node, conn):
                raise RuleMismatch(f"{name} in reverse needs a {conn.__name__} node")
            if isinstance(node.right, outer) and node.right.var == x and x not in free_vars(node.left):
                return Match(outer(x, conn(node.left, node.right.body)), (), {"x": x})
            if side == "either" and isinstance(node.left, outer) and node.left.var == x \
                    and x not in free_vars(node.right):
                return Match(outer(x, conn(node.left.body, node.right)), (), {"x": x})
            raise RuleMismatch(f"{name} in reverse: no quantifier over {x} to widen")
        if isinstance(node, outer) and isinstance(node.body, conn):
            x, a, b = node.var, node.body.left, node.body.right
        elif bounded_kind and as_bounded(node, sugared_only=True) and as_bounded(node).kind == bounded_kind:
            bb = as_bounded(node)
            x, a, b = bb.var, bb.guard, bb.body
        else:
            raise RuleMismatch(f"{name} needs {summary}")
        if n == 5:
            _free_check(x not in free_vars(b), f"{name}: {x} is free in the consequent")
            return Match(Implies(Exists(x, a), b))
        if x not in free_vars(a):
            return Match(conn(a, outer(x, b)))
        if side == "either" and x not in free_vars(b):
            return Match(conn(outer(x, a), b))
        raise FreenessError(f"{name}: {x} is free in both operands")

    RULES[name] = Rule(name, summary, fn)


_scope(1, Exists, And, "exists x (phi & psi) with an x-free side", "exists", "either")
_scope(2, Forall, Or, "forall x (phi | psi) with an x-free side", None, "either")
_scope(3, Exists, Implies, "exists x (phi -> psi) with x-free antecedent", None, "left")
_scope(4, Forall, Implies, "forall x (phi -> psi) with x-free antecedent", "forall", "left")
_scope(5, Forall, Implies, "forall x (psi -> phi) with x-free consequent", "forall", "right")


@_rule("r_wrap", "phi becomes forall x in theta. phi for x not free in phi")
def _wrap(site, params, reverse):
    if reverse:
        b = as_bounded(site.node)
        if not b or b.kind != "forall":
            raise RuleMismatch("r_wrap in reverse needs a bounded forall")
        _free_check(b.var not in free_vars(b.body), f"r_wrap: {b.var} is free in the body")
        return Match(b.body, (Validity(Exists(b.var, b.guard)),))
    x, theta = _need(params, "x", "r_wrap"), _need(params, "theta", "r_wrap")
    _free_check(x not in free_vars(site.node), f"r_wrap: {x} is free in the formula")
    return Match(BForall(x, theta, site.node), (Validity(Exists(x, theta)),), {"x": x, "theta": theta})


@_rule("r_instantiate", "forall x in theta. psi becomes psi with x renamed to w when theta[x:=w] is known",
       reversible=False)
def _instantiate(site, params, reverse):
    if reverse:
        raise RuleMismatch("r_instantiate has no reverse direction")
    b = as_bounded(site.node)
    if b is None:
        raise RuleMismatch("r_instantiate needs a bounded quantifier")
    x, theta = b.var, b.guard
    known = site.context.conjuncts()

    def witnessed(w: VarId) -> bool:
        return all(any(alpha_equal(c, k) for k in known) for c in conjuncts(rename_free(theta, {x: w})))

    if "witness" in params:
        w = params["witness"]
        if w == x or not witnessed(w):
            raise RuleMismatch(f"r_instantiate: the context does not give theta at {w}")
    else:
        w = None
        for g in reversed(site.context.guards):
            for cand in sorted(free_vars(g) - {x}):
                if witnessed(cand):
                    w = cand
                    break
            if w is not None:
                break
        if w is None:
            raise RuleMismatch("r_instantiate: no witness for the guard in the context")
    proviso = conjoin_guards(theta, [c for c in known if x not in free_vars(c)])
    return Match(rename_free(b.body, {x: w}), (_nd(b.body, x, proviso),), {"witness": w})


# ---------------------------------------------------------------------------
# Application and discharge


def measure(f: Formula) -> tuple[int, int, int]:
    """(bounded-quantifier nodes, size, total binder scope); committed steps decrease it."""
    bounded = scope = 0
    for node in walk(f):
        if isinstance(node, (BForall, BExists)):
            bounded += 1
        if isinstance(node, (Exists, Forall, BForall, BExists)):
            scope += sum(size(k) for k in children(node))
    return bounded, size(f), scope


@dataclass(frozen=True)
class Discharge:
    obligation: Obligation
    how: str  # syntactic | facts | models
    facts: tuple[NonDepFact, ...] = ()

    def to_json(self) -> dict:
        ob = self.obligation
        if isinstance(ob, NonDepQuery):
            desc = {"kind": "nondep", "formula": to_text(ob.phi), "var": str(ob.var), "theta": to_text(ob.theta)}
        else:
            desc = {"kind": "valid", "formula": to_text(ob.formula)}
        return {**desc, "how": self.how}


def _trivially_valid(f: Formula) -> bool:
    if f == TRUE:
        return True
    if isinstance(f, Exists):
        body = f.body
        if body == TRUE:
            return True
        if isinstance(body, Eq) and f.var in (body.left, body.right):
            return True
    if isinstance(f, Eq) and f.left == f.right:
        return True
    return False


def check_obligation(model: FiniteModel, ob: Obligation) -> bool:
    if isinstance(ob, NonDepQuery):
        return check_nondep(model, ob.phi, ob.var, ob.theta).holds
    return valid(model, ob.formula)


def discharge(obligations: Sequence[Obligation], facts: FactBase | None = None,
              models: Mapping[str, FiniteModel] | None = None) -> list[Discharge]:
    """Discharge every obligation or raise :class:`ObligationError`.

    Order: syntactic, fact base, attached models.  When models are attached
    every non-syntactic obligation is also checked on each of them, so an
    asserted fact that is false on a model is an error.
    """
    facts = facts or FactBase()
    models = models or {}
    out: list[Discharge] = []
    for ob in obligations:
        if isinstance(ob, NonDepQuery) and ob.var not in free_vars(ob.phi):
            out.append(Discharge(ob, "syntactic"))
            continue
        if isinstance(ob, Validity) and _trivially_valid(ob.formula):
            out.append(Discharge(ob, "syntactic"))
            continue
        if isinstance(ob, NonDepQuery):
            used = covered(ob, facts.nondep)
            record = Discharge(ob, "facts", tuple(used)) if used is not None else None
        else:
            fact = validity_covered(ob.formula, facts.validity)
            record = Discharge(ob, "facts") if fact is not None else None
        if models:
            for name, model in models.items():
                if not check_obligation(model, ob):
                    source = "asserted fact" if record else "obligation"
                    raise ObligationError(f"{source} {ob} fails on model {name}")
            record = record or Discharge(ob, "models")
        if record is None:
            raise ObligationError(f"obligation {ob} is neither asserted nor verifiable without models")
        out.append(record)
    return out


def match_rule(rule: str, formula: Formula, path: Sequence[int], params: Mapping[str, Any] | None = None,
               reverse: bool = False) -> Match:
    """Pattern match and side conditions only; no obligations are discharged."""
    if rule not in RULES:
        raise RewriteError(f"unknown rule {rule!r}")
    entry = RULES[rule]
    if reverse and not entry.reversible:
        raise RuleMismatch(f"{rule} has no reverse direction")
    try:
        node = subformula(formula, path)
    except IndexError as exc:
        raise RewriteError(str(exc)) from None
    site = Site(node, guard_context(formula, path), formula)
    m = entry.fn(site, dict(params or {}), reverse)
    return Match(replace_at(formula, path, m.after), m.obligations, {**dict(params or {}), **m.params})


@dataclass
class Step:
    rule: str
    path: tuple[int, ...]
    before: Formula
    after: Formula
    reverse: bool = False
    params: dict[str, Any] = field(default_factory=dict)
    discharged: list[Discharge] = field(default_factory=list)
    status: str = "committed"
    reason: str = ""

    @property
    def facts_used(self) -> list[NonDepFact]:
        seen: list[NonDepFact] = []
        for d in self.discharged:
            for f in d.facts:
                if f not in seen:
                    seen.append(f)
        return seen

    @property
    def validity_used(self) -> list[Formula]:
        return [d.obligation.formula for d in self.discharged if isinstance(d.obligation, Validity) and d.how == "facts"]


def apply_rule(rule: str, formula: Formula, path: Sequence[int], facts: FactBase | None = None,
               models: Mapping[str, FiniteModel] | None = None, params: Mapping[str, Any] | None = None,
               reverse: bool = False) -> tuple[Formula, Step]:
    m = match_rule(rule, formula, path, params, reverse)
    records = discharge(m.obligations, facts, models)
    step = Step(rule, tuple(path), formula, m.after, reverse, dict(m.params), records)
    return m.after, step


# ---------------------------------------------------------------------------
# Driver


PRIORITY: tuple[tuple[str, bool], ...] = (
    ("r_dedup_and_e", False), ("r_dedup_and_a", False), ("r_dedup_imp_a", False), ("r_dedup_imp_e", False),
    ("r_instantiate", False),
    ("r_simp", False),
    ("r_pull_prefix", False), ("r_pull_prefix_mixed", False),
    ("r_pull_bool", False),
    ("r_guard_drop", False),
    ("r_dist_conj", True),
    ("r_scope_1", False), ("r_scope_2", False), ("r_scope_3", False), ("r_scope_4", False), ("r_scope_5", False),
)


@dataclass
class RewriteTrace:
    start: Formula
    end: Formula
    steps: list[Step] = field(default_factory=list)
    budget_exhausted: bool = False
    names: dict[str, int] = field(default_factory=dict)

    @property
    def committed(self) -> list[Step]:
        return [s for s in self.steps if s.status == "committed"]

    def to_json(self) -> dict:
        return {
            "start": to_text(self.start),
            "end": to_text(self.end),
            "vars": self.names or _names(self.start, self.end, *[s.after for s in self.steps]),
            "budget_exhausted": self.budget_exhausted,
            "steps": [_step_json(s) for s in self.steps],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")


def _names(*formulas: Formula) -> dict[str, int]:
    out: dict[str, int] = {}
    for f in formulas:
        for node in walk(f):
            vs = []
            if hasattr(node, "args"):
                vs = node.args
            elif isinstance(node, Eq):
                vs = (node.left, node.right)
            elif hasattr(node, "var"):
                vs = (node.var,)
            for v in vs:
                out.setdefault(str(v), v.index)
    return out


def _param_json(v: Any) -> Any:
    if isinstance(v, VarId):
        return {"var": str(v)}
    if isinstance(v, Formula):
        return {"formula": to_text(v)}
    return v


def _param_from_json(v: Any, table: VarTable) -> Any:
    if isinstance(v, dict) and set(v) == {"var"}:
        return table.get(v["var"])
    if isinstance(v, dict) and set(v) == {"formula"}:
        return parse(v["formula"], None, table)
    return v


def _step_json(s: Step) -> dict:
    return {
        "rule": s.rule,
        "direction": "reverse" if s.reverse else "forward",
        "path": list(s.path),
        "params": {k: _param_json(v) for k, v in s.params.items()},
        "facts_used": [fact_to_json(f) for f in s.facts_used],
        "validity_used": [to_text(f) for f in s.validity_used],
        "obligations": [d.to_json() for d in s.discharged],
        "before": to_text(s.before),
        "after": to_text(s.after),
        "status": s.status,
        "reason": s.reason,
    }


def trace_from_json(data: Mapping[str, Any]) -> RewriteTrace:
    try:
        table = VarTable(data.get("vars") or {})
        start = parse(data["start"], None, table)
        end = parse(data["end"], None, table)
        steps = []
        for s in data["steps"]:
            steps.append(Step(
                rule=s["rule"], path=tuple(s["path"]),
                before=parse(s["before"], None, table), after=parse(s["after"], None, table),
                reverse=s.get("direction", "forward") == "reverse",
                params={k: _param_from_json(v, table) for k, v in s.get("params", {}).items()},
                status=s.get("status", "committed"), reason=s.get("reason", ""),
            ))
    except (KeyError, TypeError) as exc:
        raise TraceError(f"malformed trace: {exc}") from exc
    return RewriteTrace(start, end, steps, bool(data.get("budget_exhausted", False)), table.as_dict())


def load_trace(path: str | Path) -> RewriteTrace:
    with open(path, encoding="utf-8") as fh:
        try:
            return trace_from_json(json.load(fh))
        except json.JSONDecodeError as exc:
            raise TraceError(f"{path}: {exc}") from exc


def simplify(formula: Formula, facts: FactBase | None = None, models: Mapping[str, FiniteModel] | None = None,
             budget: int = 100, check_steps: bool = True,
             priority: Sequence[tuple[str, bool]] = PRIORITY) -> tuple[Formula, RewriteTrace]:
    """Rewrite to a fixpoint (or ``budget`` committed steps).

    Rules are tried in priority order and positions innermost first; only
    steps that strictly decrease :func:`measure` are taken.  With
    ``check_steps`` and attached models each step is also checked for
    equivalence before it is committed.  Rejected steps are logged in the
    trace and not retried.
    """
    models = dict(models or {})
    trace = RewriteTrace(formula, formula)
    rejected: set[tuple[str, tuple[int, ...], Formula]] = set()
    current = formula
    while True:
        step = _next_step(current, facts, models, check_steps, priority, rejected, trace)
        if step is None:
            break
        if len(trace.committed) >= budget:
            trace.budget_exhausted = True
            break
        trace.steps.append(step)
        current = step.after
    trace.end = current
    return current, trace


def _next_step(current: Formula, facts, models, check_steps, priority, rejected, trace) -> Step | None:
    base = measure(current)
    paths = list(positions(current))
    for rule, reverse in priority:
        for path in paths:
            key = (rule, path, current)
            if key in rejected:
                continue
            try:
                m = match_rule(rule, current, path, None, reverse)
            except RewriteError:
                continue
            if m.after == current or measure(m.after) >= base:
                continue
            try:
                records = discharge(m.obligations, facts, models)
            except ObligationError as exc:
                rejected.add(key)
                trace.steps.append(Step(rule, path, current, m.after, reverse, dict(m.params), [],
                                        "rejected", str(exc)))
                continue
            if check_steps:
                bad = [n for n, model in models.items() if not check_equivalent(model, current, m.after)]
                if bad:
                    rejected.add(key)
                    trace.steps.append(Step(rule, path, current, m.after, reverse, dict(m.params), records,
                                            "rejected", f"not equivalent on {', '.join(bad)}"))
                    continue
            return Step(rule, path, current, m.after, reverse, dict(m.params), records)
    return None


# ---------------------------------------------------------------------------
# Trace verification


@dataclass
class StepReport:
    index: int
    rule: str
    continuity: bool
    replay: bool
    obligations: dict[str, bool] = field(default_factory=dict)
    equivalent: dict[str, bool] = field(default_factory=dict)
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.continuity and self.replay and all(self.obligations.values()) and all(self.equivalent.values())


@dataclass
class TraceReport:
    steps: list[StepReport]
    end_matches: bool
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.end_matches and all(s.ok for s in self.steps)

    def first_failure(self) -> StepReport | None:
        return next((s for s in self.steps if not s.ok), None)


def verify_trace(trace: RewriteTrace, models: Mapping[str, FiniteModel]) -> TraceReport:
    """Replay every committed step and check it on each model.

    Per step: the step starts where the previous one ended, re-applying the
    rule reproduces the recorded result exactly, each obligation holds on
    each model, and before/after are equivalent on each model.
    """
    reports: list[StepReport] = []
    warnings: list[str] = []
    current = trace.start
    for i, step in enumerate(trace.steps):
        if step.status != "committed":
            continue
        rep = StepReport(i, step.rule, continuity=step.before == current, replay=False)
        if not rep.continuity:
            rep.messages.append("step does not start from the previous result")
        try:
            m = match_rule(step.rule, step.before, step.path, step.params, step.reverse)
            rep.replay = m.after == step.after
            if not rep.replay:
                rep.messages.append(f"replay gives {to_text(m.after)}")
            obligations = m.obligations
        except RewriteError as exc:
            rep.messages.append(f"replay failed: {exc}")
            obligations = ()
        for name, model in models.items():
            rep.obligations[name] = all(check_obligation(model, ob) for ob in obligations)
            rep.equivalent[name] = check_equivalent(model, step.before, step.after).holds
        if not models and obligations:
            warnings.append(f"step {i}: obligations taken on assertion (no models attached)")
        reports.append(rep)
        current = step.after
    return TraceReport(reports, current == trace.end, warnings)
