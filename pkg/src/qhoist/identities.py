"""Named, checkable identities about non-dependence and bounded quantifiers.

Each identity takes *slots* (formulas, variables, templates, prefixes),
derives its side conditions and its claims, and is checked on one finite
model.  Side conditions that fail give the verdict ``unmet``, which is kept
apart from ``fails`` (conditions hold, claim broken).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .nondep import check_nondep, check_nondep_subst, formulation_verdicts
from .semantics import (
    FiniteModel, assignments, check_equivalent, check_subset, make_window, override, satisfies, valid,
)
from .syntax import (
    TRUE, And, BExists, BForall, BooleanTemplate, Exists, FolError, Forall, Formula, Iff,
    Implies, Not, Or, QuantifierPrefix, VarId, free_vars, substitute,
)


class IdentityError(FolError):
    """Unknown identity or bad slots."""


# ---------------------------------------------------------------------------
# Conditions and claims


@dataclass(frozen=True)
class Condition:
    label: str
    kind: str  # syntactic | nondep | valid
    ok: bool | None = None
    query: tuple[Formula, VarId, Formula] | None = None
    formula: Formula | None = None

    def evaluate(self, model: FiniteModel) -> bool:
        if self.kind == "syntactic":
            return bool(self.ok)
        if self.kind == "nondep":
            return check_nondep(model, *self.query).holds
        return valid(model, self.formula)


def syntactic(label: str, ok: bool) -> Condition:
    return Condition(label, "syntactic", ok=ok)


def nondep_cond(label: str, phi: Formula, x: VarId, theta: Formula = TRUE) -> Condition:
    return Condition(label, "nondep", query=(phi, x, theta))


def valid_cond(label: str, formula: Formula) -> Condition:
    return Condition(label, "valid", formula=formula)


@dataclass(frozen=True)
class Claim:
    label: str
    kind: str  # eq | sub | nondep | agree
    lhs: Formula | None = None
    rhs: Formula | None = None
    query: tuple[Formula, VarId, Formula] | None = None
    check: Callable[[FiniteModel], tuple[bool, Any]] | None = None

    def evaluate(self, model: FiniteModel) -> tuple[bool, Any]:
        if self.kind == "eq":
            r = check_equivalent(model, self.lhs, self.rhs)
            return r.holds, r.counterexample
        if self.kind == "sub":
            r = check_subset(model, self.lhs, self.rhs)
            return r.holds, r.counterexample
        if self.kind == "nondep":
            v = check_nondep(model, *self.query)
            return v.holds, v.counterexample
        return self.check(model)


def eq(label: str, lhs: Formula, rhs: Formula) -> Claim:
    return Claim(label, "eq", lhs=lhs, rhs=rhs)


def sub(label: str, lhs: Formula, rhs: Formula) -> Claim:
    return Claim(label, "sub", lhs=lhs, rhs=rhs)


def nondep_claim(label: str, phi: Formula, x: VarId, theta: Formula = TRUE) -> Claim:
    return Claim(label, "nondep", query=(phi, x, theta))


@dataclass(frozen=True)
class Identity:
    name: str
    summary: str
    required: tuple[str, ...]
    build: Callable[[Mapping[str, Any]], tuple[list[Condition], list[Claim]]]
    optional: Mapping[str, Any] = field(default_factory=dict)

    def instantiate(self, slots: Mapping[str, Any]) -> tuple[list[Condition], list[Claim]]:
        missing = [s for s in self.required if s not in slots]
        if missing:
            raise IdentityError(f"{self.name} needs slots {', '.join(missing)}")
        full = {**self.optional, **slots}
        if "template" in full and "phis" in full:
            arity = full["template"].arity
            if len(full["phis"]) != arity:
                raise IdentityError(f"{self.name}: template has {arity} holes but {len(full['phis'])} formulas given")
        if "kinds" in full and "phis" in full and len(full["kinds"]) != len(full["phis"]):
            raise IdentityError(f"{self.name}: need one quantifier kind per formula")
        return self.build(full)


@dataclass(frozen=True)
class IdentityResult:
    name: str
    status: str  # holds | fails | unmet
    conditions: dict[str, bool]
    claims: dict[str, bool]
    counterexample: Any = None
    failed_claim: str | None = None

    def __bool__(self) -> bool:
        return self.status == "holds"

    @property
    def unmet(self) -> list[str]:
        return [k for k, v in self.conditions.items() if not v]


CATALOG: dict[str, Identity] = {}
ALIASES = {"prop-B": "bounded-forall-conjunction", "prop-h": "exists-forall-flip", "prop-C": "pull-bool"}


def _register(name: str, summary: str, required: tuple[str, ...], optional: Mapping[str, Any] | None = None):
    def deco(fn):
        CATALOG[name] = Identity(name, summary, required, fn, dict(optional or {}))
        return fn
    return deco


def lookup(name: str) -> Identity:
    key = ALIASES.get(name, name)
    if key not in CATALOG:
        raise IdentityError(f"unknown identity {name!r}")
    return CATALOG[key]


def check_identity(name: str, model: FiniteModel, slots: Mapping[str, Any], force: bool = False) -> IdentityResult:
    """Check one identity on ``model``.

    With ``force`` the claims are evaluated even when side conditions fail;
    the status is then ``fails`` or ``holds`` on the claims alone, and the
    condition table records which conditions were missing.
    """
    ident = lookup(name)
    conditions, claims = ident.instantiate(slots)
    cond = {c.label: c.evaluate(model) for c in conditions}
    if not all(cond.values()) and not force:
        return IdentityResult(ident.name, "unmet", cond, {})
    results: dict[str, bool] = {}
    first = None
    for claim in claims:
        ok, cex = claim.evaluate(model)
        results[claim.label] = ok
        if not ok and first is None:
            first = (claim.label, cex)
    if first is None:
        return IdentityResult(ident.name, "holds", cond, results)
    return IdentityResult(ident.name, "fails", cond, results, first[1], first[0])


# ---------------------------------------------------------------------------
# Builders


def bounded(kind: str, var: VarId, guard: Formula, body: Formula) -> Formula:
    return BForall(var, guard, body) if kind == "forall" else BExists(var, guard, body)


def _nd(s, phi_key="phi"):
    return nondep_cond(f"{phi_key} non-dependent of x provided theta", s[phi_key], s["x"], s["theta"])


def _each_nd(phis, x, theta, proviso="theta") -> list[Condition]:
    return [nondep_cond(f"phi{i + 1} non-dependent of x provided {proviso}", p, x, theta) for i, p in enumerate(phis)]


def _ex_theta(s) -> Condition:
    return valid_cond("exists x theta is valid", Exists(s["x"], s["theta"]))


@_register("nondep-formulations", "the five formulations of non-dependence agree", ("phi", "x"), {"theta": TRUE})
def _formulations(s):
    def check(model):
        verdicts = formulation_verdicts(model, s["phi"], s["x"], s["theta"])
        return len(set(verdicts)) == 1, None if len(set(verdicts)) == 1 else f"verdicts {verdicts}"
    return [], [Claim("five formulations agree", "agree", check=check)]


@_register("exists-negation-complement", "bounded exists of the negation is the complement relative to exists x theta",
           ("phi", "theta", "x"))
def _complement(s):
    x, t, p = s["x"], s["theta"], s["phi"]
    return [_nd(s)], [eq("complement", BExists(x, t, Not(p)), And(Exists(x, t), Not(BExists(x, t, p))))]


@_register("forall-negation", "bounded forall of the negation", ("phi", "theta", "x"))
def _forall_neg(s):
    x, t, p = s["x"], s["theta"], s["phi"]
    return [_nd(s)], [eq("forall-negation", BForall(x, t, Not(p)), Implies(Exists(x, t), Not(BForall(x, t, p))))]


@_register("negation-push", "negation passes through bounded quantifiers", ("phi", "theta", "x"))
def _neg_push(s):
    x, t, p = s["x"], s["theta"], s["phi"]
    return [_nd(s), _ex_theta(s)], [
        eq("exists", Not(BExists(x, t, p)), BExists(x, t, Not(p))),
        eq("forall", Not(BForall(x, t, p)), BForall(x, t, Not(p))),
    ]


@_register("exists-forall-flip", "bounded exists equals bounded forall", ("phi", "theta", "x"))
def _flip(s):
    x, t, p = s["x"], s["theta"], s["phi"]
    return [_nd(s), _ex_theta(s)], [eq("flip", BExists(x, t, p), BForall(x, t, p))]


@_register("flip-inclusion-forward", "bounded exists is included in bounded forall", ("phi", "theta", "x"))
def _flip_fwd(s):
    x, t, p = s["x"], s["theta"], s["phi"]
    return [_nd(s)], [sub("exists within forall", BExists(x, t, p), BForall(x, t, p))]


@_register("flip-inclusion-backward", "bounded forall is included in bounded exists", ("phi", "theta", "x"))
def _flip_bwd(s):
    x, t, p = s["x"], s["theta"], s["phi"]
    return [_ex_theta(s)], [sub("forall within exists", BForall(x, t, p), BExists(x, t, p))]


@_register("bounded-forall-conjunction", "bounded forall distributes over conjunction", ("phi", "psi", "theta", "x"))
def _dist(s):
    x, t = s["x"], s["theta"]
    return [], [eq("distribution", BForall(x, t, And(s["phi"], s["psi"])),
                   And(BForall(x, t, s["phi"]), BForall(x, t, s["psi"])))]


@_register("pull-bool", "bounded forall pulled out of a boolean combination",
           ("template", "phis", "theta", "x"))
def _pull_bool(s):
    x, t, f, phis = s["x"], s["theta"], s["template"], tuple(s["phis"])
    lhs = Implies(Exists(x, t), f.instantiate([BForall(x, t, p) for p in phis]))
    return _each_nd(phis, x, t), [eq("pull", lhs, BForall(x, t, f.instantiate(phis)))]


@_register("pull-exists", "bounded forall pulled through an existential block", ("psi", "theta", "x", "zs"))
def _pull_exists(s):
    x, t, psi, zs = s["x"], s["theta"], s["psi"], tuple(s["zs"])
    block = QuantifierPrefix(tuple(("exists", z) for z in zs))
    conds = [
        syntactic("block variables not free in theta", not (set(zs) & free_vars(t))),
        syntactic("x not in the block", x not in zs),
        nondep_cond("psi non-dependent of x provided theta", psi, x, t),
    ]
    lhs = Forall(x, block.apply(Implies(t, psi)))
    rhs = Implies(Exists(x, t), block.apply(BForall(x, t, psi)))
    return conds, [eq("pull-exists", lhs, rhs)]


def _prefix_conds(x, theta, prefix: QuantifierPrefix) -> list[Condition]:
    return [
        syntactic("prefix variables not free in theta", not (set(prefix.vars) & free_vars(theta))),
        syntactic("x not bound by the prefix", x not in prefix.vars),
    ]


@_register("pull-prefix", "bounded forall pulled through a quantifier prefix",
           ("template", "phis", "theta", "x", "prefix"))
def _pull_prefix(s):
    x, t, f, phis, q = s["x"], s["theta"], s["template"], tuple(s["phis"]), s["prefix"]
    lhs = Implies(Exists(x, t), q.apply(f.instantiate([BForall(x, t, p) for p in phis])))
    rhs = BForall(x, t, q.apply(f.instantiate(phis)))
    return _prefix_conds(x, t, q) + _each_nd(phis, x, t), [eq("pull-prefix", lhs, rhs)]


@_register("pull-prefix-mixed", "mixed bounded quantifiers pulled through a prefix when exists x theta is valid",
           ("template", "phis", "theta", "x", "prefix", "kinds"), {"outer": "exists"})
def _pull_mixed(s):
    x, t, f, phis, q = s["x"], s["theta"], s["template"], tuple(s["phis"]), s["prefix"]
    lhs = q.apply(f.instantiate([bounded(k, x, t, p) for k, p in zip(s["kinds"], phis)]))
    rhs = bounded(s["outer"], x, t, q.apply(f.instantiate(phis)))
    return _prefix_conds(x, t, q) + _each_nd(phis, x, t) + [_ex_theta(s)], [eq("pull-mixed", lhs, rhs)]


def _scope(n: int, build: Callable[[VarId, Formula, Formula], tuple[Formula, Formula]]):
    def fn(s):
        x, phi, psi = s["x"], s["phi"], s["psi"]
        lhs, rhs = build(x, phi, psi)
        return [syntactic("x not free in phi", x not in free_vars(phi))], [eq(f"scope-{n}", lhs, rhs)]
    return fn


_SCOPES = {
    1: ("exists over a conjunction with an x-free side",
        lambda x, p, q: (Exists(x, And(p, q)), And(p, Exists(x, q)))),
    2: ("forall over a disjunction with an x-free side",
        lambda x, p, q: (Forall(x, Or(p, q)), Or(p, Forall(x, q)))),
    3: ("exists over an implication with x-free antecedent",
        lambda x, p, q: (Exists(x, Implies(p, q)), Implies(p, Exists(x, q)))),
    4: ("forall over an implication with x-free antecedent",
        lambda x, p, q: (Forall(x, Implies(p, q)), Implies(p, Forall(x, q)))),
    5: ("forall over an implication with x-free consequent",
        lambda x, p, q: (Forall(x, Implies(q, p)), Implies(Exists(x, q), p))),
}
for _n, (_summary, _build) in _SCOPES.items():
    CATALOG[f"scope-{_n}"] = Identity(f"scope-{_n}", _summary, ("phi", "psi", "x"), _scope(_n, _build))


@_register("guard-drop", "an outer guard repeated inside a universal guard can be dropped",
           ("phi", "iota", "eps", "x"))
def _guard_drop(s):
    x, i, e, p = s["x"], s["iota"], s["eps"], s["phi"]
    conds = [syntactic("x not free in iota", x not in free_vars(i))]
    return conds, [
        eq("implication", Implies(i, Forall(x, Implies(And(i, e), p))), Implies(i, Forall(x, Implies(e, p)))),
        eq("conjunction", And(i, Forall(x, Implies(And(i, e), p))), And(i, Forall(x, Implies(e, p)))),
    ]


@_register("guard-drop-boolean", "guard dropping under a bounded quantifier and a boolean combination",
           ("template", "phis", "iota", "eps", "x", "u"))
def _guard_drop_bool(s):
    x, u, i, e, f, phis = s["x"], s["u"], s["iota"], s["eps"], s["template"], tuple(s["phis"])
    plain = f.instantiate([Forall(x, Implies(e, p)) for p in phis])
    guarded = f.instantiate([Forall(x, Implies(And(i, e), p)) for p in phis])
    conds = [syntactic("x not free in iota", x not in free_vars(i))]
    return conds, [
        eq("forall", BForall(u, i, plain), BForall(u, i, guarded)),
        eq("exists", BExists(u, i, plain), BExists(u, i, guarded)),
    ]


@_register("simp", "a repeated bounded quantifier over eps is merged out of guarded blocks",
           ("bounded", "iota", "eps", "x", "prefix", "template", "phis"))
def _simp(s):
    x, i, e, q, f, phis = s["x"], s["iota"], s["eps"], s["prefix"], s["template"], tuple(s["phis"])
    block: QuantifierPrefix = s["bounded"]

    def wrap(body: Formula) -> Formula:
        for kind, u in reversed(block.items):
            body = bounded(kind, u, i, body)
        return body

    binders = list(block.vars) + list(q.vars) + [x]
    conds = [
        syntactic("at least one iota-bounded quantifier", len(block) >= 1),
        syntactic("binders distinct", len(set(binders)) == len(binders)),
        syntactic("x not free in iota", x not in free_vars(i)),
        syntactic("prefix variables not free in iota or eps",
                  not (set(q.vars) & (free_vars(i) | free_vars(e)))),
        *_each_nd(phis, x, And(i, e), "iota and eps"),
        valid_cond("exists x eps is valid", Exists(x, e)),
    ]
    lhs = wrap(q.apply(f.instantiate([BForall(x, e, p) for p in phis])))
    rhs = wrap(BForall(x, e, q.apply(f.instantiate(phis))))
    return conds, [eq("simp", lhs, rhs)]


@_register("tarski-substitution", "the substitution formula evaluates phi with x set to y's value",
           ("phi", "x", "y"))
def _tarski(s):
    phi, x, y = s["phi"], s["x"], s["y"]
    formula = substitute(phi, x, y)

    def check(model):
        window = make_window(free_vars(phi) | {x, y})
        for a in assignments(model, window):
            if satisfies(model, formula, a) != satisfies(model, phi, override(a, x, a[y])):
                return False, a
        return True, None
    return [], [Claim("substitution", "agree", check=check)]


@_register("subst-reformulation", "non-dependence agrees with its substitution form", ("phi", "x"), {"theta": TRUE})
def _reform(s):
    def check(model):
        a = check_nondep(model, s["phi"], s["x"], s["theta"]).holds
        b = check_nondep_subst(model, s["phi"], s["x"], s["theta"])
        return a == b, None if a == b else f"definition says {a}, substitution form says {b}"
    return [], [Claim("agreement", "agree", check=check)]


@_register("containment-chain", "forall x phi within phi within exists x phi", ("phi", "x"))
def _chain(s):
    p, x = s["phi"], s["x"]
    return [], [sub("forall within phi", Forall(x, p), p), sub("phi within exists", p, Exists(x, p))]


@_register("containment-chain-guarded", "the guarded containment chain", ("phi", "theta", "x"))
def _chain_guarded(s):
    p, t, x = s["phi"], s["theta"], s["x"]
    return [], [
        sub("guarded exists", And(t, p), And(t, Exists(x, And(t, p)))),
        sub("conjunction", And(t, p), p),
        sub("implication", p, Implies(t, p)),
        sub("guarded forall", Implies(t, Forall(x, Implies(t, p))), Implies(t, p)),
    ]


# Closure properties of non-dependence


@_register("closure-self", "theta is non-dependent of x provided theta", ("theta", "x"))
def _closure_self(s):
    return [], [nondep_claim("self", s["theta"], s["x"], s["theta"])]


@_register("closure-exists-bound", "exists x phi is non-dependent of x", ("phi", "x"), {"theta": TRUE})
def _closure_bound(s):
    return [], [nondep_claim("exists x", Exists(s["x"], s["phi"]), s["x"], s["theta"])]


@_register("closure-exists-other", "non-dependence survives an existential over another variable",
           ("phi", "x", "y"), {"theta": TRUE})
def _closure_other(s):
    x, y, t = s["x"], s["y"], s["theta"]
    conds = [
        _nd(s),
        syntactic("y not free in theta", y == x or y not in free_vars(t)),
    ]
    return conds, [nondep_claim("exists y", Exists(y, s["phi"]), x, t)]


@_register("closure-boolean", "non-dependence is closed under negation and conjunction",
           ("phi", "psi", "x"), {"theta": TRUE})
def _closure_bool(s):
    x, t = s["x"], s["theta"]
    conds = [_nd(s), _nd(s, "psi")]
    return conds, [nondep_claim("negation", Not(s["phi"]), x, t),
                   nondep_claim("conjunction", And(s["phi"], s["psi"]), x, t)]


@_register("closure-monotone", "non-dependence survives strengthening the proviso",
           ("phi", "x", "theta", "theta2"))
def _closure_mono(s):
    x, t, t2 = s["x"], s["theta"], s["theta2"]
    conds = [_nd(s), valid_cond("theta2 implies theta", Implies(t2, t))]
    return conds, [nondep_claim("stronger proviso", s["phi"], x, t2)]


CONNECTIVES = {"and": And, "or": Or, "implies": Implies, "iff": Iff}


@_register("closure-connective", "binary connectives combine non-dependence under the joint proviso",
           ("phi", "psi", "x", "theta", "theta2"), {"connective": "and"})
def _closure_conn(s):
    x, t, t2 = s["x"], s["theta"], s["theta2"]
    try:
        op = CONNECTIVES[s["connective"]]
    except KeyError:
        raise IdentityError(f"connective must be one of {sorted(CONNECTIVES)}") from None
    conds = [_nd(s), nondep_cond("psi non-dependent of x provided theta2", s["psi"], x, t2)]
    return conds, [nondep_claim("combined", op(s["phi"], s["psi"]), x, And(t, t2))]


CONDITIONAL = (
    "exists-negation-complement", "forall-negation", "negation-push", "exists-forall-flip",
    "flip-inclusion-forward", "flip-inclusion-backward", "pull-bool", "pull-exists", "pull-prefix",
    "pull-prefix-mixed", "guard-drop", "guard-drop-boolean", "simp",
)
UNCONDITIONAL = (
    "bounded-forall-conjunction", "scope-1", "scope-2", "scope-3", "scope-4", "scope-5",
    "containment-chain", "containment-chain-guarded",
)
CLOSURE = (
    "closure-self", "closure-exists-bound", "closure-exists-other", "closure-boolean",
    "closure-monotone", "closure-connective",
)
