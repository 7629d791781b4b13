"""Seeded generators and shrinking for models, formulas and identity instances.

Every generator is a pure function of ``(seed, index)``: the random stream
for item ``i`` is ``random.Random(f"{seed}/{i}")``, so items can be produced
independently and in any order.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterator, Mapping, Sequence

from .identities import check_identity, lookup
from .semantics import FiniteModel
from .syntax import (
    FALSE, TRUE, And, BExists, BForall, BooleanTemplate, Eq, Exists, Forall, Formula, Hole, Iff,
    Implies, Not, Or, Pred, QuantifierPrefix, Signature, Truth, VarId, children, free_vars, rebuild,
    size,
)

DEFAULT_SIGNATURE = Signature({"p": 1, "q": 1, "r": 2})
VAR_NAMES = ("x", "y", "z", "u", "w", "t")
VARS = tuple(VarId(i + 1, n) for i, n in enumerate(VAR_NAMES))
X, Y, Z, U, W, T = VARS
BIASES = ("unconditioned", "satisfy_nondep", "satisfy_validity")
RETRY_CAP = 200


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_domain: int = 3
    min_domain: int = 1
    max_vars: int = 3
    max_depth: int = 3
    signature: Signature = DEFAULT_SIGNATURE
    bias: str = "unconditioned"
    density: float = 0.5

    def __post_init__(self) -> None:
        if self.max_domain < 1 or self.min_domain < 1 or self.min_domain > self.max_domain:
            raise ValueError("need 1 <= min_domain <= max_domain")
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if not 1 <= self.max_vars <= len(VARS):
            raise ValueError(f"max_vars must be in 1..{len(VARS)}")
        if self.bias not in BIASES:
            raise ValueError(f"bias must be one of {BIASES}")

    @property
    def vars(self) -> tuple[VarId, ...]:
        return VARS[: self.max_vars]


def rng_for(seed: int, index: int | str) -> random.Random:
    return random.Random(f"{seed}/{index}")


# ---------------------------------------------------------------------------
# Models


def random_model(rng: random.Random, sig: Signature, n: int, density: float = 0.5) -> FiniteModel:
    relations = {}
    for name, arity in sorted(sig.predicates.items()):
        relations[name] = [t for t in itertools.product(range(n), repeat=arity) if rng.random() < density]
    return FiniteModel.build(n, relations, dict(sig.predicates))


def gen_model(cfg: GenConfig, index: int = 0, rng: random.Random | None = None) -> FiniteModel:
    """Each tuple of each predicate is present independently with probability ``density``."""
    rng = rng or rng_for(cfg.seed, f"model/{index}")
    n = rng.randint(cfg.min_domain, cfg.max_domain)
    return random_model(rng, cfg.signature, n, cfg.density)


def all_models(sig: Signature, n: int) -> Iterator[FiniteModel]:
    """Every model with domain ``0..n-1`` over ``sig`` (exponential; for tiny cases)."""
    names = sorted(sig.predicates)
    spaces = [list(itertools.product(range(n), repeat=sig.arity(p))) for p in names]
    for choice in itertools.product(*[range(2 ** len(s)) for s in spaces]):
        rel = {p: [t for j, t in enumerate(space) if mask >> j & 1]
               for p, space, mask in zip(names, spaces, choice)}
        yield FiniteModel.build(n, rel, dict(sig.predicates))


# ---------------------------------------------------------------------------
# Formulas


def random_atom(rng: random.Random, sig: Signature, vars: Sequence[VarId], eq_rate: float = 0.15) -> Formula:
    if rng.random() < eq_rate:
        return Eq(rng.choice(vars), rng.choice(vars))
    name = rng.choice(sorted(sig.predicates))
    return Pred(name, tuple(rng.choice(vars) for _ in range(sig.arity(name))))


def random_formula(rng: random.Random, sig: Signature, vars: Sequence[VarId], depth: int,
                   binders: Sequence[VarId] | None = None, sugar: bool = True) -> Formula:
    """Random formula of depth at most ``depth`` whose free variables are among ``vars``.

    ``binders`` are the variables quantifiers may bind (default ``vars``).
    """
    binders = vars if binders is None else binders
    if depth <= 0 or rng.random() < 0.25:
        if rng.random() < 0.03:
            return rng.choice([TRUE, FALSE])
        return random_atom(rng, sig, vars)
    kinds = ["not", "and", "exists"]
    if sugar:
        kinds += ["or", "implies", "iff", "forall", "bforall", "bexists"]
    kind = rng.choice(kinds)
    sub = lambda vs=vars: random_formula(rng, sig, vs, depth - 1, binders, sugar)
    if kind == "not":
        return Not(sub())
    if kind in ("and", "or", "implies", "iff"):
        op = {"and": And, "or": Or, "implies": Implies, "iff": Iff}[kind]
        return op(sub(), sub())
    v = rng.choice(binders)
    inner = tuple(dict.fromkeys(list(vars) + [v]))
    if kind == "exists":
        return Exists(v, sub(inner))
    if kind == "forall":
        return Forall(v, sub(inner))
    guard = random_formula(rng, sig, inner, min(1, depth - 1), binders, sugar)
    return (BForall if kind == "bforall" else BExists)(v, guard, sub(inner))


def gen_formula(cfg: GenConfig, index: int = 0, rng: random.Random | None = None) -> Formula:
    rng = rng or rng_for(cfg.seed, f"formula/{index}")
    return random_formula(rng, cfg.signature, cfg.vars, rng.randint(0, cfg.max_depth))


def random_template(rng: random.Random, n: int, depth: int = 2) -> BooleanTemplate:
    """A template using each of holes ``1..n`` at least once."""
    def build(holes: list[int], d: int) -> Formula:
        if len(holes) == 1 and (d <= 0 or rng.random() < 0.5):
            return Hole(holes[0]) if rng.random() < 0.7 or d <= 0 else Not(build(holes, d - 1))
        if len(holes) == 1:
            holes = holes + [rng.randint(1, n)]
        cut = rng.randint(1, len(holes) - 1)
        op = rng.choice([And, Or, Implies, Iff])
        left, right = build(holes[:cut], d - 1), build(holes[cut:], d - 1)
        node = op(left, right)
        return Not(node) if rng.random() < 0.15 else node

    order = list(range(1, n + 1))
    rng.shuffle(order)
    return BooleanTemplate(build(order, depth))


# ---------------------------------------------------------------------------
# Conditioned identity instances


@dataclass(frozen=True)
class Instance:
    identity: str
    model: FiniteModel
    slots: Mapping[str, Any]
    attempts: int = 1

    def check(self, force: bool = False):
        return check_identity(self.identity, self.model, self.slots, force=force)

    def weight(self) -> int:
        total = self.model.domain_size * 100 + sum(len(t) for t in self.model.interp.values())
        for value in self.slots.values():
            for f in _formulas_in(value):
                total += size(f)
        return total


def _formulas_in(value: Any) -> list[Formula]:
    if isinstance(value, Formula):
        return [value]
    if isinstance(value, (tuple, list)):
        return [v for v in value if isinstance(v, Formula)]
    return []


class _Slots:
    """Random pieces shared by the per-identity samplers."""

    def __init__(self, rng: random.Random, cfg: GenConfig, strategy: str):
        self.rng, self.cfg, self.strategy = rng, cfg, strategy
        self.sig = cfg.signature

    def formula(self, vars: Sequence[VarId], depth: int | None = None, binders: Sequence[VarId] | None = None) -> Formula:
        depth = self.rng.randint(0, min(2, self.cfg.max_depth)) if depth is None else depth
        return random_formula(self.rng, self.sig, vars, depth, binders or (X, Y, Z))

    def guard(self, x: VarId, others: Sequence[VarId]) -> Formula:
        """Guards drawn from a small family: atoms on x, functional x = v, or a random formula."""
        r = self.rng.random()
        if r < 0.4:
            unary = [p for p in sorted(self.sig.predicates) if self.sig.arity(p) == 1]
            return Pred(self.rng.choice(unary), (x,))
        if r < 0.6 and others:
            return Eq(x, self.rng.choice(others))
        if r < 0.75 and others:
            binary = [p for p in sorted(self.sig.predicates) if self.sig.arity(p) == 2]
            if binary:
                o = self.rng.choice(others)
                return Pred(binary[0], (x, o) if self.rng.random() < 0.5 else (o, x))
        return self.formula([x, *others], 1)

    def body(self, x: VarId, others: Sequence[VarId], depth: int | None = None) -> Formula:
        """A body that is non-dependent of x by construction for the x-free strategy."""
        if self.strategy == "xfree":
            return self.formula(list(others) or [Y], depth, binders=[v for v in (Y, Z, U) if v != x])
        return self.formula([x, *others], depth)

    def theta(self, x: VarId, others: Sequence[VarId]) -> Formula:
        g = self.guard(x, others)
        if self.strategy == "functional" and others:
            return And(g, Eq(x, self.rng.choice(others)))
        return g


def _std(sl: _Slots) -> dict:
    return {"x": X, "theta": sl.theta(X, [Y]), "phi": sl.body(X, [Y])}


def _pair(sl: _Slots) -> dict:
    return {**_std(sl), "psi": sl.body(X, [Y])}


def _multi(sl: _Slots, others=(Y,), theta=None) -> tuple[BooleanTemplate, tuple[Formula, ...]]:
    n = sl.rng.randint(1, 3)
    return random_template(sl.rng, n), tuple(sl.body(X, list(others), sl.rng.randint(0, 1)) for _ in range(n))


def _prefix(sl: _Slots, vars: Sequence[VarId]) -> QuantifierPrefix:
    k = sl.rng.randint(0, len(vars))
    return QuantifierPrefix(tuple((sl.rng.choice(["forall", "exists"]), v) for v in vars[:k]))


def _s_pull_bool(sl):
    f, phis = _multi(sl)
    return {"x": X, "theta": sl.theta(X, [Y]), "template": f, "phis": phis}


def _leaky_theta(sl: _Slots) -> Formula:
    """Under the random strategy the guard sometimes mentions a prefix variable."""
    if sl.strategy == "random" and sl.rng.random() < 0.3:
        return sl.theta(X, [Y, Z])
    return sl.theta(X, [Y])


def _s_pull_prefix(sl):
    f, phis = _multi(sl, (Y, Z))
    prefix = _prefix(sl, [Z])
    return {"x": X, "theta": _leaky_theta(sl), "template": f, "phis": phis, "prefix": prefix}


def _s_pull_mixed(sl):
    s = _s_pull_prefix(sl)
    s["kinds"] = tuple(sl.rng.choice(["forall", "exists"]) for _ in s["phis"])
    s["outer"] = sl.rng.choice(["forall", "exists"])
    return s


def _s_pull_exists(sl):
    zs = (Z,) if sl.rng.random() < 0.8 else ()
    return {"x": X, "theta": _leaky_theta(sl), "psi": sl.body(X, [Y, *zs]), "zs": zs}


def _s_scope(sl):
    phi = sl.formula([Y]) if sl.strategy != "random" else sl.formula([X, Y])
    return {"x": X, "phi": phi, "psi": sl.formula([X, Y])}


def _s_guard_drop(sl):
    iota = sl.formula([Y], 1) if sl.strategy != "random" else sl.formula([X, Y], 1)
    return {"x": X, "iota": iota, "eps": sl.guard(X, [Y]), "phi": sl.formula([X, Y])}


def _s_guard_drop_bool(sl):
    s = _s_guard_drop(sl)
    s["iota"] = sl.formula([U], 1) if sl.strategy != "random" else sl.formula([X, U], 1)
    f, phis = _multi(sl, (U,))
    s.update(u=U, template=f, phis=phis)
    s.pop("phi")
    return s


def _s_simp(sl):
    k = 1 if sl.rng.random() < 0.75 else 2
    us = [U, W][:k]
    block = QuantifierPrefix(tuple((sl.rng.choice(["forall", "exists"]), u) for u in us))
    iota = And(*[Pred("p", (u,)) for u in us]) if k == 2 else sl.formula(us, 1)
    if sl.strategy == "random" and sl.rng.random() < 0.3:
        iota = sl.formula([X, *us], 1)
    eps = sl.guard(X, us + [Z]) if sl.strategy == "random" and sl.rng.random() < 0.3 else sl.guard(X, us)
    if sl.strategy == "functional":
        eps = And(eps, Eq(X, us[0])) if sl.rng.random() < 0.5 else Eq(X, us[0])
    prefix = _prefix(sl, [Z])
    n = sl.rng.randint(1, 2)
    others = [*us, *prefix.vars]
    if sl.strategy == "xfree":
        phis = tuple(sl.formula(others, sl.rng.randint(0, 1), binders=[Y]) for _ in range(n))
    else:
        phis = tuple(sl.formula([X, *others], sl.rng.randint(0, 1), binders=[Y]) for _ in range(n))
    return {"bounded": block, "iota": iota, "eps": eps, "x": X, "prefix": prefix,
            "template": random_template(sl.rng, n), "phis": phis}


def _s_closure_other(sl):
    s = _std(sl)
    s["y"] = sl.rng.choice([Y, Z])
    s["phi"] = sl.body(X, [Y, Z]) if sl.strategy != "xfree" else sl.formula([Y, Z])
    return s


def _s_closure_mono(sl):
    s = _std(sl)
    extra = sl.guard(X, [Y])
    s["theta2"] = And(s["theta"], extra) if sl.rng.random() < 0.6 else extra
    return s


def _s_closure_conn(sl):
    s = _pair(sl)
    s["theta2"] = sl.theta(X, [Y])
    s["connective"] = sl.rng.choice(["and", "or", "implies", "iff"])
    return s


SAMPLERS: dict[str, Callable[[_Slots], dict]] = {
    "nondep-formulations": _std,
    "exists-negation-complement": _std,
    "forall-negation": _std,
    "negation-push": _std,
    "exists-forall-flip": _std,
    "flip-inclusion-forward": _std,
    "flip-inclusion-backward": _std,
    "bounded-forall-conjunction": _pair,
    "pull-bool": _s_pull_bool,
    "pull-exists": _s_pull_exists,
    "pull-prefix": _s_pull_prefix,
    "pull-prefix-mixed": _s_pull_mixed,
    **{f"scope-{i}": _s_scope for i in range(1, 6)},
    "guard-drop": _s_guard_drop,
    "guard-drop-boolean": _s_guard_drop_bool,
    "simp": _s_simp,
    "tarski-substitution": lambda sl: {"phi": sl.formula([X, Y]), "x": X, "y": Y},
    "subst-reformulation": _std,
    "containment-chain": lambda sl: {"phi": sl.formula([X, Y]), "x": X},
    "containment-chain-guarded": _std,
    "closure-self": lambda sl: {"theta": sl.formula([X, Y]), "x": X},
    "closure-exists-bound": lambda sl: {"phi": sl.formula([X, Y]), "x": X, "theta": sl.theta(X, [Y])},
    "closure-exists-other": _s_closure_other,
    "closure-boolean": _pair,
    "closure-monotone": _s_closure_mono,
    "closure-connective": _s_closure_conn,
}
STRATEGIES = ("xfree", "functional", "random")


def sample_slots(name: str, rng: random.Random, cfg: GenConfig, strategy: str | None = None) -> dict:
    ident = lookup(name)
    strategy = strategy or rng.choice(STRATEGIES)
    return SAMPLERS[ident.name](_Slots(rng, cfg, strategy))


def gen_conditioned_instance(cfg: GenConfig, identity: str, index: int = 0) -> Instance | None:
    """An instance whose side conditions verify on its companion model.

    Strategies (x-free bodies, functional guards, plain random) are mixed;
    after ``RETRY_CAP`` attempts without success the result is None.
    """
    name = lookup(identity).name
    rng = rng_for(cfg.seed, f"{name}/{index}")
    for attempt in range(1, RETRY_CAP + 1):
        model = gen_model(cfg, rng=rng)
        slots = sample_slots(name, rng, cfg)
        result = check_identity(name, model, slots)
        if result.status != "unmet":
            return Instance(name, model, slots, attempt)
    return None


def gen_targeted_instance(cfg: GenConfig, identity: str, condition: str, index: int = 0,
                          tries: int = 2000) -> Instance | None:
    """An instance where exactly ``condition`` fails and the claim breaks."""
    name = lookup(identity).name
    rng = rng_for(cfg.seed, f"targeted/{name}/{condition}/{index}")
    for attempt in range(1, tries + 1):
        model = gen_model(cfg, rng=rng)
        slots = sample_slots(name, rng, cfg, "random")
        result = check_identity(name, model, slots, force=True)
        if result.unmet == [condition] and result.status == "fails":
            return Instance(name, model, slots, attempt)
    return None


def nondep_attempt(cfg: GenConfig, index: int) -> tuple[FiniteModel, Formula, VarId, Formula]:
    """One draw of the satisfy_nondep bias: (model, phi, x, theta)."""
    rng = rng_for(cfg.seed, f"nondep/{index}")
    model = gen_model(cfg, rng=rng)
    sl = _Slots(rng, cfg, rng.choice(STRATEGIES) if cfg.bias == "satisfy_nondep" else "random")
    s = _std(sl)
    if cfg.bias == "unconditioned":
        s["theta"] = TRUE
    return model, s["phi"], X, s["theta"]


# ---------------------------------------------------------------------------
# Shrinking


def _drop_element(model: FiniteModel, k: int) -> FiniteModel:
    def keep(t):
        return k not in t

    def shift(t):
        return tuple(v - 1 if v > k else v for v in t)

    rel = {p: [shift(t) for t in ts if keep(t)] for p, ts in model.interp.items()}
    return FiniteModel.build(model.domain_size - 1, rel, dict(model.arities))


def shrink_model(model: FiniteModel) -> Iterator[FiniteModel]:
    if model.domain_size > 1:
        for k in reversed(range(model.domain_size)):
            yield _drop_element(model, k)
    for p in sorted(model.interp):
        for t in sorted(model.interp[p]):
            rel = {q: [u for u in ts if (q, u) != (p, t)] for q, ts in model.interp.items()}
            yield FiniteModel.build(model.domain_size, rel, dict(model.arities))


def shrink_formula(f: Formula) -> Iterator[Formula]:
    """Strictly smaller formulas: constants, children, and shrunk children in place."""
    if not isinstance(f, Truth):
        yield TRUE
        yield FALSE
    kids = children(f)
    for k in kids:
        yield k
    for i, k in enumerate(kids):
        for smaller in shrink_formula(k):
            yield rebuild(f, [*kids[:i], smaller, *kids[i + 1:]])


def _shrink_slot(value: Any) -> Iterator[Any]:
    if isinstance(value, Formula):
        yield from shrink_formula(value)
    elif isinstance(value, tuple) and value and all(isinstance(v, Formula) for v in value):
        for i, v in enumerate(value):
            for smaller in shrink_formula(v):
                yield (*value[:i], smaller, *value[i + 1:])


def shrink(instance: Instance, fails: Callable[[Instance], bool]) -> Iterator[Instance]:
    """Smaller instances that still fail; nothing for a passing instance.

    Candidates shrink the domain, drop single tuples, or prune one
    subformula of one slot, so the weight strictly decreases.
    """
    if not fails(instance):
        return
    base = instance.weight()
    for model in shrink_model(instance.model):
        cand = replace(instance, model=model)
        if _ok(cand, fails, base):
            yield cand
    for key in sorted(instance.slots):
        for smaller in _shrink_slot(instance.slots[key]):
            cand = replace(instance, slots={**instance.slots, key: smaller})
            if _ok(cand, fails, base):
                yield cand


def _ok(cand: Instance, fails: Callable[[Instance], bool], base: int) -> bool:
    if cand.weight() >= base:
        return False
    try:
        return bool(fails(cand))
    except (ValueError, KeyError):
        return False


def minimize(instance: Instance, fails: Callable[[Instance], bool], limit: int = 500) -> Instance:
    """Greedy shrinking to a local minimum."""
    current = instance
    for _ in range(limit):
        nxt = next(shrink(current, fails), None)
        if nxt is None:
            return current
        current = nxt
    return current


# ---------------------------------------------------------------------------
# Rewrite-prone formulas


def _redex(rng: random.Random, sig: Signature) -> Formula:
    """A formula built around one of the rewrite patterns, over x, y, z."""
    atom = lambda vs: random_atom(rng, sig, vs, eq_rate=0.05)
    body = lambda vs=(X, Y): random_formula(rng, sig, vs, 1, (Z,))
    g = atom((X,)) if rng.random() < 0.7 else atom((X, Y))
    kind = rng.randrange(9)
    if kind == 0:
        inner = (BExists if rng.random() < 0.5 else BForall)(X, g, body())
        return And(g, inner) if rng.random() < 0.5 else And(inner, g)
    if kind == 1:
        return Implies(g, (BForall if rng.random() < 0.5 else BExists)(X, g, body()))
    if kind == 2:
        return BForall(X, g, And(body(), body()))
    if kind == 3:
        leaves = [BForall(X, g, body()) for _ in range(rng.randint(1, 2))]
        f = random_template(rng, len(leaves)).instantiate(leaves)
        return Implies(Exists(X, g), Forall(Z, f) if rng.random() < 0.4 else f)
    if kind == 4:
        leaves = [(BForall if rng.random() < 0.5 else BExists)(X, g, body()) for _ in range(2)]
        return random_template(rng, 2).instantiate(leaves)
    if kind == 5:
        iota = atom((Y,))
        eps = atom((X,))
        inner = random_template(rng, 1).instantiate([BForall(X, eps, body())])
        return BForall(Y, iota, Forall(Z, inner) if rng.random() < 0.5 else inner)
    if kind == 6:
        guard_y = Pred(g.name, (Y,) * len(g.args)) if isinstance(g, Pred) else Eq(Y, Y)
        return BForall(Y, guard_y, Implies(atom((Y,)), BForall(X, g, body())))
    if kind == 7:
        iota = atom((Y,))
        return Implies(iota, Forall(X, Implies(And(iota, atom((X,))), body())))
    q = rng.choice([Exists, Forall])
    conn = rng.choice([And, Or, Implies])
    pair = [atom((Y,)), body()]
    rng.shuffle(pair)
    return q(X, conn(*pair))


def gen_redex(cfg: GenConfig, index: int = 0) -> Formula:
    rng = rng_for(cfg.seed, f"redex/{index}")
    f = _redex(rng, cfg.signature)
    wrap = rng.randrange(3)
    if wrap == 1:
        f = And(random_atom(rng, cfg.signature, (Y,)), f)
    elif wrap == 2:
        f = Forall(Y, f)
    return f


# ---------------------------------------------------------------------------
# Property suites


@dataclass
class SuiteReport:
    name: str
    cases: int = 0
    failures: int = 0
    skipped: int = 0
    first_failure: str | None = None

    def fail(self, message: str) -> None:
        self.failures += 1
        if self.first_failure is None:
            self.first_failure = message

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def to_json(self) -> dict:
        return {"name": self.name, "cases": self.cases, "failures": self.failures,
                "skipped": self.skipped, "first_failure": self.first_failure}


def suite_triangle(seed: int, iters: int) -> SuiteReport:
    from .nondep import check_nondep, check_nondep_plain_equiv, check_nondep_subst
    rep = SuiteReport("triangle")
    for bias in ("unconditioned", "satisfy_nondep"):
        cfg = GenConfig(seed=seed, bias=bias)
        for i in range(iters):
            model, phi, x, theta = nondep_attempt(cfg, i)
            verdicts = [check_nondep(model, phi, x, theta).holds, check_nondep_subst(model, phi, x, theta)]
            if theta == TRUE:
                verdicts.append(check_nondep_plain_equiv(model, phi, x))
            rep.cases += 1
            if len(set(verdicts)) != 1:
                rep.fail(f"{bias}/{i}: routes disagree on {phi} / {x} / {theta}: {verdicts}")
    return rep


def suite_formulations(seed: int, iters: int) -> SuiteReport:
    from .nondep import formulation_verdicts
    rep = SuiteReport("formulations")
    cfg = GenConfig(seed=seed, bias="satisfy_nondep")
    for i in range(iters):
        model, phi, x, theta = nondep_attempt(cfg, i)
        verdicts = formulation_verdicts(model, phi, x, theta)
        rep.cases += 1
        if len(set(verdicts)) != 1:
            rep.fail(f"{i}: formulations disagree on {phi} / {x} / {theta}: {verdicts}")
    return rep


def _identity_suite(name: str, identities: Sequence[str], seed: int, iters: int) -> SuiteReport:
    rep = SuiteReport(name)
    cfg = GenConfig(seed=seed)
    for ident in identities:
        for i in range(iters):
            inst = gen_conditioned_instance(cfg, ident, i)
            if inst is None:
                rep.skipped += 1
                continue
            rep.cases += 1
            result = inst.check()
            if result.status != "holds":
                rep.fail(f"{ident}/{i}: {result.failed_claim} fails at {result.counterexample}")
    return rep


def suite_identities(seed: int, iters: int) -> SuiteReport:
    from .identities import CONDITIONAL, UNCONDITIONAL
    return _identity_suite("identities", CONDITIONAL + UNCONDITIONAL, seed, iters)


def suite_closure(seed: int, iters: int) -> SuiteReport:
    from .identities import CLOSURE
    return _identity_suite("closure", CLOSURE, seed, iters)


def suite_roundtrip(seed: int, iters: int) -> SuiteReport:
    from .syntax import VarTable, parse, to_text
    rep = SuiteReport("roundtrip")
    names = {str(v): v.index for v in VARS}
    cfg = GenConfig(seed=seed, max_vars=4, max_depth=4)
    for i in range(iters):
        f = gen_formula(cfg, i)
        rep.cases += 1
        back = parse(to_text(f), None, VarTable(names))
        if back != f:
            rep.fail(f"{i}: {to_text(f)} reparses as {to_text(back)}")
    return rep


def suite_rewrite(seed: int, iters: int) -> SuiteReport:
    """Simplify rewrite-prone formulas without per-step checks, then check every step independently."""
    from .rewrite import simplify, verify_trace
    from .semantics import check_equivalent
    rep = SuiteReport("rewrite")
    cfg = GenConfig(seed=seed, min_domain=1, max_domain=3)
    for i in range(iters):
        f = gen_redex(cfg, i)
        models = {f"m{j}": gen_model(cfg, rng=rng_for(seed, f"redex-model/{i}/{j}")) for j in range(3)}
        _, trace = simplify(f, None, models, budget=20, check_steps=False)
        for step in trace.committed:
            rep.cases += 1
            for mname, model in models.items():
                if not check_equivalent(model, step.before, step.after):
                    rep.fail(f"{i}: {step.rule} at {list(step.path)} not equivalent on {mname}: {step.before}")
                    break
        if trace.committed and not verify_trace(trace, models).ok:
            rep.fail(f"{i}: trace does not verify")
    return rep


SUITES: dict[str, Callable[[int, int], SuiteReport]] = {
    "triangle": suite_triangle,
    "formulations": suite_formulations,
    "identities": suite_identities,
    "closure": suite_closure,
    "roundtrip": suite_roundtrip,
    "rewrite": suite_rewrite,
}


def run_suites(names: Sequence[str], seed: int, iters: int) -> list[SuiteReport]:
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    return [SUITES[n](seed, iters) for n in names]
