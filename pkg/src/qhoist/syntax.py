"""Formula AST, concrete grammar, printer and variable bookkeeping.

The core language is relational first-order logic with equality built from
``Pred``, ``Eq``, ``Not``, ``And`` and ``Exists`` (plus the truth constants).
``Or``, ``Implies``, ``Iff``, ``Forall`` and the bounded quantifiers ``BForall``
and ``BExists`` are first-class nodes so that rewrite rules can match them,
but every semantic question goes through :func:`desugar`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence


class FolError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(FolError):
    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.line = text.count("\n", 0, offset) + 1
        self.column = offset - (text.rfind("\n", 0, offset) + 1) + 1
        self.reason = message
        super().__init__(f"{message} at offset {offset} (line {self.line}, column {self.column})")


class SignatureError(FolError):
    """Unknown predicate or arity mismatch."""


# ---------------------------------------------------------------------------
# Variables and signatures


@dataclass(frozen=True, slots=True, order=True)
class VarId:
    index: int
    name: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"variable index must be >= 1, got {self.index}")

    def __str__(self) -> str:
        return self.name if self.name else f"v{self.index}"

    def __repr__(self) -> str:
        return f"VarId({self.index}, {str(self)!r})"


def fresh_var(index: int) -> VarId:
    return VarId(index, f"v{index}")


@dataclass(frozen=True)
class Signature:
    predicates: Mapping[str, int]

    def __post_init__(self) -> None:
        if "=" in self.predicates:
            raise SignatureError("'=' is reserved for equality")
        for name, arity in self.predicates.items():
            if arity < 0:
                raise SignatureError(f"negative arity for {name}")
        object.__setattr__(self, "predicates", dict(self.predicates))

    def arity(self, name: str) -> int:
        try:
            return self.predicates[name]
        except KeyError:
            raise SignatureError(f"unknown predicate {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.predicates

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.predicates.items())))

    def check(self, formula: Formula) -> None:
        for node in walk(formula):
            if isinstance(node, Pred):
                arity = self.arity(node.name)
                if arity != len(node.args):
                    raise SignatureError(
                        f"predicate {node.name!r} has arity {arity}, got {len(node.args)} arguments")


# ---------------------------------------------------------------------------
# AST


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)

    def __and__(self, other: Formula) -> Formula:
        return And(self, other)

    def __or__(self, other: Formula) -> Formula:
        return Or(self, other)

    def __invert__(self) -> Formula:
        return Not(self)

    def __rshift__(self, other: Formula) -> Formula:
        return Implies(self, other)


@dataclass(frozen=True, slots=True)
class Truth(Formula):
    value: bool


@dataclass(frozen=True, slots=True)
class Pred(Formula):
    name: str
    args: tuple[VarId, ...]


@dataclass(frozen=True, slots=True)
class Eq(Formula):
    left: VarId
    right: VarId


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Exists(Formula):
    var: VarId
    body: Formula


@dataclass(frozen=True, slots=True)
class Forall(Formula):
    var: VarId
    body: Formula


@dataclass(frozen=True, slots=True)
class BForall(Formula):
    """``forall var in guard. body``, i.e. ``forall var (guard -> body)``."""
    var: VarId
    guard: Formula
    body: Formula


@dataclass(frozen=True, slots=True)
class BExists(Formula):
    """``exists var in guard. body``, i.e. ``exists var (guard & body)``."""
    var: VarId
    guard: Formula
    body: Formula


@dataclass(frozen=True, slots=True)
class Hole(Formula):
    """Numbered placeholder used only inside boolean templates."""
    index: int


TRUE = Truth(True)
FALSE = Truth(False)

BINARY = (And, Or, Implies, Iff)
QUANTIFIERS = (Exists, Forall)
BOUNDED = (BForall, BExists)
BINDERS = QUANTIFIERS + BOUNDED
ATOMS = (Truth, Pred, Eq, Hole)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, ATOMS):
        return ()
    if isinstance(f, Not):
        return (f.arg,)
    if isinstance(f, BINARY):
        return (f.left, f.right)
    if isinstance(f, QUANTIFIERS):
        return (f.body,)
    if isinstance(f, BOUNDED):
        return (f.guard, f.body)
    raise TypeError(f"not a formula: {f!r}")


def rebuild(f: Formula, kids: Sequence[Formula]) -> Formula:
    if isinstance(f, ATOMS):
        return f
    if isinstance(f, Not):
        return Not(kids[0])
    if isinstance(f, BINARY):
        return type(f)(kids[0], kids[1])
    if isinstance(f, QUANTIFIERS):
        return type(f)(f.var, kids[0])
    return type(f)(f.var, kids[0], kids[1])


def walk(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal."""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


Path = tuple[int, ...]


def positions(f: Formula, prefix: Path = ()) -> Iterator[Path]:
    """All positions in post-order, so inner positions come first."""
    for i, kid in enumerate(children(f)):
        yield from positions(kid, prefix + (i,))
    yield prefix


def subformula(f: Formula, path: Sequence[int]) -> Formula:
    for step in path:
        kids = children(f)
        if not 0 <= step < len(kids):
            raise IndexError(f"invalid position {tuple(path)}")
        f = kids[step]
    return f


def replace_at(f: Formula, path: Sequence[int], new: Formula) -> Formula:
    if not path:
        return new
    kids = list(children(f))
    if not 0 <= path[0] < len(kids):
        raise IndexError(f"invalid position {tuple(path)}")
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return rebuild(f, kids)


def size(f: Formula) -> int:
    return sum(1 for _ in walk(f))


def variables(f: Formula) -> frozenset[VarId]:
    """Every variable occurring in ``f``, free or bound."""
    out: set[VarId] = set()
    for node in walk(f):
        if isinstance(node, Pred):
            out.update(node.args)
        elif isinstance(node, Eq):
            out.update((node.left, node.right))
        elif isinstance(node, BINDERS):
            out.add(node.var)
    return frozenset(out)


def free_vars(f: Formula) -> frozenset[VarId]:
    if isinstance(f, Pred):
        return frozenset(f.args)
    if isinstance(f, Eq):
        return frozenset((f.left, f.right))
    if isinstance(f, (Truth, Hole)):
        return frozenset()
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, BINARY):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, QUANTIFIERS):
        return free_vars(f.body) - {f.var}
    if isinstance(f, BOUNDED):
        return (free_vars(f.guard) | free_vars(f.body)) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def max_index(*formulas: Formula, extra: Iterable[VarId] = ()) -> int:
    indices = [v.index for f in formulas for v in variables(f)]
    indices.extend(v.index for v in extra)
    return max(indices, default=0)


def fresh_after(*formulas: Formula, extra: Iterable[VarId] = (), count: int = 1) -> list[VarId]:
    """Smallest indices strictly greater than every index occurring in the inputs."""
    start = max_index(*formulas, extra=extra) + 1
    return [fresh_var(start + i) for i in range(count)]


def conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    if f == TRUE:
        return []
    return [f]


def conjoin(parts: Sequence[Formula]) -> Formula:
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


# ---------------------------------------------------------------------------
# Desugaring


def desugar(f: Formula) -> Formula:
    """Expand derived connectives and bounded quantifiers to the core language."""
    if isinstance(f, ATOMS):
        return f
    if isinstance(f, Not):
        return Not(desugar(f.arg))
    if isinstance(f, And):
        return And(desugar(f.left), desugar(f.right))
    if isinstance(f, Or):
        return Not(And(Not(desugar(f.left)), Not(desugar(f.right))))
    if isinstance(f, Implies):
        return desugar(Or(Not(f.left), f.right))
    if isinstance(f, Iff):
        return And(desugar(Implies(f.left, f.right)), desugar(Implies(f.right, f.left)))
    if isinstance(f, Exists):
        return Exists(f.var, desugar(f.body))
    if isinstance(f, Forall):
        return Not(Exists(f.var, Not(desugar(f.body))))
    if isinstance(f, BForall):
        return desugar(Forall(f.var, Implies(f.guard, f.body)))
    if isinstance(f, BExists):
        return Exists(f.var, And(desugar(f.guard), desugar(f.body)))
    raise TypeError(f"not a formula: {f!r}")


def sugar(f: Formula) -> Formula:
    """Fold core patterns back into derived connectives and bounded quantifiers.

    Every fold is the exact inverse of one expansion step, so
    ``desugar(sugar(f)) == desugar(f)``.
    """
    if isinstance(f, Not):
        a = f.arg
        if isinstance(a, Exists) and isinstance(a.body, Not):
            body = sugar(a.body.arg)
            if isinstance(body, Implies):
                return BForall(a.var, body.left, body.right)
            return Forall(a.var, body)
        if isinstance(a, And) and isinstance(a.left, Not) and isinstance(a.right, Not):
            if isinstance(a.left.arg, Not):
                return Implies(sugar(a.left.arg.arg), sugar(a.right.arg))
            return Or(sugar(a.left.arg), sugar(a.right.arg))
        return Not(sugar(a))
    if isinstance(f, And):
        left, right = sugar(f.left), sugar(f.right)
        if (isinstance(left, Implies) and isinstance(right, Implies)
                and left.left == right.right and left.right == right.left):
            return Iff(left.left, left.right)
        return And(left, right)
    if isinstance(f, Exists) and isinstance(f.body, And):
        return BExists(f.var, sugar(f.body.left), sugar(f.body.right))
    if isinstance(f, ATOMS):
        return f
    return rebuild(f, [sugar(k) for k in children(f)])


# ---------------------------------------------------------------------------
# Renaming and substitution


def substitute(phi: Formula, x: VarId, y: VarId) -> Formula:
    """Tarskian substitution: ``exists x (x = y & phi)``; no renaming is done."""
    return Exists(x, And(Eq(x, y), phi))


def rename_free(f: Formula, mapping: Mapping[VarId, VarId]) -> Formula:
    """Replace free occurrences according to ``mapping``, avoiding capture.

    A binder that would capture a substituted variable is renamed to a fresh
    variable first.
    """
    mapping = {k: v for k, v in mapping.items() if k != v}
    if not mapping:
        return f
    counter = [max_index(f, extra=list(mapping) + list(mapping.values())) + 1]
    return _rename(f, mapping, counter)


def _make_binder(kind: type, var: VarId, kids: Sequence[Formula]) -> Formula:
    if kind in BOUNDED:
        return kind(var, kids[0], kids[1])
    return kind(var, kids[0])


def _rename(f: Formula, mapping: dict[VarId, VarId], counter: list[int]) -> Formula:
    if isinstance(f, Pred):
        return Pred(f.name, tuple(mapping.get(a, a) for a in f.args))
    if isinstance(f, Eq):
        return Eq(mapping.get(f.left, f.left), mapping.get(f.right, f.right))
    if isinstance(f, (Truth, Hole)):
        return f
    if isinstance(f, BINDERS):
        fv = free_vars(f)
        live = {k: v for k, v in mapping.items() if k != f.var and k in fv}
        if not live:
            return f
        var = f.var
        kids = children(f)
        if var in live.values():
            new = fresh_var(counter[0])
            counter[0] += 1
            kids = tuple(_rename(k, {var: new}, counter) for k in kids)
            var = new
        return _make_binder(type(f), var, [_rename(k, live, counter) for k in kids])
    return rebuild(f, [_rename(k, mapping, counter) for k in children(f)])


def alpha_rename(f: Formula, fresh_from: VarId | int | None = None) -> Formula:
    """Rename every bound variable to a distinct fresh variable.

    Fresh indices start at ``fresh_from`` (or just above every index in ``f``),
    and never fall at or below an index already occurring in ``f``.
    """
    start = max_index(f) + 1
    if fresh_from is not None:
        wanted = fresh_from.index if isinstance(fresh_from, VarId) else int(fresh_from)
        start = max(start, wanted)
    counter = [start]

    def go(node: Formula, env: dict[VarId, VarId]) -> Formula:
        if isinstance(node, Pred):
            return Pred(node.name, tuple(env.get(a, a) for a in node.args))
        if isinstance(node, Eq):
            return Eq(env.get(node.left, node.left), env.get(node.right, node.right))
        if isinstance(node, (Truth, Hole)):
            return node
        if isinstance(node, BINDERS):
            new = fresh_var(counter[0])
            counter[0] += 1
            inner = {**env, node.var: new}
            if isinstance(node, BOUNDED):
                return type(node)(new, go(node.guard, inner), go(node.body, inner))
            return type(node)(new, go(node.body, inner))
        return rebuild(node, [go(k, env) for k in children(node)])

    return go(f, {})


def rename_apart(f: Formula) -> Formula:
    """Rename only those binders whose variable is free somewhere or bound twice."""
    used = set(free_vars(f))
    counter = [max_index(f) + 1]

    def go(node: Formula, env: dict[VarId, VarId]) -> Formula:
        if isinstance(node, Pred):
            return Pred(node.name, tuple(env.get(a, a) for a in node.args))
        if isinstance(node, Eq):
            return Eq(env.get(node.left, node.left), env.get(node.right, node.right))
        if isinstance(node, (Truth, Hole)):
            return node
        if isinstance(node, BINDERS):
            var = node.var
            if var in used:
                var = fresh_var(counter[0])
                counter[0] += 1
            used.add(var)
            inner = {**env, node.var: var}
            if isinstance(node, BOUNDED):
                return type(node)(var, go(node.guard, inner), go(node.body, inner))
            return type(node)(var, go(node.body, inner))
        return rebuild(node, [go(k, env) for k in children(node)])

    return go(f, {})


def canonical(f: Formula) -> Formula:
    """Representative of the alpha-equivalence class of ``f``.

    Bound variables are renumbered by binding depth above every free index, so
    two formulas are alpha-equivalent iff their canonical forms are equal.
    """
    base = max((v.index for v in free_vars(f)), default=0)

    def go(node: Formula, env: dict[VarId, VarId], depth: int) -> Formula:
        if isinstance(node, Pred):
            return Pred(node.name, tuple(env.get(a, a) for a in node.args))
        if isinstance(node, Eq):
            return Eq(env.get(node.left, node.left), env.get(node.right, node.right))
        if isinstance(node, (Truth, Hole)):
            return node
        if isinstance(node, BINDERS):
            new = VarId(base + depth + 1)
            inner = {**env, node.var: new}
            if isinstance(node, BOUNDED):
                return type(node)(new, go(node.guard, inner, depth + 1), go(node.body, inner, depth + 1))
            return type(node)(new, go(node.body, inner, depth + 1))
        return rebuild(node, [go(k, env, depth) for k in children(node)])

    return go(f, {}, 0)


def alpha_equal(a: Formula, b: Formula) -> bool:
    if a == b:
        return True
    return free_vars(a) == free_vars(b) and canonical(a) == canonical(b)


# ---------------------------------------------------------------------------
# Boolean templates and quantifier prefixes


@dataclass(frozen=True)
class BooleanTemplate:
    """Boolean expression over numbered holes ``#1 .. #n``."""
    shape: Formula

    def __post_init__(self) -> None:
        for node in walk(self.shape):
            if not isinstance(node, (Hole, Not) + BINARY):
                raise ValueError(f"template nodes must be holes or connectives, got {type(node).__name__}")
        holes = self.holes()
        if holes != set(range(1, len(holes) + 1)):
            raise ValueError(f"template holes must be exactly 1..n, got {sorted(holes)}")

    def holes(self) -> set[int]:
        return {n.index for n in walk(self.shape) if isinstance(n, Hole)}

    @property
    def arity(self) -> int:
        return len(self.holes())

    @property
    def is_identity(self) -> bool:
        return isinstance(self.shape, Hole)

    def instantiate(self, args: Sequence[Formula]) -> Formula:
        if len(args) != self.arity:
            raise ValueError(f"template takes {self.arity} arguments, got {len(args)}")

        def go(node: Formula) -> Formula:
            if isinstance(node, Hole):
                return args[node.index - 1]
            return rebuild(node, [go(k) for k in children(node)])

        return go(self.shape)

    @classmethod
    def abstract(cls, f: Formula, is_leaf: Callable[[Formula], bool]) -> tuple[BooleanTemplate, list[Formula]]:
        """Split ``f`` into a template and its leaves.

        Descends through connectives until ``is_leaf`` accepts a node; nodes
        that are not connectives are always leaves.  Structurally equal leaves
        share a hole.
        """
        leaves: list[Formula] = []

        def go(node: Formula) -> Formula:
            if is_leaf(node) or not isinstance(node, (Not,) + BINARY):
                for i, seen in enumerate(leaves):
                    if seen == node:
                        return Hole(i + 1)
                leaves.append(node)
                return Hole(len(leaves))
            return rebuild(node, [go(k) for k in children(node)])

        return cls(go(f)), leaves

    def __str__(self) -> str:
        return to_text(self.shape)


@dataclass(frozen=True)
class QuantifierPrefix:
    """Ordered quantifier block, outermost first."""
    items: tuple[tuple[str, VarId], ...] = ()

    def __post_init__(self) -> None:
        for kind, _ in self.items:
            if kind not in ("forall", "exists"):
                raise ValueError(f"quantifier kind must be 'forall' or 'exists', got {kind!r}")
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def vars(self) -> tuple[VarId, ...]:
        return tuple(v for _, v in self.items)

    def __len__(self) -> int:
        return len(self.items)

    def apply(self, body: Formula) -> Formula:
        for kind, var in reversed(self.items):
            body = Forall(var, body) if kind == "forall" else Exists(var, body)
        return body

    @classmethod
    def split(cls, f: Formula) -> tuple[QuantifierPrefix, Formula]:
        """Peel the maximal block of plain quantifiers off ``f``."""
        items = []
        while isinstance(f, QUANTIFIERS):
            items.append(("forall" if isinstance(f, Forall) else "exists", f.var))
            f = f.body
        return cls(tuple(items)), f

    def __str__(self) -> str:
        return " ".join(f"{k} {v}." for k, v in self.items)


# ---------------------------------------------------------------------------
# Prenex normal form


def _nnf(f: Formula, negate: bool = False) -> Formula:
    """Negation normal form over And/Or/Not-atom/Exists/Forall.

    Expects bounded quantifiers and Iff to be expanded already.
    """
    if isinstance(f, ATOMS):
        if isinstance(f, Truth):
            return Truth(f.value != negate)
        return Not(f) if negate else f
    if isinstance(f, Not):
        return _nnf(f.arg, not negate)
    if isinstance(f, And):
        l, r = _nnf(f.left, negate), _nnf(f.right, negate)
        return Or(l, r) if negate else And(l, r)
    if isinstance(f, Or):
        l, r = _nnf(f.left, negate), _nnf(f.right, negate)
        return And(l, r) if negate else Or(l, r)
    if isinstance(f, Implies):
        return _nnf(Or(Not(f.left), f.right), negate)
    if isinstance(f, Exists):
        body = _nnf(f.body, negate)
        return Forall(f.var, body) if negate else Exists(f.var, body)
    if isinstance(f, Forall):
        body = _nnf(f.body, negate)
        return Exists(f.var, body) if negate else Forall(f.var, body)
    raise TypeError(f"unexpected node in nnf: {type(f).__name__}")


def _expand_for_prenex(f: Formula) -> Formula:
    if isinstance(f, Iff):
        l, r = _expand_for_prenex(f.left), _expand_for_prenex(f.right)
        return And(Implies(l, r), Implies(r, l))
    if isinstance(f, BForall):
        return Forall(f.var, Implies(_expand_for_prenex(f.guard), _expand_for_prenex(f.body)))
    if isinstance(f, BExists):
        return Exists(f.var, And(_expand_for_prenex(f.guard), _expand_for_prenex(f.body)))
    if isinstance(f, ATOMS):
        return f
    return rebuild(f, [_expand_for_prenex(k) for k in children(f)])


def _pull(f: Formula) -> tuple[list[tuple[str, VarId]], Formula]:
    if isinstance(f, Exists):
        items, m = _pull(f.body)
        return [("exists", f.var)] + items, m
    if isinstance(f, Forall):
        items, m = _pull(f.body)
        return [("forall", f.var)] + items, m
    if isinstance(f, (And, Or)):
        li, lm = _pull(f.left)
        ri, rm = _pull(f.right)
        return li + ri, type(f)(lm, rm)
    return [], f


def prenex(f: Formula) -> tuple[QuantifierPrefix, Formula]:
    """Prenex normal form: ``prefix.apply(matrix)`` is equivalent to ``f``.

    Iff and bounded quantifiers are expanded (duplicating subformulas), bound
    variables are renamed apart, negations are pushed to the atoms, and the
    quantifiers are pulled out of conjunctions and disjunctions.
    """
    g = rename_apart(_expand_for_prenex(f))
    items, matrix = _pull(_nnf(g))
    return QuantifierPrefix(tuple(items)), matrix


# ---------------------------------------------------------------------------
# Concrete syntax


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<iff><->)
  | (?P<imp>->)
  | (?P<hole>\#\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>[()~&|=.,])
""", re.VERBOSE)

_KEYWORDS = {"forall", "exists", "in", "true", "false"}
_EXPLICIT_RE = re.compile(r"v(\d+)$")


@dataclass(frozen=True, slots=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "ident" and value in _KEYWORDS:
                kind = value
            elif kind == "punct":
                kind = value
            toks.append(_Tok(kind, value, pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class VarTable:
    """Name <-> index table used while parsing.

    Identifiers of the form ``v<digits>`` denote that index directly; any
    other name is interned to the smallest index not yet taken, in order of
    first occurrence.  One table can be shared by several parses so that the
    same name means the same variable across a formula, its facts and a trace.
    """

    def __init__(self, names: Mapping[str, int] | None = None):
        self._by_name: dict[str, int] = {}
        self._by_index: dict[int, str] = {}
        for name, index in (names or {}).items():
            self._bind(name, index)

    def _bind(self, name: str, index: int) -> None:
        other = self._by_index.get(index)
        if other is not None and other != name:
            raise ParseError(f"variable index {index} already names {other!r}", 0)
        self._by_name[name] = index
        self._by_index[index] = name

    def reserve(self, name: str) -> None:
        m = _EXPLICIT_RE.match(name)
        if m and name not in self._by_name:
            index = int(m.group(1))
            if index >= 1:
                self._bind(name, index)

    def get(self, name: str) -> VarId:
        index = self._by_name.get(name)
        if index is None:
            m = _EXPLICIT_RE.match(name)
            if m and int(m.group(1)) >= 1:
                index = int(m.group(1))
            else:
                index = 1
                while index in self._by_index:
                    index += 1
            self._bind(name, index)
        return VarId(index, name)

    def learn(self, f: Formula) -> None:
        """Record the names carried by the variables of ``f``."""
        for v in sorted(variables(f)):
            if v.name and v.name not in self._by_name and v.index not in self._by_index:
                self._bind(v.name, v.index)

    def as_dict(self) -> dict[str, int]:
        return dict(self._by_name)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name


class _Parser:
    def __init__(self, text: str, sig: Signature | None, table: VarTable, holes: bool):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.sig = sig
        self.inferred: dict[str, int] = {}
        self.table = table
        self.holes = holes
        for t in self.toks:
            if t.kind == "ident":
                table.reserve(t.text)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.tok
        found = f"'{tok.text}'" if tok.kind != "eof" else "end of input"
        return ParseError(f"{message}, found {found}", tok.pos, self.text)

    def eat(self, kind: str) -> _Tok:
        if self.tok.kind != kind:
            raise self.error(f"expected '{kind}'")
        tok = self.tok
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.formula()
        if self.tok.kind != "eof":
            raise self.error("unexpected trailing input")
        return f

    def formula(self) -> Formula:
        if self.tok.kind in ("forall", "exists"):
            return self.quantified()
        return self.iff()

    def quantified(self) -> Formula:
        kind = self.tok.kind
        self.i += 1
        var = self.var()
        guard = None
        if self.tok.kind == "in":
            self.i += 1
            guard = self.formula()
        self.eat(".")
        body = self.formula()
        if guard is None:
            return Forall(var, body) if kind == "forall" else Exists(var, body)
        return BForall(var, guard, body) if kind == "forall" else BExists(var, guard, body)

    def var(self) -> VarId:
        tok = self.eat("ident")
        return self.table.get(tok.text)

    def iff(self) -> Formula:
        left = self.implies()
        while self.tok.kind == "iff":
            self.i += 1
            left = Iff(left, self.implies())
        return left

    def implies(self) -> Formula:
        left = self.disj()
        if self.tok.kind == "imp":
            self.i += 1
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.tok.kind == "|":
            self.i += 1
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.unary()
        while self.tok.kind == "&":
            self.i += 1
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        if self.tok.kind == "~":
            self.i += 1
            return Not(self.unary())
        if self.tok.kind in ("forall", "exists"):
            return self.quantified()
        return self.primary()

    def primary(self) -> Formula:
        tok = self.tok
        if tok.kind == "true":
            self.i += 1
            return TRUE
        if tok.kind == "false":
            self.i += 1
            return FALSE
        if tok.kind == "(":
            self.i += 1
            f = self.formula()
            self.eat(")")
            return f
        if tok.kind == "hole":
            if not self.holes:
                raise self.error("holes are only allowed in templates")
            self.i += 1
            return Hole(int(tok.text[1:]))
        if tok.kind != "ident":
            raise self.error("expected a formula")
        self.i += 1
        if self.tok.kind == "=":
            self.i += 1
            left = self.table.get(tok.text)
            return Eq(left, self.var())
        args: list[VarId] = []
        if self.tok.kind == "(":
            self.i += 1
            if self.tok.kind != ")":
                args.append(self.var())
                while self.tok.kind == ",":
                    self.i += 1
                    args.append(self.var())
            self.eat(")")
        self.check_pred(tok, len(args))
        return Pred(tok.text, tuple(args))

    def check_pred(self, tok: _Tok, n: int) -> None:
        if self.sig is not None:
            if tok.text not in self.sig:
                raise SignatureError(f"unknown predicate {tok.text!r} at offset {tok.pos}")
            arity = self.sig.arity(tok.text)
        else:
            arity = self.inferred.setdefault(tok.text, n)
        if arity != n:
            raise SignatureError(
                f"predicate {tok.text!r} has arity {arity}, got {n} arguments at offset {tok.pos}")


def parse(text: str, sig: Signature | None = None, table: VarTable | None = None) -> Formula:
    """Parse ``text``; without ``sig`` arities are inferred from first use."""
    return _Parser(text, sig, table if table is not None else VarTable(), holes=False).parse()


def parse_template(text: str, table: VarTable | None = None) -> BooleanTemplate:
    return BooleanTemplate(_Parser(text, None, table or VarTable(), holes=True).parse())


def parse_prefix(text: str, table: VarTable | None = None) -> QuantifierPrefix:
    """Parse a block such as ``forall z. exists w.`` (the dots are optional)."""
    table = table if table is not None else VarTable()
    items = []
    words = text.replace(",", " ").replace(".", " ").split()
    if len(words) % 2:
        raise ParseError("quantifier prefix needs (kind, variable) pairs", len(text), text)
    for kind, name in zip(words[::2], words[1::2]):
        if kind not in ("forall", "exists"):
            raise ParseError(f"expected 'forall' or 'exists', found {kind!r}", text.find(kind), text)
        items.append((kind, table.get(name)))
    return QuantifierPrefix(tuple(items))


def infer_signature(*formulas: Formula) -> Signature:
    preds: dict[str, int] = {}
    for f in formulas:
        for node in walk(f):
            if isinstance(node, Pred):
                if preds.setdefault(node.name, len(node.args)) != len(node.args):
                    raise SignatureError(f"predicate {node.name!r} used with two arities")
    return Signature(preds)


# printing

_LEVEL = {Iff: 1, Implies: 2, Or: 3, And: 4}
_OPS = {Iff: "<->", Implies: "->", Or: "|", And: "&"}


def _level(f: Formula) -> int:
    if isinstance(f, BINDERS):
        return 0
    if isinstance(f, BINARY):
        return _LEVEL[type(f)]
    if isinstance(f, Not):
        return 5
    return 6


def to_text(f: Formula) -> str:
    """Render ``f`` in the concrete grammar; ``parse`` inverts it."""
    return _show(f)


def _wrap(f: Formula, need: int) -> str:
    s = _show(f)
    return f"({s})" if _level(f) < need else s


def _show(f: Formula) -> str:
    if isinstance(f, Truth):
        return "true" if f.value else "false"
    if isinstance(f, Pred):
        return f"{f.name}({','.join(str(a) for a in f.args)})"
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, Hole):
        return f"#{f.index}"
    if isinstance(f, Not):
        if isinstance(f.arg, Eq):
            return f"~({_show(f.arg)})"
        return "~" + _wrap(f.arg, 5)
    if isinstance(f, BINARY):
        lvl = _LEVEL[type(f)]
        if isinstance(f, Implies):
            left, right = _wrap(f.left, lvl + 1), _wrap(f.right, lvl)
        else:
            left, right = _wrap(f.left, lvl), _wrap(f.right, lvl + 1)
        return f"{left} {_OPS[type(f)]} {right}"
    if isinstance(f, QUANTIFIERS):
        kind = "forall" if isinstance(f, Forall) else "exists"
        return f"{kind} {f.var}. {_show(f.body)}"
    if isinstance(f, BOUNDED):
        kind = "forall" if isinstance(f, BForall) else "exists"
        guard = _show(f.guard)
        if isinstance(f.guard, BINDERS):
            guard = f"({guard})"
        return f"{kind} {f.var} in {guard}. {_show(f.body)}"
    raise TypeError(f"not a formula: {f!r}")
