"""Finite models, satisfaction and meaning sets.

Two independent evaluation routes live here.  :func:`satisfies` follows the
recursive satisfaction clauses one assignment at a time.  :func:`meaning`
computes the whole set of satisfying assignments at once as a boolean array
over a variable window, using complement, intersection and cylindrification
(``any`` along an axis); it is the fast path used by the rest of the package.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .syntax import (
    And, Eq, Exists, FolError, Formula, Hole, Not, Pred, Signature, Truth, VarId,
    desugar, free_vars, variables,
)


class ModelError(FolError):
    """Malformed model or model file."""


class WindowError(FolError):
    """An assignment or window misses a variable it needs."""


@dataclass(frozen=True)
class FiniteModel:
    domain_size: int
    interp: Mapping[str, frozenset[tuple[int, ...]]]
    arities: Mapping[str, int]

    def __post_init__(self) -> None:
        if self.domain_size < 1:
            raise ModelError("domain must be non-empty")
        if set(self.interp) != set(self.arities):
            raise ModelError("interpretation and arity table name different predicates")
        interp = {}
        for name, tuples in self.interp.items():
            k = self.arities[name]
            clean = set()
            for t in tuples:
                t = tuple(int(e) for e in t)
                if len(t) != k:
                    raise ModelError(f"tuple {t} for {name!r} does not have arity {k}")
                if any(not 0 <= e < self.domain_size for e in t):
                    raise ModelError(f"tuple {t} for {name!r} leaves the domain 0..{self.domain_size - 1}")
                clean.add(t)
            interp[name] = frozenset(clean)
        object.__setattr__(self, "interp", interp)
        object.__setattr__(self, "arities", dict(self.arities))
        object.__setattr__(self, "_tables", {})

    @classmethod
    def build(cls, domain_size: int, relations: Mapping[str, Iterable[Sequence[int]]],
              arities: Mapping[str, int] | None = None) -> FiniteModel:
        rels = {k: frozenset(tuple(t) for t in v) for k, v in relations.items()}
        if arities is None:
            arities = {}
            for name, tuples in rels.items():
                lengths = {len(t) for t in tuples}
                if len(lengths) != 1:
                    raise ModelError(f"cannot infer the arity of {name!r}; pass arities")
                arities[name] = lengths.pop()
        return cls(domain_size, rels, arities)

    @property
    def signature(self) -> Signature:
        return Signature(self.arities)

    @property
    def domain(self) -> range:
        return range(self.domain_size)

    def holds(self, name: str, args: tuple[int, ...]) -> bool:
        try:
            return args in self.interp[name]
        except KeyError:
            raise ModelError(f"predicate {name!r} is not interpreted in this model") from None

    def table(self, name: str) -> np.ndarray:
        """Dense boolean array of the relation, one axis per argument."""
        tables = self._tables  # type: ignore[attr-defined]
        if name not in tables:
            if name not in self.interp:
                raise ModelError(f"predicate {name!r} is not interpreted in this model")
            arr = np.zeros((self.domain_size,) * self.arities[name], dtype=bool)
            for t in self.interp[name]:
                arr[t] = True
            arr.flags.writeable = False
            tables[name] = arr
        return tables[name]

    def __hash__(self) -> int:
        return hash((self.domain_size, tuple(sorted((k, tuple(sorted(v))) for k, v in self.interp.items()))))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FiniteModel):
            return NotImplemented
        return (self.domain_size == other.domain_size and self.interp == other.interp
                and self.arities == other.arities)

    def to_json(self) -> dict:
        return {
            "domain": self.domain_size,
            "predicates": {
                name: {"arity": self.arities[name], "tuples": sorted(list(t) for t in self.interp[name])}
                for name in sorted(self.interp)
            },
        }

    @classmethod
    def from_json(cls, data: Mapping) -> FiniteModel:
        try:
            n = int(data["domain"])
            preds = data.get("predicates", {})
            rels = {name: [tuple(t) for t in entry.get("tuples", [])] for name, entry in preds.items()}
            arities = {name: int(entry["arity"]) for name, entry in preds.items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed model document: {exc}") from exc
        return cls(n, rels, arities)


def load_model(path: str | Path) -> FiniteModel:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: {exc}") from exc
    return FiniteModel.from_json(data)


def save_model(model: FiniteModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Windows and assignments

Window = tuple[VarId, ...]


def make_window(vars: Iterable[VarId]) -> Window:
    """Window sorted by variable index; duplicates are rejected."""
    vs = list(vars)
    if len(set(vs)) != len(vs):
        raise WindowError("duplicate variable in window")
    return tuple(sorted(vs))


@dataclass(frozen=True)
class Assignment:
    window: Window
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.window) != len(self.values):
            raise WindowError("assignment length does not match its window")
        if len(set(self.window)) != len(self.window):
            raise WindowError("duplicate variable in window")

    @classmethod
    def of(cls, mapping: Mapping[VarId, int]) -> Assignment:
        window = make_window(mapping)
        return cls(window, tuple(mapping[v] for v in window))

    def as_dict(self) -> dict[VarId, int]:
        return dict(zip(self.window, self.values))

    def __getitem__(self, var: VarId) -> int:
        try:
            return self.values[self.window.index(var)]
        except ValueError:
            raise KeyError(var) from None

    def restrict(self, window: Sequence[VarId]) -> Assignment:
        return Assignment(tuple(window), tuple(self[v] for v in window))

    def __str__(self) -> str:
        return "{" + ", ".join(f"{v}->{a}" for v, a in zip(self.window, self.values)) + "}"


def override(a: Assignment, x: VarId, b: int, model: FiniteModel | None = None) -> Assignment:
    """``a`` with ``x`` set to ``b``; ``x`` is appended when outside the window."""
    if b < 0 or (model is not None and b >= model.domain_size):
        raise ValueError(f"element {b} is outside the domain")
    if x in a.window:
        i = a.window.index(x)
        return Assignment(a.window, a.values[:i] + (b,) + a.values[i + 1:])
    return Assignment(a.window + (x,), a.values + (b,))


def assignments(model: FiniteModel, window: Sequence[VarId]) -> Iterator[Assignment]:
    """All assignments over ``window`` in lexicographic order."""
    window = tuple(window)
    for values in itertools.product(range(model.domain_size), repeat=len(window)):
        yield Assignment(window, values)


# ---------------------------------------------------------------------------
# Satisfaction, clause by clause


def satisfies(model: FiniteModel, phi: Formula, a: Assignment) -> bool:
    missing = free_vars(phi) - set(a.window)
    if missing:
        raise WindowError(f"assignment does not cover free variables {sorted(missing)}")
    for v in a.values:
        if not 0 <= v < model.domain_size:
            raise ValueError(f"element {v} is outside the domain")
    return _sat(model, desugar(phi), a.as_dict())


def _sat(model: FiniteModel, f: Formula, env: dict[VarId, int]) -> bool:
    if isinstance(f, Pred):
        return model.holds(f.name, tuple(env[v] for v in f.args))
    if isinstance(f, Eq):
        return env[f.left] == env[f.right]
    if isinstance(f, Truth):
        return f.value
    if isinstance(f, Not):
        return not _sat(model, f.arg, env)
    if isinstance(f, And):
        return _sat(model, f.left, env) and _sat(model, f.right, env)
    if isinstance(f, Exists):
        saved = env.get(f.var)
        try:
            for b in range(model.domain_size):
                env[f.var] = b
                if _sat(model, f.body, env):
                    return True
            return False
        finally:
            if saved is None:
                del env[f.var]
            else:
                env[f.var] = saved
    if isinstance(f, Hole):
        raise TypeError("cannot evaluate a template hole")
    raise TypeError(f"unexpected node after desugaring: {type(f).__name__}")


# ---------------------------------------------------------------------------
# Meaning sets


@dataclass(frozen=True)
class MeaningSet:
    """Satisfying assignments over ``window`` as a dense boolean array.

    ``table[i1, ..., ik]`` is true iff the assignment sending the j-th window
    variable to ``ij`` is in the set; row order is lexicographic.
    """
    window: Window
    table: np.ndarray
    domain_size: int

    def __post_init__(self) -> None:
        expected = (self.domain_size,) * len(self.window)
        if self.table.shape != expected:
            raise WindowError(f"table shape {self.table.shape} does not match window of {len(self.window)}")
        if len(set(self.window)) != len(self.window):
            raise WindowError("duplicate variable in window")

    @property
    def rows(self) -> frozenset[Assignment]:
        return frozenset(self)

    def __iter__(self) -> Iterator[Assignment]:
        for idx in np.argwhere(self.table):
            yield Assignment(self.window, tuple(int(i) for i in idx))

    def __len__(self) -> int:
        return int(self.table.sum())

    def __contains__(self, a: Assignment) -> bool:
        return bool(self.table[tuple(a[v] for v in self.window)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MeaningSet):
            return NotImplemented
        return (self.window == other.window and self.domain_size == other.domain_size
                and bool(np.array_equal(self.table, other.table)))

    def __hash__(self) -> int:
        return hash((self.window, self.table.tobytes()))

    def issubset(self, other: MeaningSet) -> bool:
        _same_window(self, other)
        return bool(np.all(~self.table | other.table))

    @property
    def is_full(self) -> bool:
        return bool(self.table.all())

    def extend(self, window: Sequence[VarId]) -> MeaningSet:
        """Cylinder over the extra variables of ``window`` (a superset)."""
        window = tuple(window)
        if not set(self.window) <= set(window):
            raise WindowError("extension window must contain the current window")
        arr = self.table.reshape(self.table.shape + (1,) * (len(window) - len(self.window)))
        src = list(self.window) + [v for v in window if v not in self.window]
        arr = np.moveaxis(arr, range(len(src)), [window.index(v) for v in src])
        arr = np.broadcast_to(arr, (self.domain_size,) * len(window)).copy()
        return MeaningSet(window, arr, self.domain_size)


def _same_window(a: MeaningSet, b: MeaningSet) -> None:
    if a.window != b.window or a.domain_size != b.domain_size:
        raise WindowError("meaning sets live over different windows")


def complement(s: MeaningSet) -> MeaningSet:
    return MeaningSet(s.window, ~s.table, s.domain_size)


def intersect(s: MeaningSet, t: MeaningSet) -> MeaningSet:
    _same_window(s, t)
    return MeaningSet(s.window, s.table & t.table, s.domain_size)


def union(s: MeaningSet, t: MeaningSet) -> MeaningSet:
    _same_window(s, t)
    return MeaningSet(s.window, s.table | t.table, s.domain_size)


def cylindrify(s: MeaningSet, x: VarId) -> MeaningSet:
    """All assignments whose x-variant lands in ``s`` for some value of x."""
    if x not in s.window:
        raise WindowError(f"{x} is not in the window")
    axis = s.window.index(x)
    arr = np.broadcast_to(s.table.any(axis=axis, keepdims=True), s.table.shape).copy()
    return MeaningSet(s.window, arr, s.domain_size)


def meaning(model: FiniteModel, phi: Formula, window: Sequence[VarId] | None = None) -> MeaningSet:
    """Set of assignments over ``window`` (default: free variables) satisfying ``phi``."""
    window = make_window(free_vars(phi)) if window is None else tuple(window)
    if len(set(window)) != len(window):
        raise WindowError("duplicate variable in window")
    missing = free_vars(phi) - set(window)
    if missing:
        raise WindowError(f"window does not cover free variables {sorted(missing)}")
    axes = list(window) + sorted(variables(phi) - set(window))
    pos = {v: i for i, v in enumerate(axes)}
    arr = _table(model, desugar(phi), pos, len(axes))
    n = model.domain_size
    # variables outside the window are bound, so the array is flat along them
    extra = len(axes) - len(window)
    if extra:
        assert all(s == 1 for s in arr.shape[len(window):]), "meaning depends on a bound variable"
        arr = arr.reshape(arr.shape[:len(window)])
    arr = np.broadcast_to(arr, (n,) * len(window)).copy()
    return MeaningSet(tuple(window), arr, n)


def _table(model: FiniteModel, f: Formula, pos: dict[VarId, int], ndim: int) -> np.ndarray:
    """Boolean array broadcastable to ``(n,) * ndim``; size-1 axes mean 'constant along'."""
    n = model.domain_size
    if isinstance(f, Truth):
        return np.full((1,) * ndim, f.value)
    if isinstance(f, Pred):
        table = model.table(f.name)
        if not f.args:
            return np.full((1,) * ndim, bool(table))
        letters = {}
        sub_in = ""
        for v in f.args:
            letters.setdefault(v, chr(ord("a") + len(letters)))
            sub_in += letters[v]
        order = sorted(letters, key=lambda v: pos[v])
        sub_out = "".join(letters[v] for v in order)
        arr = np.einsum(f"{sub_in}->{sub_out}", table.astype(np.uint8)) > 0
        return _place(arr, [pos[v] for v in order], ndim)
    if isinstance(f, Eq):
        if f.left == f.right:
            return np.ones((1,) * ndim, dtype=bool)
        a, b = sorted((pos[f.left], pos[f.right]))
        return _place(np.eye(n, dtype=bool), [a, b], ndim)
    if isinstance(f, Not):
        return ~_table(model, f.arg, pos, ndim)
    if isinstance(f, And):
        return _table(model, f.left, pos, ndim) & _table(model, f.right, pos, ndim)
    if isinstance(f, Exists):
        body = _table(model, f.body, pos, ndim)
        return body.any(axis=pos[f.var], keepdims=True)
    raise TypeError(f"unexpected node after desugaring: {type(f).__name__}")


def _place(arr: np.ndarray, axes: list[int], ndim: int) -> np.ndarray:
    shape = [1] * ndim
    for ax, size in zip(axes, arr.shape):
        shape[ax] = size
    return arr.reshape(shape)


def valid(model: FiniteModel, phi: Formula) -> bool:
    """True iff ``phi`` holds under every assignment."""
    return meaning(model, phi).is_full


@dataclass(frozen=True)
class Equivalence:
    holds: bool
    counterexample: Assignment | None = None

    def __bool__(self) -> bool:
        return self.holds


def check_equivalent(model: FiniteModel, phi: Formula, psi: Formula) -> Equivalence:
    """Compare meanings over the joint free-variable window.

    On failure the lexicographically least differing assignment is returned.
    """
    window = make_window(free_vars(phi) | free_vars(psi))
    a = meaning(model, phi, window)
    b = meaning(model, psi, window)
    diff = np.argwhere(a.table != b.table)
    if len(diff) == 0:
        return Equivalence(True)
    return Equivalence(False, Assignment(window, tuple(int(i) for i in diff[0])))


def check_subset(model: FiniteModel, phi: Formula, psi: Formula) -> Equivalence:
    """Meaning inclusion of ``phi`` in ``psi``; the witness is the least row of phi outside psi."""
    window = make_window(free_vars(phi) | free_vars(psi))
    a = meaning(model, phi, window)
    b = meaning(model, psi, window)
    diff = np.argwhere(a.table & ~b.table)
    if len(diff) == 0:
        return Equivalence(True)
    return Equivalence(False, Assignment(window, tuple(int(i) for i in diff[0])))


__all__ = [
    "Assignment", "Equivalence", "FiniteModel", "MeaningSet", "ModelError", "Window", "WindowError",
    "assignments", "check_equivalent", "check_subset", "complement", "cylindrify", "intersect", "load_model",
    "make_window", "meaning", "override", "satisfies", "save_model", "union", "valid",
]
