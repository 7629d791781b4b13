"""Command-line interface.

Exit codes: 0 success / holds, 1 counterexample or property failure,
2 usage, parse or validation error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import identities, nondep, rewrite, semantics, syntax, testkit
from .semantics import Assignment, FiniteModel, load_model, make_window, meaning, satisfies
from .syntax import TRUE, Formula, VarTable, parse, to_text

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 already; keep the message terse
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Input helpers


def read_formula_text(arg: str) -> str:
    """Formula arguments are inline text, or a path to a file holding one."""
    path = Path(arg)
    if path.suffix in (".fol", ".txt") or (len(arg) < 4096 and "\n" not in arg and path.is_file()):
        try:
            return path.read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise UsageError(f"cannot read formula file {arg}: {exc}") from None
    return arg


class Session:
    """Shared variable table and signature for one invocation."""

    def __init__(self, models: Sequence[str] = ()):
        self.table = VarTable()
        self.models: dict[str, FiniteModel] = {}
        for path in models:
            try:
                self.models[path] = load_model(path)
            except OSError as exc:
                raise UsageError(f"cannot read model {path}: {exc}") from None
        sigs = {m.signature for m in self.models.values()}
        self.sig = next(iter(sigs)) if len(sigs) == 1 else None
        if len(sigs) > 1:
            raise UsageError("models disagree on their signature")

    def formula(self, arg: str | None) -> Formula | None:
        if arg is None:
            return None
        return parse(read_formula_text(arg), self.sig, self.table)

    def var(self, name: str):
        return self.table.get(name)


def _emit(args, text_lines: Sequence[str], data: Any) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=1, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _assignment_json(a: Assignment | None) -> dict | None:
    return None if a is None else {str(v): x for v, x in zip(a.window, a.values)}


def _parse_assign(items: Sequence[str], session: Session) -> dict:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not value.strip().isdigit():
            raise UsageError(f"--assign expects name=element, got {item!r}")
        out[session.var(name.strip())] = int(value)
    return out


def _window(arg: str | None, session: Session, f: Formula):
    if arg is None:
        return make_window(syntax.free_vars(f))
    names = [n.strip() for n in arg.split(",") if n.strip()]
    return make_window(session.var(n) for n in names)


# ---------------------------------------------------------------------------
# Commands


def cmd_parse(args) -> int:
    s = Session()
    f = s.formula(args.formula)
    free = sorted(syntax.free_vars(f))
    data = {"formula": to_text(f), "free": [str(v) for v in free], "size": syntax.size(f),
            "vars": s.table.as_dict()}
    if args.desugar:
        data["desugared"] = to_text(syntax.desugar(f))
    lines = [data["formula"], f"free: {', '.join(data['free']) or '-'}", f"size: {data['size']}"]
    if args.desugar:
        lines.append(f"desugared: {data['desugared']}")
    _emit(args, lines, data)
    return OK


def cmd_eval(args) -> int:
    s = Session(args.model)
    f = s.formula(args.formula)
    fixed = _parse_assign(args.assign, s)
    rest = sorted(syntax.free_vars(f) - set(fixed))
    verdicts, failure = {}, None
    for name, model in s.models.items():
        for v, b in fixed.items():
            if not 0 <= b < model.domain_size:
                raise UsageError(f"{v}={b} is outside the domain of {name}")
        ok, witness = True, None
        for a in semantics.assignments(model, rest):
            full = Assignment.of({**fixed, **a.as_dict()})
            if not satisfies(model, f, full):
                ok, witness = False, full
                break
        verdicts[name] = ok
        if not ok and failure is None:
            failure = (name, witness)
    holds = all(verdicts.values())
    data = {"formula": to_text(f), "holds": holds, "models": verdicts,
            "counterexample": failure and {"model": failure[0], "assignment": _assignment_json(failure[1])}}
    lines = [f"{name}: {'true' if v else 'false'}" for name, v in verdicts.items()]
    if failure:
        lines.append(f"falsified on {failure[0]} at {failure[1]}")
    _emit(args, lines, data)
    return OK if holds else FAILED


def cmd_meaning(args) -> int:
    s = Session(args.model)
    f = s.formula(args.formula)
    window = _window(args.window, s, f)
    out, lines = {}, []
    for name, model in s.models.items():
        m = meaning(model, f, window)
        rows = [list(a.values) for a in sorted(m, key=lambda a: a.values)]
        out[name] = {"window": [str(v) for v in window], "rows": rows, "size": len(rows)}
        lines.append(f"{name}: {len(rows)} of {model.domain_size ** len(window)} assignments over "
                     f"({', '.join(map(str, window))})")
        lines.extend("  " + " ".join(map(str, r)) for r in rows)
    _emit(args, lines, {"formula": to_text(f), "models": out})
    return OK


def cmd_nondep(args) -> int:
    s = Session(args.model)
    f = s.formula(args.formula)
    theta = s.formula(args.theta) or TRUE
    x = s.var(args.var)
    verdicts, lines = {}, []
    holds = True
    for name, model in s.models.items():
        v = nondep.check_nondep(model, f, x, theta)
        routes = {"direct": v.holds, "substitution": nondep.check_nondep_subst(model, f, x, theta)}
        if theta == TRUE:
            routes["plain"] = nondep.check_nondep_plain_equiv(model, f, x)
        entry = {"holds": v.holds, "routes": routes, "counterexample": None}
        if not v:
            a, b = v.counterexample
            entry["counterexample"] = {"assignment": _assignment_json(a), "value": b}
            lines.append(f"{name}: depends on {x}: at {a}, changing {x} to {b} changes the truth value")
        else:
            lines.append(f"{name}: non-dependent")
        if len(set(routes.values())) != 1:
            lines.append(f"{name}: routes disagree {routes}")
            holds = False
        holds = holds and v.holds
        verdicts[name] = entry
    query = str(nondep.NonDepQuery(f, x, theta))
    _emit(args, [query] + lines + ["holds" if holds else "fails"],
          {"query": query, "holds": holds, "models": verdicts})
    return OK if holds else FAILED


_SLOT_FORMULAS = ("phi", "psi", "theta", "theta2", "iota", "eps")
_SLOT_VARS = ("x", "y", "u")


def _identity_slots(args, s: Session) -> dict:
    ident = identities.lookup(args.name)
    wanted = set(ident.required) | set(ident.optional)
    slots: dict[str, Any] = {}
    for key in _SLOT_FORMULAS:
        value = getattr(args, key)
        if value is not None and key in wanted:
            slots[key] = s.formula(value)
    for key in _SLOT_VARS:
        value = getattr(args, key)
        if key == "x":
            value = value or args.var
        if value is not None and key in wanted:
            slots[key] = s.var(value)
    if args.phis and "phis" in wanted:
        slots["phis"] = tuple(s.formula(p) for p in args.phis)
    if args.template and "template" in wanted:
        slots["template"] = syntax.parse_template(args.template)
    if "prefix" in wanted:
        slots["prefix"] = syntax.parse_prefix(args.prefix or "", s.table)
    if args.bounded and "bounded" in wanted:
        slots["bounded"] = syntax.parse_prefix(args.bounded, s.table)
    if args.zs is not None and "zs" in wanted:
        slots["zs"] = tuple(s.var(z.strip()) for z in args.zs.split(",") if z.strip())
    if args.kinds and "kinds" in wanted:
        slots["kinds"] = tuple(k.strip() for k in args.kinds.split(","))
    for key in ("outer", "connective"):
        if getattr(args, key) and key in wanted:
            slots[key] = getattr(args, key)
    return slots


def cmd_identity(args) -> int:
    s = Session(args.model)
    try:
        slots = _identity_slots(args, s)
        results = {name: identities.check_identity(args.name, m, slots, force=args.force)
                   for name, m in s.models.items()}
    except identities.IdentityError as exc:
        raise UsageError(str(exc)) from None
    lines, out = [], {}
    for name, r in results.items():
        cex = r.counterexample
        if isinstance(cex, Assignment):
            cex = _assignment_json(cex)
        elif isinstance(cex, tuple) and cex and isinstance(cex[0], Assignment):
            cex = {"assignment": _assignment_json(cex[0]), "value": cex[1]}
        out[name] = {"status": r.status, "conditions": r.conditions, "claims": r.claims,
                     "failed_claim": r.failed_claim, "counterexample": cex}
        lines.append(f"{name}: {r.status}")
        lines.extend(f"  condition {k}: {'ok' if v else 'UNMET'}" for k, v in r.conditions.items())
        lines.extend(f"  claim {k}: {'ok' if v else 'FAILS'}" for k, v in r.claims.items())
        if r.status == "fails":
            lines.append(f"  counterexample for {r.failed_claim}: {cex}")
    holds = all(r.status == "holds" for r in results.values())
    _emit(args, lines, {"identity": identities.lookup(args.name).name, "holds": holds, "models": out})
    return OK if holds else FAILED


def _load_facts(path: str | None, s: Session) -> nondep.FactBase | None:
    if path is None:
        return None
    try:
        return nondep.load_facts(path, s.sig, s.table)
    except OSError as exc:
        raise UsageError(f"cannot read facts {path}: {exc}") from None


def cmd_simplify(args) -> int:
    s = Session(args.models or ())
    f = s.formula(args.formula)
    facts = _load_facts(args.facts, s)
    result, trace = rewrite.simplify(f, facts, s.models, budget=args.budget, check_steps=not args.no_check)
    trace.names = s.table.as_dict()
    if args.trace:
        trace.save(args.trace)
    status = OK
    data = {"input": to_text(f), "output": to_text(result), "steps": len(trace.committed),
            "rejected": len(trace.steps) - len(trace.committed), "budget_exhausted": trace.budget_exhausted}
    lines = [to_text(result)]
    for step in trace.steps:
        mark = "" if step.status == "committed" else f"  [rejected: {step.reason}]"
        lines.append(f"  {step.rule} at {list(step.path)}{mark}")
    if trace.budget_exhausted:
        lines.append("budget exhausted; result is the best so far")
    if args.expect:
        expected = s.formula(args.expect)
        same = syntax.alpha_equal(result, expected)
        data["matches_expected"] = same
        lines.append("matches expected" if same else f"differs from expected {to_text(expected)}")
        status = OK if same else FAILED
    _emit(args, lines, data)
    return status


def cmd_verify(args) -> int:
    s = Session(args.models or ())
    try:
        trace = rewrite.load_trace(args.trace)
    except OSError as exc:
        raise UsageError(f"cannot read trace {args.trace}: {exc}") from None
    report = rewrite.verify_trace(trace, s.models)
    lines = []
    for st in report.steps:
        lines.append(f"step {st.index} {st.rule}: {'ok' if st.ok else 'FAILED'}")
        lines.extend(f"  {m}" for m in st.messages)
        lines.extend(f"  obligations fail on {n}" for n, ok in st.obligations.items() if not ok)
        lines.extend(f"  not equivalent on {n}" for n, ok in st.equivalent.items() if not ok)
    if not report.end_matches:
        lines.append("trace end does not match the replayed result")
    lines.extend(f"warning: {w}" for w in report.warnings)
    lines.append("verified" if report.ok else "verification failed")
    data = {"ok": report.ok, "end_matches": report.end_matches, "warnings": report.warnings,
            "steps": [{"index": st.index, "rule": st.rule, "ok": st.ok, "continuity": st.continuity,
                       "replay": st.replay, "obligations": st.obligations, "equivalent": st.equivalent,
                       "messages": st.messages} for st in report.steps]}
    _emit(args, lines, data)
    return OK if report.ok else FAILED


def cmd_proptest(args) -> int:
    names = list(testkit.SUITES) if args.suite in (None, "all") else [n.strip() for n in args.suite.split(",")]
    try:
        reports = testkit.run_suites(names, args.seed, args.iters)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    lines = []
    for r in reports:
        extra = f", {r.skipped} exhausted" if r.skipped else ""
        lines.append(f"{r.name}: {r.cases} cases, {r.failures} failures{extra}")
        if r.first_failure:
            lines.append(f"  first failure: {r.first_failure}")
    ok = all(r.ok for r in reports)
    _emit(args, lines, {"seed": args.seed, "iters": args.iters, "ok": ok, "suites": [r.to_json() for r in reports]})
    return OK if ok else FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")

    p = _Parser(prog="qhoist", description="Non-dependence checking and certified quantifier rewriting "
                                           "over finite models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("parse", parents=[common], help="parse and print a formula")
    sp.add_argument("--formula", required=True)
    sp.add_argument("--desugar", action="store_true", help="also print the desugared form")
    sp.set_defaults(fn=cmd_parse)

    sp = sub.add_parser("eval", parents=[common], help="evaluate a formula on models")
    sp.add_argument("--model", required=True, action="append")
    sp.add_argument("--formula", required=True)
    sp.add_argument("--assign", action="append", metavar="VAR=ELEM",
                    help="fix a variable; unfixed free variables are checked for every value")
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("meaning", parents=[common], help="list satisfying assignments")
    sp.add_argument("--model", required=True, action="append")
    sp.add_argument("--formula", required=True)
    sp.add_argument("--window", help="comma-separated variables (default: free variables)")
    sp.set_defaults(fn=cmd_meaning)

    sp = sub.add_parser("nondep", parents=[common], help="check non-dependence of a formula on a variable")
    sp.add_argument("--model", required=True, action="append")
    sp.add_argument("--formula", required=True)
    sp.add_argument("--var", default="x")
    sp.add_argument("--theta", help="proviso formula (default true)")
    sp.set_defaults(fn=cmd_nondep)

    sp = sub.add_parser("identity", parents=[common], help="check a named identity on models")
    sp.add_argument("--name", required=True)
    sp.add_argument("--model", required=True, action="append")
    for key in _SLOT_FORMULAS:
        sp.add_argument(f"--{key}")
    sp.add_argument("--var", default="x", help="the variable x (same as --x)")
    sp.add_argument("--x")
    sp.add_argument("--y")
    sp.add_argument("--u")
    sp.add_argument("--phis", nargs="+", metavar="FORMULA")
    sp.add_argument("--template", help="boolean template over holes #1, #2, ...")
    sp.add_argument("--prefix", help="quantifier prefix, e.g. 'forall z. exists w.'")
    sp.add_argument("--bounded", help="iota-bounded block as a prefix, e.g. 'forall u.'")
    sp.add_argument("--zs", help="comma-separated existential block")
    sp.add_argument("--kinds", help="comma-separated forall/exists per formula")
    sp.add_argument("--outer", choices=("forall", "exists"))
    sp.add_argument("--connective", choices=sorted(identities.CONNECTIVES))
    sp.add_argument("--force", action="store_true", help="check the claims even if side conditions fail")
    sp.set_defaults(fn=cmd_identity)

    sp = sub.add_parser("simplify", parents=[common], help="simplify with certified rewrites")
    sp.add_argument("--formula", required=True)
    sp.add_argument("--facts")
    sp.add_argument("--models", nargs="*")
    sp.add_argument("--budget", type=int, default=100)
    sp.add_argument("--trace", help="write the rewrite trace here")
    sp.add_argument("--expect", help="compare the result with this formula up to renaming of bound variables")
    sp.add_argument("--no-check", action="store_true", help="skip per-step equivalence checks")
    sp.set_defaults(fn=cmd_simplify)

    sp = sub.add_parser("verify", parents=[common], help="replay and check a rewrite trace")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--models", nargs="*")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("proptest", parents=[common], help="run seeded property suites")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--iters", type=int, default=100)
    sp.add_argument("--suite", help=f"comma-separated from {', '.join(testkit.SUITES)} (default all)")
    sp.set_defaults(fn=cmd_proptest)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "budget", 1) < 0 or getattr(args, "iters", 1) < 0:
        print("error: counts must be non-negative", file=sys.stderr)
        return USAGE
    try:
        return args.fn(args)
    except syntax.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
    except (UsageError, syntax.FolError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return USAGE


if __name__ == "__main__":
    sys.exit(main())
