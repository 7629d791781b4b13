import json
import random

import pytest
from hypothesis import given, settings, strategies as st
from conftest import CORPUS, P

from qhoist.nondep import FactBase, NonDepFact, NonDepQuery, ValidityFact, load_facts
from qhoist.rewrite import (
    PRIORITY, RULES, FreenessError, ObligationError, RewriteError, RewriteTrace, RuleMismatch,
    apply_rule, check_obligation, guard_context, load_trace, match_rule, measure, simplify,
    trace_from_json, verify_trace,
)
from qhoist.semantics import FiniteModel, check_equivalent, load_model
from qhoist.syntax import (
    And, BForall, Implies, Not, VarTable, alpha_equal, parse, positions, replace_at, subformula, to_text,
)
from qhoist.testkit import GenConfig, X, Y, Z, gen_model, gen_redex, rng_for


def models_for(seed, k=4):
    cfg = GenConfig(seed=seed)
    return {f"m{j}": gen_model(cfg, rng=rng_for(seed, j)) for j in range(k)}


# --- rules on hand-written inputs


def test_dist_conj(m2):
    f = P("forall x in p(x). (q(x) & r(x,x))")
    out, step = apply_rule("r_dist_conj", f, (), models={"m2": m2})
    assert out == P("(forall x in p(x). q(x)) & (forall x in p(x). r(x,x))")
    back, _ = apply_rule("r_dist_conj", out, (), reverse=True)
    assert back == f


def test_flip_with_nonempty_guard(m2):
    out, step = apply_rule("r_flip", P("exists x in p(x). q(y)"), (), models={"m2": m2})
    assert out == P("forall x in p(x). q(y)")
    assert [d.how for d in step.discharged] == ["syntactic", "models"]


def test_flip_rejected_on_empty_guard():
    empty = FiniteModel.build(2, {"p": [], "q": [(0,)]}, {"p": 1, "q": 1})
    with pytest.raises(ObligationError):
        apply_rule("r_flip", P("exists x in p(x). q(y)"), (), models={"e": empty})


def test_obligation_without_models_or_facts():
    with pytest.raises(ObligationError):
        apply_rule("r_flip", P("exists x in p(x). q(x)"), ())


def test_mismatch_and_freeness():
    with pytest.raises(RuleMismatch):
        apply_rule("r_dist_conj", P("p(x)"), ())
    with pytest.raises(FreenessError):
        apply_rule("r_scope_1", P("exists x. p(x) & q(x)"), ())
    with pytest.raises(FreenessError):
        apply_rule("r_pull_prefix", P("(exists x. r(x,y)) -> forall y. forall x in r(x,y). q(y)"), ())
    with pytest.raises(RewriteError):
        apply_rule("r_nope", P("p(x)"), ())
    with pytest.raises(RewriteError):
        apply_rule("r_dist_conj", P("p(x)"), (0,))


def test_dedup_variants(m2):
    facts = FactBase([NonDepFact(NonDepQuery(P("q(y)"), X, P("p(x)")))])
    cases = [
        ("r_dedup_and_e", "p(x) & exists x in p(x). q(y)", "p(x) & q(y)"),
        ("r_dedup_and_a", "p(x) & forall x in p(x). q(y)", "p(x) & q(y)"),
        ("r_dedup_imp_a", "p(x) -> forall x in p(x). q(y)", "p(x) -> q(y)"),
        ("r_dedup_imp_e", "p(x) -> exists x in p(x). q(y)", "p(x) -> q(y)"),
    ]
    for rule, before, after in cases:
        out, _ = apply_rule(rule, P(before), (), facts=facts)
        assert out == P(after)
        back, _ = apply_rule(rule, out, (), facts=facts, params={"x": X}, reverse=True)
        assert check_equivalent(m2, back, P(before))
    # q = {0, 1} but p = {0}: p(x) depends on x within q
    with pytest.raises(ObligationError):
        apply_rule("r_dedup_imp_a", P("q(x) -> forall x in q(x). p(x)"), (), models={"m2": m2})


def test_simplify_dedup_with_verified_fact(m2):
    theta = "(p(x) | q(x))"
    f = P(f"{theta} & exists x in {theta}. p(y)")
    fact = NonDepFact(NonDepQuery(P("p(y)"), X, P(theta)), "verified", ("m2",))
    out, trace = simplify(f, FactBase([fact]), {"m2": m2})
    assert out == P(f"{theta} & p(y)")
    assert [s.rule for s in trace.committed] == ["r_dedup_and_e"]


def test_no_rule_applies():
    f = P("p(x) & q(y)")
    out, trace = simplify(f, None, models_for(1))
    assert out == f and trace.steps == []


def test_guard_context_examples():
    f = P("forall e. (p(e) -> q(e))")
    ctx = guard_context(f, (0, 1))
    assert [to_text(g) for g in ctx.guards] == ["p(e)"]
    f = P("p(y) & (q(z) -> r(x,x))")
    assert [to_text(g) for g in guard_context(f, (1, 1)).guards] == ["p(y)", "q(z)"]
    f = P("p(y) & forall y. q(y)")
    assert guard_context(f, (1, 0)).guards == ()
    with pytest.raises(IndexError):
        guard_context(f, (3,))


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 100_000))
def test_guard_context_is_sound(i):
    """Strengthening a position by its guards never changes the formula's meaning."""
    cfg = GenConfig(seed=6)
    f = gen_redex(cfg, i)
    ms = models_for(i, 2)
    for path in positions(f):
        node = subformula(f, path)
        for g in guard_context(f, path).guards:
            for variant in (And(g, node), Implies(g, node)):
                g2 = replace_at(f, path, variant)
                for m in ms.values():
                    assert check_equivalent(m, f, g2), (to_text(f), path, to_text(g))


def test_instantiate_under_guard(m2):
    f = P("forall y in p(y). forall x in p(x). r(x,y)")
    facts = FactBase([NonDepFact(NonDepQuery(P("r(x,y)"), X, P("p(x) & p(y)")))])
    out, step = apply_rule("r_instantiate", f, (1,), facts=facts)
    assert out == P("forall y in p(y). r(y,y)")
    assert step.params["witness"] == Y and step.facts_used == facts.nondep


def test_guard_drop(m2):
    f = P("p(y) -> forall x. ((p(y) & q(x)) -> r(x,y))")
    out, _ = apply_rule("r_guard_drop", f, (1,))
    assert out == P("p(y) -> forall x. (q(x) -> r(x,y))")
    assert check_equivalent(m2, f, out)
    back, _ = apply_rule("r_guard_drop", out, (1,), params={"iota": P("p(y)")}, reverse=True)
    assert check_equivalent(m2, back, f)
    with pytest.raises(RuleMismatch):
        apply_rule("r_guard_drop", P("forall x. ((p(y) & q(x)) -> r(x,y))"), ())


def test_pull_bool_degenerate_identity(m2):
    f = P("(exists x. p(x)) -> forall x in p(x). q(x)")
    out, _ = apply_rule("r_pull_bool", f, (), models={"m2": m2})
    assert out == P("forall x in p(x). q(x)")
    out2, _ = apply_rule("r_pull_prefix", f, (), models={"m2": m2})
    assert out2 == out


def test_pull_prefix_empty_prefix_matches_pull_bool():
    cfg = GenConfig(seed=12)
    hits = 0
    for i in range(300):
        f = gen_redex(cfg, i)
        for path in positions(f):
            try:
                a = match_rule("r_pull_bool", f, path)
            except RewriteError:
                continue
            node = subformula(f, path)
            if node.right.__class__.__name__ in ("Forall", "Exists"):
                continue
            b = match_rule("r_pull_prefix", f, path)
            assert a.after == b.after and a.obligations == b.obligations
            hits += 1
    assert hits >= 5


def test_simp_on_abstract_shape():
    table = VarTable()
    f = parse("forall k in I(k). forall e in E(e). (a(k,e) -> forall t. forall e2 in E(e2). b(k,e2,t))", None, table)
    facts = FactBase([NonDepFact(NonDepQuery(parse("b(k,e2,t)", None, table), table.get("e2"),
                                             parse("I(k) & E(e2)", None, table)))],
                     [ValidityFact(parse("exists e2. E(e2)", None, table))])
    out, trace = simplify(f, facts)
    expected = parse("forall k in I(k). forall e in E(e). (a(k,e) -> forall t. b(k,e,t))", None, table)
    assert alpha_equal(out, expected)


def test_simp_rule_directly(m2):
    f = P("forall y in p(y). forall z. ((forall x in q(x). r(x,z)) | p(z))")
    facts = FactBase([NonDepFact(NonDepQuery(P("r(x,z)"), X, P("p(y) & q(x)"))),
                      NonDepFact(NonDepQuery(P("p(z)"), X, P("p(y) & q(x)")))],
                     [ValidityFact(P("exists x. q(x)"))])
    out, step = apply_rule("r_simp", f, (), facts=facts)
    assert out == P("forall y in p(y). forall x in q(x). forall z. (r(x,z) | p(z))")


@pytest.mark.parametrize("n, before, after", [
    (1, "exists x. (p(y) & q(x))", "p(y) & exists x. q(x)"),
    (2, "forall x. (q(x) | p(y))", "(forall x. q(x)) | p(y)"),
    (3, "exists x. (p(y) -> q(x))", "p(y) -> exists x. q(x)"),
    (4, "forall x in p(y). q(x)", "p(y) -> forall x. q(x)"),
    (5, "forall x in q(x). p(y)", "(exists x. q(x)) -> p(y)"),
])
def test_scope_rules(n, before, after, m2):
    out, _ = apply_rule(f"r_scope_{n}", P(before), ())
    assert out == P(after)
    assert check_equivalent(m2, P(before), out)
    back, _ = apply_rule(f"r_scope_{n}", out, (), params={"x": X}, reverse=True)
    assert check_equivalent(m2, back, out)


def test_wrap_and_pull_exists(m2):
    out, _ = apply_rule("r_wrap", P("q(y)"), (), models={"m2": m2}, params={"x": X, "theta": P("p(x)")})
    assert out == P("forall x in p(x). q(y)")
    f = P("forall x. exists z. (p(x) -> r(z,y))")
    out, _ = apply_rule("r_pull_exists", f, ())
    assert out == P("(exists x. p(x)) -> exists z. forall x in p(x). r(z,y)")
    back, _ = apply_rule("r_pull_exists", out, (), reverse=True)
    assert back == f


def _rule_soundness(f, ms):
    for name, rule in sorted(RULES.items()):
        for reverse in (False, True) if rule.reversible else (False,):
            for path in positions(f):
                try:
                    m = match_rule(name, f, path, None, reverse)
                except RewriteError:
                    continue
                for model in ms.values():
                    if all(check_obligation(model, ob) for ob in m.obligations):
                        assert check_equivalent(model, f, m.after), (name, reverse, to_text(f), path)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 1_000_000))
def test_every_rule_is_sound_when_obligations_hold(i):
    _rule_soundness(gen_redex(GenConfig(seed=13), i), models_for(i, 3))


def test_simplify_steps_decrease_measure_and_are_deterministic():
    cfg = GenConfig(seed=14)
    for i in range(60):
        f = gen_redex(cfg, i)
        ms = models_for(i, 3)
        out, trace = simplify(f, None, ms)
        _, again = simplify(f, None, ms)
        assert trace.to_json() == again.to_json()
        for s in trace.committed:
            assert measure(s.after) < measure(s.before)
        assert verify_trace(trace, ms).ok


def test_budget_flag():
    f = P("forall y. ((exists x. (p(y) & q(x))) & forall x. (q(x) | p(y)))")
    out, trace = simplify(f, None, models_for(2), budget=1)
    assert trace.budget_exhausted and len(trace.committed) == 1


def test_priority_lists_known_rules():
    assert all(name in RULES for name, _ in PRIORITY)


# --- traces


def _axself():
    table = VarTable()
    f = parse((CORPUS / "axself.fol").read_text(), None, table)
    facts = load_facts(CORPUS / "axself.facts.json", None, table)
    models = {p.name: load_model(p) for p in sorted((CORPUS / "rand").glob("*.json"))}
    return f, facts, models, table


def test_trace_json_round_trip(tmp_path):
    f, facts, models, table = _axself()
    _, trace = simplify(f, facts, models)
    trace.names = table.as_dict()
    path = tmp_path / "t.json"
    trace.save(path)
    loaded = load_trace(path)
    assert loaded.start == trace.start and loaded.end == trace.end
    assert [s.after for s in loaded.steps] == [s.after for s in trace.steps]
    assert loaded.to_json()["steps"][0]["params"] == trace.to_json()["steps"][0]["params"]
    assert verify_trace(loaded, models).ok


def test_false_asserted_fact_is_pinpointed():
    f = P("forall y in p(y). forall x in p(x). r(x,y)")
    facts = FactBase([NonDepFact(NonDepQuery(P("r(x,y)"), X, P("p(x) & p(y)")))])
    out, trace = simplify(f, facts)
    assert len(trace.committed) == 1
    bad = FiniteModel.build(2, {"p": [(0,), (1,)], "r": [(0, 0)]}, {"p": 1, "r": 2})
    report = verify_trace(trace, {"bad": bad})
    assert not report.ok
    step = report.first_failure()
    assert step.index == 0 and step.obligations == {"bad": False}
    # with the model attached up front the step is refused
    with pytest.raises(ObligationError):
        apply_rule("r_instantiate", f, (1,), facts=facts, models={"bad": bad})
    _, refused = simplify(f, facts, {"bad": bad})
    assert refused.committed == [] and refused.steps[0].status == "rejected"


def test_no_models_gives_warnings_only():
    f, facts, _, _ = _axself()
    _, trace = simplify(f, facts)
    report = verify_trace(trace, {})
    assert report.ok and report.warnings


def mutate(f, rng):
    paths = list(positions(f))
    path = paths[rng.randrange(len(paths))]
    return replace_at(f, path, Not(subformula(f, path)))


def test_tampered_traces_are_detected():
    f, facts, models, table = _axself()
    _, trace = simplify(f, facts, models)
    data = trace.to_json()
    data["vars"] = table.as_dict()
    rng = random.Random(99)
    for _ in range(100):
        tampered = json.loads(json.dumps(data))
        step = tampered["steps"][0]
        after = parse(step["after"], None, VarTable(table.as_dict()))
        step["after"] = to_text(mutate(after, rng))
        report = verify_trace(trace_from_json(tampered), models)
        assert not report.ok


def test_continuity_break_is_reported(m2):
    f = P("p(x) & exists x in p(x). q(y)")
    _, trace = simplify(f, None, {"m2": m2})
    trace.start = P("q(y)")
    report = verify_trace(trace, {"m2": m2})
    assert not report.ok and not report.steps[0].continuity


def test_dedup_matches_commuted_conjunction():
    facts = FactBase([NonDepFact(NonDepQuery(P("q(y)"), X, P("p(x)")))])
    out, _ = apply_rule("r_dedup_and_a", P("(forall x in p(x). q(y)) & p(x)"), (), facts=facts)
    assert out == P("q(y) & p(x)")
