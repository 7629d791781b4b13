import json

import pytest
from hypothesis import given, settings, strategies as st
from conftest import P

from qhoist.nondep import (
    FactBase, FactError, NonDepFact, NonDepQuery, NonDepVerdict, ValidityFact, check_nondep,
    check_nondep_plain_equiv, check_nondep_subst, covered, fact_to_json, formulation_verdicts,
    load_facts, save_facts, subst_form, validity_covered, verify_fact,
)
from qhoist.semantics import FiniteModel, assignments, make_window, override, satisfies
from qhoist.syntax import And, Exists, Not, VarTable, free_vars, variables
from qhoist.testkit import GenConfig, X, Y, nondep_attempt


def brute_nondep(model, phi, x, theta):
    """Direct reading of the definition over the window, in plain Python."""
    window = make_window(free_vars(phi) | free_vars(theta) | {x})
    for a in assignments(model, window):
        if not satisfies(model, theta, a):
            continue
        for b in range(model.domain_size):
            a2 = override(a, x, b)
            if satisfies(model, theta, a2) and satisfies(model, phi, a) != satisfies(model, phi, a2):
                return a, b
    return None


def test_documented_examples(m2):
    assert check_nondep(m2, P("q(y)"), X)
    assert check_nondep(m2, P("p(x)"), X, P("p(x)"))
    v = check_nondep(m2, P("p(x)"), X)
    a, b = v.counterexample
    assert a.as_dict() == {X: 0} and b == 1
    assert check_nondep(m2, P("exists x. r(x,y)"), X)
    assert check_nondep(m2, P("exists x. ~(y = x)"), X)


def test_verdict_invariant():
    with pytest.raises(ValueError):
        NonDepVerdict(True, (None, 0))
    with pytest.raises(ValueError):
        NonDepVerdict(False)


def test_routes_examples(m2):
    assert check_nondep_plain_equiv(m2, P("x = x"), X)
    assert not check_nondep_plain_equiv(m2, P("p(x)"), X)
    assert check_nondep_subst(m2, P("p(x)"), X, P("p(x)"))
    assert not check_nondep_subst(m2, P("p(x)"), X)


def test_subst_form_uses_fresh_variables():
    phi, theta = P("r(x,z)"), P("p(y)")
    f = subst_form(phi, X, theta)
    fresh = variables(f) - variables(phi) - variables(theta)
    assert {v.index for v in fresh} == {4, 5}


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 1_000_000), st.sampled_from(["unconditioned", "satisfy_nondep"]))
def test_check_nondep_matches_brute_force(i, bias):
    model, phi, x, theta = nondep_attempt(GenConfig(seed=i % 97, bias=bias), i)
    v = check_nondep(model, phi, x, theta)
    expected = brute_nondep(model, phi, x, theta)
    assert v.holds == (expected is None)
    if expected is not None:
        a, b = v.counterexample
        ea, eb = expected
        assert (a.values, b) == (ea.values, eb)
        # the witness really violates the definition
        assert satisfies(model, theta, a) and satisfies(model, theta, override(a, x, b))
        assert satisfies(model, phi, a) != satisfies(model, phi, override(a, x, b))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 1_000_000))
def test_routes_agree(i):
    model, phi, x, theta = nondep_attempt(GenConfig(seed=5, bias="satisfy_nondep"), i)
    direct = check_nondep(model, phi, x, theta).holds
    assert check_nondep_subst(model, phi, x, theta) == direct
    assert check_nondep_plain_equiv(model, phi, x) == check_nondep(model, phi, x).holds
    assert len(set(formulation_verdicts(model, phi, x, theta))) == 1


def test_closure_bullet_needs_y_outside_the_proviso():
    """Quantifying a variable of the proviso can break non-dependence."""
    model = FiniteModel.build(2, {"r": [(1, 0), (1, 1), (0, 0)]}, {"r": 2})
    theta = P("r(x,y)")
    phi = P("r(x,y) <-> false")
    assert check_nondep(model, phi, X, theta)
    v = check_nondep(model, Exists(Y, phi), X, theta)
    assert not v
    a, b = v.counterexample
    assert a.as_dict() == {X: 0, Y: 0} and b == 1


def _facts_file(tmp_path, entries):
    path = tmp_path / "facts.json"
    path.write_text(json.dumps(entries))
    return path


def test_facts_round_trip(tmp_path):
    table = VarTable()
    path = _facts_file(tmp_path, [
        {"formula": "q(y)", "var": "x", "theta": "p(x)", "status": "asserted", "models": []},
        {"formula": "exists x. p(x)", "var": None, "theta": None, "status": "asserted", "models": []},
    ])
    base = load_facts(path, None, table)
    assert len(base) == 2 and len(base.nondep) == 1 and len(base.validity) == 1
    out = tmp_path / "out.json"
    save_facts(list(base), out)
    again = load_facts(out, None, VarTable(table.as_dict()))
    assert [fact_to_json(f) for f in again] == [fact_to_json(f) for f in base]


@pytest.mark.parametrize("entries", [
    {"formula": "p(x)"},
    [{"formula": "p(x", "var": "x"}],
    [{"formula": "p(x)", "var": "x", "status": "verified", "models": []}],
    [{"formula": "p(x)", "var": "x", "status": "maybe"}],
])
def test_malformed_facts(tmp_path, entries):
    from qhoist.syntax import FolError
    with pytest.raises(FolError):
        load_facts(_facts_file(tmp_path, entries))


def test_verify_fact(m2):
    fact = NonDepFact(NonDepQuery(P("q(y)"), X, P("p(x)")))
    verified = verify_fact(fact, {"m2": m2})
    assert verified.status == "verified" and verified.models == ("m2",)
    with pytest.raises(FactError):
        verify_fact(NonDepFact(NonDepQuery(P("p(x)"), X)), {"m2": m2})


def test_coverage_rules():
    phi = P("r(x,y)")
    fact = NonDepFact(NonDepQuery(phi, X, P("p(x)")))
    assert covered(NonDepQuery(P("q(y)"), X), []) == []
    assert covered(NonDepQuery(P("p(x)"), X, P("p(x) & q(y)")), []) == []
    assert covered(NonDepQuery(phi, X, P("p(x) & q(y)")), [fact]) == [fact]
    assert covered(NonDepQuery(phi, X, P("q(y)")), [fact]) is None
    assert covered(NonDepQuery(P("~r(x,y) & q(z)"), X, P("p(x)")), [fact]) == [fact]
    assert covered(NonDepQuery(P("exists x. r(x,y)"), X), []) == []
    # looking through a binder on z is fine, on y (free in the proviso) it is not
    assert covered(NonDepQuery(P("exists z. r(x,y) & q(z)"), X, P("p(x)")), [fact]) == [fact]
    assert covered(NonDepQuery(P("exists y. r(x,y)"), X, P("p(x) & q(y)")), [fact]) is None


def test_validity_coverage():
    f = ValidityFact(P("exists x. p(x)"))
    assert validity_covered(P("exists z. p(z)"), [f]) is f
    assert validity_covered(P("exists z. q(z)"), [f]) is None


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 1_000_000))
def test_coverage_is_sound(i):
    """Whatever the fact base covers really holds on models where the facts hold."""
    cfg = GenConfig(seed=8, bias="satisfy_nondep")
    model, phi, x, theta = nondep_attempt(cfg, i)
    if not check_nondep(model, phi, x, theta):
        return
    facts = [NonDepFact(NonDepQuery(phi, x, theta))]
    other = nondep_attempt(cfg, i + 1)[1]
    for query in (NonDepQuery(phi, x, theta), NonDepQuery(Not(phi), x, theta)):
        if covered(query, facts) is not None:
            assert check_nondep(model, query.phi, query.var, query.theta)
    if check_nondep(model, other, x, theta):
        facts.append(NonDepFact(NonDepQuery(other, x, theta)))
        q = NonDepQuery(And(phi, other), x, theta)
        assert covered(q, facts) is not None
        assert check_nondep(model, q.phi, x, theta)
