import itertools

import pytest
from hypothesis import given, settings, strategies as st

from qhoist.nondep import check_nondep
from qhoist.semantics import FiniteModel, check_equivalent, satisfies, Assignment
from qhoist.syntax import (
    BExists, BForall, Eq, Exists, Formula, Implies, Not, Pred, Signature, Truth, VarId, free_vars, size, walk,
)
from qhoist.testkit import (
    SAMPLERS, Instance, GenConfig, X, gen_conditioned_instance, gen_formula, gen_model, minimize,
    nondep_attempt, random_formula, rng_for, run_suites, shrink, shrink_formula, shrink_model,
)
from qhoist.identities import CATALOG


def test_config_validation():
    with pytest.raises(ValueError):
        GenConfig(max_domain=0)
    with pytest.raises(ValueError):
        GenConfig(max_depth=-1)
    with pytest.raises(ValueError):
        GenConfig(bias="whatever")


def test_models_are_reproducible():
    cfg = GenConfig(seed=1, min_domain=2, max_domain=2, signature=Signature({"p": 1}))
    assert gen_model(cfg, 3) == gen_model(cfg, 3)
    assert gen_model(cfg, 3).domain_size == 2


def test_one_element_model():
    m = gen_model(GenConfig(seed=5, max_domain=1))
    assert m.domain_size == 1
    y = VarId(2, "y")
    f = Exists(y, Not(Eq(y, X)))
    assert not satisfies(m, f, Assignment.of({X: 0}))


def test_tuple_density():
    cfg = GenConfig(seed=77, min_domain=2, max_domain=2, signature=Signature({"r": 2}))
    counts = {t: 0 for t in itertools.product(range(2), repeat=2)}
    for i in range(1000):
        for t in gen_model(cfg, i).interp["r"]:
            counts[t] += 1
    assert all(450 <= c <= 550 for c in counts.values()), counts


def test_depth_zero_is_atomic():
    import random
    for i in range(100):
        f = random_formula(random.Random(i), GenConfig().signature, GenConfig().vars, 0)
        assert isinstance(f, (Pred, Eq, Truth))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_formulas_respect_bounds(i):
    cfg = GenConfig(seed=2, max_vars=3, max_depth=3)
    f = gen_formula(cfg, i)
    assert f == gen_formula(cfg, i)
    assert free_vars(f) <= set(cfg.vars)
    assert _depth(f) <= 3


def _depth(f):
    from qhoist.syntax import children
    kids = children(f)
    if isinstance(f, (BForall, BExists)):
        return 1 + max(_depth(f.body), _depth(f.guard) - 1 if _depth(f.guard) else 0)
    return 1 + max(map(_depth, kids)) if kids else 0


def test_satisfy_nondep_bias_rate():
    cfg = GenConfig(seed=42, bias="satisfy_nondep")
    hits = sum(check_nondep(*nondep_attempt(cfg, i)).holds for i in range(500))
    assert hits >= 300


def test_every_identity_has_a_sampler():
    assert set(SAMPLERS) == set(CATALOG)


def test_conditioned_instances_meet_conditions():
    cfg = GenConfig(seed=3)
    for name in ("pull-bool", "simp", "negation-push"):
        inst = gen_conditioned_instance(cfg, name, 0)
        assert inst is not None and 1 <= inst.attempts <= 200
        assert all(inst.check().conditions.values())


def _buggy_forall_negation(inst: Instance) -> bool:
    """A deliberately wrong law (the inner negation is dropped); True when it is refuted."""
    s = inst.slots
    x, t, phi = s["x"], s["theta"], s["phi"]
    lhs = BForall(x, t, Not(phi))
    rhs = Implies(Exists(x, t), BForall(x, t, phi))
    return not check_equivalent(inst.model, lhs, rhs)


def _failing_instance():
    cfg = GenConfig(seed=8)
    for i in range(200):
        inst = gen_conditioned_instance(cfg, "forall-negation", i)
        if inst is not None and _buggy_forall_negation(inst):
            return inst
    raise AssertionError("no failing instance for the injected bug")


def test_shrink_yields_smaller_failing_instances():
    inst = _failing_instance()
    for cand in itertools.islice(shrink(inst, _buggy_forall_negation), 30):
        assert cand.weight() < inst.weight()
        assert _buggy_forall_negation(cand)


def test_shrink_of_passing_instance_is_empty():
    inst = gen_conditioned_instance(GenConfig(seed=8), "forall-negation", 0)
    assert list(shrink(inst, lambda _: False)) == []


def test_injected_bug_shrinks_small():
    small = minimize(_failing_instance(), _buggy_forall_negation)
    assert _buggy_forall_negation(small)
    assert small.model.domain_size <= 2
    preds = {n.name for v in small.slots.values() if isinstance(v, Formula)
             for n in walk(v) if isinstance(n, Pred)}
    assert len(preds) <= 2


def test_model_and_formula_shrinkers_are_well_formed():
    m = gen_model(GenConfig(seed=4, min_domain=3, max_domain=3))
    for smaller in shrink_model(m):
        assert isinstance(smaller, FiniteModel)
        assert smaller.domain_size <= 3
    f = gen_formula(GenConfig(seed=4, max_depth=3), 5)
    for g in shrink_formula(f):
        assert size(g) <= size(f) and g != f


def test_suites_are_deterministic():
    a = [r.to_json() for r in run_suites(["triangle", "rewrite"], 5, 10)]
    b = [r.to_json() for r in run_suites(["triangle", "rewrite"], 5, 10)]
    assert a == b and all(r["failures"] == 0 for r in a)
    with pytest.raises(KeyError):
        run_suites(["nope"], 0, 1)
