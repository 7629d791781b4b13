"""Acceptance criteria AC1-AC8; each test logs one PASS/FAIL line."""
import random
import time

from conftest import CORPUS, NAMES, record

from qhoist.identities import CATALOG, CLOSURE, CONDITIONAL, UNCONDITIONAL, check_identity
from qhoist.nondep import (
    check_nondep, check_nondep_plain_equiv, check_nondep_subst, formulation_verdicts, load_facts,
)
from qhoist.rewrite import simplify, trace_from_json, verify_trace
from qhoist.semantics import assignments, check_equivalent, load_model, make_window, meaning, satisfies, valid
from qhoist.syntax import (
    TRUE, Not, VarTable, alpha_equal, free_vars, parse, positions, replace_at, subformula, to_text,
)
from qhoist.testkit import (
    DEFAULT_SIGNATURE, GenConfig, U, X, Y, Z, all_models, gen_conditioned_instance, gen_formula, gen_model,
    gen_redex, gen_targeted_instance, nondep_attempt, rng_for, sample_slots,
)


def test_ac1_definitional_triangle():
    start = time.perf_counter()
    disagreements = cases = 0
    for bias, n in (("unconditioned", 500), ("satisfy_nondep", 500)):
        cfg = GenConfig(seed=101, max_domain=3, max_vars=3, max_depth=3, bias=bias)
        for i in range(n):
            model, phi, x, theta = nondep_attempt(cfg, i)
            direct = check_nondep(model, phi, x, theta).holds
            routes = {direct, check_nondep_subst(model, phi, x, theta)}
            if theta == TRUE:
                routes.add(check_nondep_plain_equiv(model, phi, x))
            # the plain route always applies to the unconditioned question
            plain = check_nondep(model, phi, x).holds
            routes_plain = {plain, check_nondep_plain_equiv(model, phi, x), check_nondep_subst(model, phi, x)}
            cases += 1
            disagreements += len(routes) != 1 or len(routes_plain) != 1
    elapsed = time.perf_counter() - start
    record("AC1", disagreements == 0 and elapsed < 60,
           f"{cases} instances, {disagreements} disagreements, {elapsed:.1f}s")


def _family():
    cfg = GenConfig(seed=2024, max_vars=2, max_depth=3)
    return [gen_formula(cfg, i) for i in range(40)]


def test_ac2_five_formulations_exhaustive():
    family = _family()
    thetas = [TRUE, parse("p(x)", None, VarTable(NAMES)), parse("r(x,y)", None, VarTable(NAMES))]
    models = list(all_models(DEFAULT_SIGNATURE, 1)) + list(all_models(DEFAULT_SIGNATURE, 2))
    checks = violations = 0
    for model in models:
        for phi in family:
            for theta in thetas:
                checks += 1
                violations += len(set(formulation_verdicts(model, phi, X, theta))) != 1
    record("AC2", violations == 0,
           f"{len(family)} formulas x {len(thetas)} provisos x {len(models)} models = {checks} checks, "
           f"{violations} violations")


def _sweep(names, per_identity, seed):
    counts, failures, exhausted = {}, [], 0
    cfg = GenConfig(seed=seed)
    for name in names:
        n = 0
        for i in range(per_identity):
            inst = gen_conditioned_instance(cfg, name, i)
            if inst is None:
                exhausted += 1
                continue
            r = inst.check()
            n += r.status == "holds"
            if r.status != "holds":
                failures.append((name, i, r.failed_claim))
        counts[name] = n
    return counts, failures, exhausted


def test_ac3_unconditional_identities():
    counts, failures, _ = _sweep(UNCONDITIONAL, 150, seed=303)
    ok = not failures and all(c >= 100 for c in counts.values())
    record("AC3", ok, f"{sum(counts.values())} instances over {len(counts)} identities, {len(failures)} violations")


def _condition_labels(name):
    cfg = GenConfig(seed=0)
    labels = []
    for i in range(30):
        conds, _ = CATALOG[name].instantiate(sample_slots(name, rng_for("labels", f"{name}/{i}"), cfg))
        for c in conds:
            if c.label not in labels:
                labels.append(c.label)
    return labels


def _targeted(name):
    cfg = GenConfig(seed=404)
    per_condition = {}
    for label in _condition_labels(name):
        found = 0
        for i in range(12):
            if gen_targeted_instance(cfg, name, label, i, tries=400) is not None:
                found += 1
            elif i >= 2 and found == 0:
                break
        per_condition[label] = found
    return per_condition


def test_ac4_conditional_identities_and_necessity():
    counts, failures, exhausted = _sweep(CONDITIONAL, 110, seed=404)
    enough = all(c >= 100 for c in counts.values())
    necessity = {name: _targeted(name) for name in CONDITIONAL}
    short = [n for n, per in necessity.items() if sum(per.values()) < 10]
    flip = necessity["exists-forall-flip"]
    flip_ok = all(v >= 10 for v in flip.values())
    for name, per in necessity.items():
        shown = ", ".join(f"{k}={v}" for k, v in per.items())
        print(f"  {name}: {shown}")
    ok = not failures and enough and not short and flip_ok
    record("AC4", ok,
           f"{sum(counts.values())} conditioned instances (min {min(counts.values())} per identity, "
           f"{exhausted} exhausted), {len(failures)} failures; targeted counterexamples "
           f"min {min(sum(p.values()) for p in necessity.values())} per identity"
           + (f"; too few for {short}" if short else ""))


def _corpus_models():
    return {p.name: load_model(p) for p in sorted((CORPUS / "rand").glob("*.json"))}


def _axself():
    table = VarTable()
    f = parse((CORPUS / "axself.fol").read_text(), None, table)
    facts = load_facts(CORPUS / "axself.facts.json", None, table)
    expected = parse((CORPUS / "axself.simplified.fol").read_text(), None, table)
    return f, facts, expected, table


def _mutate(f, rng):
    paths = list(positions(f))
    path = paths[rng.randrange(len(paths))]
    return replace_at(f, path, Not(subformula(f, path)))


def test_ac5_rewrite_soundness_and_tampering():
    steps = failures = 0
    traces = []
    cfg = GenConfig(seed=505)
    for i in range(300):
        f = gen_redex(cfg, i)
        models = {f"m{j}": gen_model(cfg, rng=rng_for(505, f"{i}/{j}")) for j in range(3)}
        _, trace = simplify(f, None, models, check_steps=False)
        traces.append((trace, models))
    f, facts, _, table = _axself()
    corpus_models = _corpus_models()
    _, ax_trace = simplify(f, facts, corpus_models, check_steps=False)
    ax_trace.names = table.as_dict()
    traces.append((ax_trace, corpus_models))
    for trace, models in traces:
        for step in trace.committed:
            steps += 1
            failures += not all(check_equivalent(m, step.before, step.after) for m in models.values())
    rng = random.Random(5)
    with_steps = [(t, m) for t, m in traces if t.committed]
    caught = 0
    for k in range(100):
        trace, models = with_steps[k % len(with_steps)]
        data = trace.to_json()
        if not data["vars"]:
            data["vars"] = dict(NAMES)
        j = rng.randrange(len(data["steps"]))
        while data["steps"][j]["status"] != "committed":
            j = rng.randrange(len(data["steps"]))
        table = VarTable(data["vars"])
        after = parse(data["steps"][j]["after"], None, table)
        data["steps"][j]["after"] = to_text(_mutate(after, rng))
        caught += not verify_trace(trace_from_json(data), models).ok
    record("AC5", failures == 0 and caught == 100,
           f"{steps} committed steps over {len(traces)} traces, {failures} not equivalent; "
           f"{caught}/100 tampered traces detected")


def test_ac6_flagship_demo():
    start = time.perf_counter()
    f, facts, expected, _ = _axself()
    models = _corpus_models()
    facts_hold = all(check_nondep(m, q.query.phi, q.query.var, q.query.theta) for q in facts.nondep
                     for m in models.values()) and all(valid(m, v.formula) for v in facts.validity
                                                       for m in models.values())
    out, trace = simplify(f, facts, models)
    same = alpha_equal(out, expected)
    equivalent = all(check_equivalent(m, f, out) for m in models.values())
    report = verify_trace(trace, models)
    elapsed = time.perf_counter() - start
    ok = len(models) == 50 and facts_hold and same and equivalent and report.ok and elapsed < 10
    record("AC6", ok, f"{to_text(out)} | matches={same}, equivalent on {len(models)} models={equivalent}, "
                      f"trace verified={report.ok}, {elapsed:.2f}s")


def test_ac7_closure_properties():
    counts, failures, exhausted = _sweep(CLOSURE, 300, seed=707)
    ok = not failures and all(c >= 300 for c in counts.values())
    record("AC7", ok, f"{sum(counts.values())} instances over {len(counts)} closure properties "
                      f"(min {min(counts.values())}), {len(failures)} violations")


def test_ac8_infrastructure():
    cfg = GenConfig(seed=808, max_vars=4, max_depth=4)
    table = {str(v): v.index for v in (X, Y, Z, U)}
    roundtrip_bad = sum(parse(to_text(f), None, VarTable(table)) != f
                        for f in (gen_formula(cfg, i) for i in range(1000)))
    family = [gen_formula(GenConfig(seed=809, max_vars=4, max_depth=3), i) for i in range(12)]
    window = (X, Y, Z, U)
    # every model with n <= 2, and a seeded sample at n = 3 (2^15 models there)
    models = list(all_models(DEFAULT_SIGNATURE, 1)) + list(all_models(DEFAULT_SIGNATURE, 2)) + [
        gen_model(GenConfig(seed=810, min_domain=3, max_domain=3), i) for i in range(20)]
    locality_bad = coherence_bad = checks = 0
    for model in models:
        for f in family:
            fv = sorted(free_vars(f))
            full = meaning(model, f, window)
            for a in assignments(model, window):
                checks += 1
                v = satisfies(model, f, a)
                locality_bad += v != satisfies(model, f, a.restrict(fv)) or v != (a in full)
            for extra in range(1 << 4):
                sub = make_window(set(fv) | {w for k, w in enumerate(window) if extra >> k & 1})
                coherence_bad += meaning(model, f, make_window(fv)).extend(sub) != meaning(model, f, sub)
    ok = roundtrip_bad == 0 and locality_bad == 0 and coherence_bad == 0
    record("AC8", ok, f"round trip 1000 formulas ({roundtrip_bad} bad); locality {checks} assignments "
                      f"({locality_bad} bad); window coherence ({coherence_bad} bad); n <= 3, windows <= 4")
