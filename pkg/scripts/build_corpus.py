"""Regenerate the demo corpus under corpus/ (fixed seed 7).

The models interpret IOb/1, Ether/1, slow/2, Wr/4, Zero/1.  Each has a
nonempty Ether, and for k in IOb the truth of Wr(k, e, t, x) is the same for
every e in Ether, so both facts in axself.facts.json hold on every model.
"""
from __future__ import annotations

import itertools
import json
import random
import sys
from pathlib import Path

from qhoist.nondep import load_facts, verify_fact
from qhoist.semantics import FiniteModel, save_model, valid
from qhoist.syntax import VarTable, parse

ROOT = Path(__file__).resolve().parent.parent / "corpus"
SEED = 7
COUNT = 50

AXSELF = ("forall k in IOb(k). forall e in Ether(e). "
          "(slow(k,e) -> forall t. forall x. forall e2 in Ether(e2). (Wr(k,e2,t,x) <-> Zero(x)))")
SIMPLIFIED = ("forall k in IOb(k). forall e in Ether(e). "
              "(slow(k,e) -> forall t. forall x. (Wr(k,e,t,x) <-> Zero(x)))")
FACTS = [
    {"formula": "Wr(k,e2,t,x) <-> Zero(x)", "var": "e2", "theta": "IOb(k) & Ether(e2)",
     "status": "asserted", "models": []},
    {"formula": "exists e2. Ether(e2)", "var": None, "theta": None, "status": "asserted", "models": []},
]
ARITIES = {"IOb": 1, "Ether": 1, "slow": 2, "Wr": 4, "Zero": 1}


def subset(rng: random.Random, items, density: float = 0.5) -> list:
    return [t for t in items if rng.random() < density]


def model(rng: random.Random) -> FiniteModel:
    n = rng.randint(1, 3)
    dom = range(n)
    ether = subset(rng, [(e,) for e in dom]) or [(rng.randrange(n),)]
    iob = subset(rng, [(k,) for k in dom])
    ether_set = {e for (e,) in ether}
    iob_set = {k for (k,) in iob}
    wr = []
    for k, t, x in itertools.product(dom, repeat=3):
        shared = rng.random() < 0.5
        for e in dom:
            value = shared if (k in iob_set and e in ether_set) else rng.random() < 0.5
            if value:
                wr.append((k, e, t, x))
    rel = {
        "IOb": iob,
        "Ether": ether,
        "slow": subset(rng, list(itertools.product(dom, repeat=2))),
        "Wr": wr,
        "Zero": subset(rng, [(x,) for x in dom]),
    }
    return FiniteModel.build(n, rel, ARITIES)


def main() -> int:
    (ROOT / "rand").mkdir(parents=True, exist_ok=True)
    (ROOT / "axself.fol").write_text(AXSELF + "\n", encoding="utf-8")
    (ROOT / "axself.simplified.fol").write_text(SIMPLIFIED + "\n", encoding="utf-8")
    with open(ROOT / "axself.facts.json", "w", encoding="utf-8") as fh:
        json.dump(FACTS, fh, indent=1)
        fh.write("\n")
    rng = random.Random(SEED)
    models = {}
    for i in range(COUNT):
        m = model(rng)
        path = ROOT / "rand" / f"m{i:02d}.json"
        save_model(m, path)
        models[str(path.relative_to(ROOT.parent))] = m
    table = VarTable()
    parse(AXSELF, None, table)
    facts = load_facts(ROOT / "axself.facts.json", None, table)
    for fact in facts.nondep:
        verify_fact(fact, models)
    for fact in facts.validity:
        bad = [name for name, m in models.items() if not valid(m, fact.formula)]
        if bad:
            print(f"validity fact fails on {bad}", file=sys.stderr)
            return 1
    print(f"wrote {COUNT} models to {ROOT / 'rand'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
