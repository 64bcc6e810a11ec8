"""Regenerate the bundled in-context example files under src/symbolizer/data/examples."""

import json
import random
from pathlib import Path

from symbolizer.schema import encode_goal, encode_objects, encode_state
from symbolizer.simulator import make_instance, get_simulator

OUT = Path(__file__).resolve().parents[1] / "src" / "symbolizer" / "data" / "examples"
SIZES = {"blocksworld": (3, 4, 5), "hanoi": (2, 3, 4), "hanoi-color": (3, 4, 5)}


def rows(domain):
    sim = get_simulator(domain)
    for i, n in enumerate(SIZES[domain]):
        inst = make_instance(domain, n, seed=900 + i, scramble=2 + 2 * n)
        text = sim.describe(inst.init)
        yield {"stage": "objects", "text": text, "output": encode_objects(inst.objects)}
        yield {"stage": "predicates", "text": text, "output": encode_state(inst.init)}
        yield {"stage": "goal", "text": inst.goal_text, "output": encode_goal(inst.goal)}
        label, nxt = random.Random(i).choice(sim.successors(inst.init))
        yield {"stage": "successor", "state": encode_state(inst.init), "action": str(label), "output": encode_state(nxt)}


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for domain in SIZES:
        ordered = sorted(rows(domain), key=lambda r: ("objects", "predicates", "goal", "successor").index(r["stage"]))
        with open(OUT / f"{domain}.jsonl", "w", encoding="utf-8") as fh:
            for r in ordered:
                fh.write(json.dumps(r, separators=(",", ":")) + "\n")
        print(domain, len(ordered))
