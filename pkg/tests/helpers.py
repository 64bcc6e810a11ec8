"""Test-side oracles that read compiled schemas without going through the encoders."""

import random

from symbolizer.schema import SchemaDoc


def sample_document(doc: SchemaDoc, rng: random.Random, max_items: int = 8) -> dict:
    """Draw a random document that conforms to ``doc`` by walking its JSON body."""
    prop = doc.body["properties"][doc.list_key]
    items = prop["items"]
    n = rng.randint(0, min(max_items, prop["maxItems"]))
    if doc.stage == "objects":
        types = items["properties"]["type"]["enum"]
        return {"objects": [{"name": f"o{i}", "type": rng.choice(types)} for i in range(n)]}
    branches = items.get("anyOf", [])
    out = []
    for _ in range(n if branches else 0):
        b = rng.choice(branches)
        args = [rng.choice(slot["enum"]) for slot in b["properties"]["args"].get("prefixItems", [])]
        rec = {"predicate": b["properties"]["predicate"]["enum"][0], "args": args}
        if "negated" in b["properties"]:
            rec["negated"] = rng.random() < 0.3
        out.append(rec)
    return {doc.list_key: out}
