"""Random schema/store/filter instance generator for propagation trials.

Instances go through the real loaders (config text and CSV text) so they
always satisfy the store invariants: forest-shaped relations, unique keys,
and foreign keys that are either missing or resolvable.
"""

from __future__ import annotations

import json
import random

from udi.filters import FilterSource, FilterState, IntervalFilter, PointFilter
from udi.schema import SchemaDef, load_schema
from udi.store import DatasetStore, load_tables

CATEGORIES = ["A", "B", "C", "D", "E"]


def random_instance(rng: random.Random, max_entities: int = 5, max_rows: int = 50,
                    max_filters: int = 4) -> tuple[SchemaDef, DatasetStore, FilterState]:
    n = rng.randint(1, max_entities)
    names = [f"e{i}" for i in range(n)]

    entities = []
    fk_fields: dict[str, list[str]] = {name: [] for name in names}
    relations = []
    for i in range(1, n):
        other = rng.randrange(i)
        if rng.random() < 0.5:
            parent, child = names[other], names[i]
        else:
            parent, child = names[i], names[other]
        fk = f"fk_{parent}"
        fk_fields[child].append(fk)
        relations.append({"parent": parent, "child": child, "foreign_key": fk})

    for name in names:
        fields = [{"name": "id", "kind": "identifier"}]
        fields += [{"name": fk, "kind": "identifier"} for fk in fk_fields[name]]
        fields.append({"name": "q", "kind": "quantitative"})
        fields.append({"name": "c", "kind": "categorical"})
        entities.append({
            "name": name,
            "key": "id",
            "dataset_entity": name == names[0],
            "fields": fields,
        })

    schema = load_schema(json.dumps({"entities": entities, "relations": relations}))

    row_counts = {name: rng.randint(1, max_rows) for name in names}
    keys = {name: [f"{name}_r{i}" for i in range(row_counts[name])] for name in names}
    parents_of = {rel["child"]: rel for rel in relations}

    sources = {}
    for name in names:
        header = ["id"] + fk_fields[name] + ["q", "c"]
        lines = [",".join(header)]
        for key in keys[name]:
            cells = [key]
            for fk in fk_fields[name]:
                parent = fk[len("fk_"):]
                if rng.random() < 0.15:
                    cells.append("")  # orphan row
                else:
                    cells.append(rng.choice(keys[parent]))
            cells.append("" if rng.random() < 0.1 else str(rng.randint(0, 20)))
            cells.append("" if rng.random() < 0.1 else rng.choice(CATEGORIES))
            lines.append(",".join(cells))
        sources[name] = "\n".join(lines) + "\n"
    store = load_tables(schema, sources)

    state = FilterState()
    for fid in range(rng.randint(0, max_filters)):
        entity = rng.choice(names)
        source = FilterSource("agent", message=fid + 1)
        if rng.random() < 0.5:
            lo, hi = sorted((rng.randint(-2, 22), rng.randint(-2, 22)))
            f = IntervalFilter(f"f{fid + 1}", entity, "q", lo, hi, source)
        else:
            pool = CATEGORIES + ["Z"]
            chosen = rng.sample(pool, rng.randint(1, 3))
            f = PointFilter(f"f{fid + 1}", entity, "c", frozenset(chosen), source)
        state = state.with_added(f, schema)
    return schema, store, state
