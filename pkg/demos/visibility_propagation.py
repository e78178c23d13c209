"""Demonstrate gated cross-entity filter propagation on the fixture data.

A filter on one entity removes rows of related entities, but pruning along
an edge only switches on when something on the far side is actually
restricted. The donor with no samples (D5) survives donor-level filters,
yet disappears as soon as a sample-level filter activates upward pruning.

    python3 demos/visibility_propagation.py
"""

from pathlib import Path

from udi.filters import (
    FilterSource,
    FilterState,
    IntervalFilter,
    PointFilter,
    resolve_visibility,
)
from udi.schema import load_schema
from udi.store import load_tables

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
SRC = FilterSource("agent", message=1)


def show(schema, store, state, label):
    vis = resolve_visibility(schema, store, state)
    print(f"{label}:")
    for entity in ("donors", "samples", "datasets"):
        print(f"  {entity}: {', '.join(sorted(vis.visible[entity])) or '(none)'}")


def main():
    schema = load_schema((FIXTURES / "schema.json").read_text())
    store = load_tables(schema, {
        e.name: (FIXTURES / f"{e.name}.csv").read_text()
        for e in schema.entities
    })

    show(schema, store, FilterState(), "no filters")

    adults = FilterState().with_added(
        IntervalFilter("f1", "donors", "age", 21, 67, SRC), schema)
    print()
    show(schema, store, adults, "donors.age in [21, 67]")
    print("  note: D5 has no samples but stays visible; nothing restricts")
    print("  samples, so the donors<-samples pruning edge is off")

    hearts = adults.with_added(
        PointFilter("f2", "samples", "organ", frozenset(["heart"]), SRC), schema)
    print()
    show(schema, store, hearts, "plus samples.organ in {heart}")
    print("  note: the sample filter switches upward pruning on, and donors")
    print("  without a visible heart sample (including D5) drop out")


if __name__ == "__main__":
    main()
