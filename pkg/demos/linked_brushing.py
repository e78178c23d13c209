"""Show how a brush on one chart becomes filters that drive the others.

Builds a bar chart and a scatterplot, brushes a rectangle on the scatter,
and prints both views before and after. The brushed view keeps showing all
its points (its own selection never filters itself); the bar chart shrinks
to the brushed donors.

    python3 demos/linked_brushing.py
"""

from pathlib import Path

from udi.agents import ScriptedBackend
from udi.schema import load_schema
from udi.session import Session
from udi.store import load_tables

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def show(session, vid):
    table = session.view_data(vid)
    caption = session.view(vid).caption
    cells = ["/".join(str(v) for v in row) for row in table.rows]
    print(f"  {vid} ({caption}): {', '.join(cells)}")


def main():
    schema = load_schema((FIXTURES / "schema.json").read_text())
    store = load_tables(schema, {
        e.name: (FIXTURES / f"{e.name}.csv").read_text()
        for e in schema.entities
    })
    backend = ScriptedBackend(FIXTURES / "script.json")
    session = Session("demo", schema, store, backend, backend)

    session.handle_message("How many donors are there for each sex?")
    session.handle_message("Show a scatterplot of donor height and weight.")

    print("before brushing:")
    show(session, "v1")
    show(session, "v2")

    print("\nbrush height 170-180, weight 75-95 on the scatterplot:")
    delta = session.apply_selection(
        "v2", {"kind": "interval_2d", "intervals": [[170, 180], [75, 95]]})
    for wire in delta.filters_added:
        print(f"  materialized filter {wire['id']}: "
              f"{wire['entity']}.{wire['field']} in [{wire['min']}, {wire['max']}]")
    show(session, "v1")
    show(session, "v2")

    print("\nclear the brush:")
    session.clear_selection("v2")
    show(session, "v1")
    show(session, "v2")


if __name__ == "__main__":
    main()
