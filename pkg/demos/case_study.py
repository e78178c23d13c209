"""Walk through a full discovery conversation against the bundled fixture.

Runs the same transcript the replay command ships with, but in-process,
printing the chat, the widget state after each edit, and the final exports.

    python3 demos/case_study.py
"""

from pathlib import Path

from udi.agents import ScriptedBackend
from udi.schema import load_schema
from udi.session import Session
from udi.store import load_tables

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def print_chat(delta):
    for entry in delta.chat:
        print(f"  [{entry['role']}] {entry['text']}")


def print_view(session, vid):
    view = session.view(vid)
    table = session.view_data(vid)
    print(f"  {vid} ({view.caption}):")
    header = " | ".join(name for name, _ in table.columns)
    print(f"    {header}")
    for row in table.rows:
        print("    " + " | ".join(str(v) for v in row))


def main():
    schema = load_schema((FIXTURES / "schema.json").read_text())
    store = load_tables(schema, {
        e.name: (FIXTURES / f"{e.name}.csv").read_text()
        for e in schema.entities
    })
    backend = ScriptedBackend(FIXTURES / "script.json")
    session = Session("demo", schema, store, backend, backend)

    for text in [
        "Show me all the donor data.",
        "How many donors are there for each sex?",
        "Show a scatterplot of donor height and weight.",
    ]:
        print(f"> {text}")
        print_chat(session.handle_message(text))

    print("\n> filter to adults")
    print_chat(session.handle_message("filter to adults"))
    f1 = session.filter_state.get("f1").to_wire()
    print(f"  widget f1: age [{f1['min']}, {f1['max']}]")

    print("\n* user drags the lower bound to 21")
    session.update_filter("f1", {"min": 21, "max": 67})

    print("\n> filter to violent death events")
    print_chat(session.handle_message("filter to violent death events"))

    print("\n* user adds suicide to the selection")
    session.update_filter(
        "f2", {"values": ["accident", "homicide", "suicide"]})

    print("\ndashboard after filtering:")
    for view in session.views:
        print_view(session, view.id)

    print("\nexports:")
    for entity in ("donors", "datasets"):
        print(f"  {entity}: {', '.join(session.export_visible(entity))}")


if __name__ == "__main__":
    main()
