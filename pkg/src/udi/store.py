"""Column-oriented row storage for entity tables, plus per-field summaries.

Cells are ``int | float | str | None``; ``None`` marks a missing value and
never compares equal to anything during filtering. The store is immutable
after loading and safe to share across threads.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .schema import EntityDef, SchemaDef

Cell = int | float | str | None


class TableLoadError(ValueError):
    """Table sources failed validation; ``issues`` lists human-readable problems."""

    def __init__(self, issues: list[str]):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


@dataclass
class EntityTable:
    """One entity's rows in column-major form, indexed by primary key."""

    entity: EntityDef
    columns: dict[str, list]
    row_keys: list[str]
    key_to_row: dict[str, int]

    @property
    def nrows(self) -> int:
        return len(self.row_keys)


@dataclass
class DatasetStore:
    """All loaded entity tables plus per-relation child indexes."""

    schema: SchemaDef
    tables: dict[str, EntityTable]
    # (parent, child) -> parent key -> child keys, precomputed for propagation
    child_index: dict[tuple[str, str], dict[str, list[str]]] = field(default_factory=dict)

    def table(self, entity: str) -> EntityTable:
        return self.tables[entity]

    def all_keys(self, entity: str) -> list[str]:
        return self.tables[entity].row_keys

    def column(self, entity: str, fieldname: str) -> list:
        return self.tables[entity].columns[fieldname]

    def cell(self, entity: str, key: str, fieldname: str):
        table = self.tables[entity]
        return table.columns[fieldname][table.key_to_row[key]]


def _coerce(value: str, kind: str, entity: str, fieldname: str, rownum: int,
            issues: list[str]):
    if value == "":
        return None
    if kind == "quantitative":
        try:
            return int(value)
        except ValueError:
            pass
        try:
            return float(value)
        except ValueError:
            issues.append(
                f"{entity}: row {rownum}, column {fieldname!r}: "
                f"non-numeric value {value!r} in quantitative field"
            )
            return None
    return value


def load_tables(schema: SchemaDef, table_sources: dict[str, str]) -> DatasetStore:
    """Load one CSV text per entity into a validated store.

    Header names must match the entity's declared fields exactly (any order).
    Empty cells become missing; quantitative cells must parse as numbers.
    Primary keys must be present and unique; foreign keys must be missing or
    reference an existing parent key.
    """
    issues: list[str] = []
    tables: dict[str, EntityTable] = {}

    for entity_def in schema.entities:
        name = entity_def.name
        source = table_sources.get(name)
        if source is None:
            issues.append(f"{name}: no table source provided")
            continue
        reader = csv.reader(io.StringIO(source))
        rows = list(reader)
        if not rows:
            issues.append(f"{name}: empty table source (missing header row)")
            continue
        header = rows[0]
        declared = set(entity_def.field_names())
        for col in declared - set(header):
            issues.append(f"{name}: missing column {col!r}")
        for col in set(header) - declared:
            issues.append(f"{name}: undeclared column {col!r}")
        if set(header) != declared:
            continue

        kinds = {f.name: f.kind for f in entity_def.fields}
        columns: dict[str, list] = {f: [] for f in entity_def.field_names()}
        for rownum, raw in enumerate(rows[1:], start=2):
            if len(raw) != len(header):
                issues.append(f"{name}: row {rownum}: expected {len(header)} cells, got {len(raw)}")
                continue
            for col, value in zip(header, raw):
                columns[col].append(_coerce(value, kinds[col], name, col, rownum, issues))

        key_col = columns[entity_def.key]
        row_keys: list[str] = []
        key_to_row: dict[str, int] = {}
        for idx, key in enumerate(key_col):
            if key is None:
                issues.append(f"{name}: row {idx + 2}: missing primary key")
                key = f"__missing_{idx}"
            elif key in key_to_row:
                issues.append(f"{name}: row {idx + 2}: duplicate primary key {key!r}")
            row_keys.append(key)
            key_to_row[key] = idx
        tables[name] = EntityTable(entity_def, columns, row_keys, key_to_row)

    store = DatasetStore(schema, tables)

    # Referential integrity plus the parent -> children index used by propagation.
    for rel in schema.relations:
        if rel.parent not in tables or rel.child not in tables:
            continue
        parent_keys = set(tables[rel.parent].row_keys)
        child = tables[rel.child]
        fk_col = child.columns[rel.foreign_key]
        index: dict[str, list[str]] = {}
        for idx, fk in enumerate(fk_col):
            if fk is None:
                continue
            if fk not in parent_keys:
                issues.append(
                    f"{rel.child}: row {idx + 2}, column {rel.foreign_key!r}: "
                    f"dangling foreign key {fk!r} (no such {rel.parent} key)"
                )
                continue
            index.setdefault(fk, []).append(child.row_keys[idx])
        store.child_index[(rel.parent, rel.child)] = index

    if issues:
        raise TableLoadError(issues)
    return store


@dataclass(frozen=True)
class FieldSummary:
    """Observed range (quantitative) or distinct values (categorical) of one field."""

    entity: str
    field: str
    kind: str
    unit: str | None = None
    min: float | None = None
    max: float | None = None
    values: tuple[str, ...] = ()
    cardinality: int = 0

    def to_wire(self) -> dict:
        wire: dict = {"entity": self.entity, "field": self.field, "kind": self.kind}
        if self.unit is not None:
            wire["unit"] = self.unit
        if self.kind == "quantitative":
            wire["min"] = self.min
            wire["max"] = self.max
        else:
            wire["values"] = list(self.values)
            wire["cardinality"] = self.cardinality
        return wire


def summarize_fields(store: DatasetStore, cardinality_cap: int = 50) -> list[FieldSummary]:
    """Summarize every non-identifier field, in schema order.

    Categorical fields with more than ``cardinality_cap`` distinct values are
    omitted (they stay filterable through the UI but are never shown to
    agents). Missing cells are ignored; a column with no observed values
    yields a summary with an empty range.
    """
    summaries: list[FieldSummary] = []
    for entity_def in store.schema.entities:
        table = store.tables[entity_def.name]
        for fdef in entity_def.fields:
            if fdef.kind == "identifier":
                continue
            cells = [c for c in table.columns[fdef.name] if c is not None]
            if fdef.kind == "quantitative":
                summaries.append(
                    FieldSummary(
                        entity_def.name, fdef.name, fdef.kind, fdef.unit,
                        min=min(cells) if cells else None,
                        max=max(cells) if cells else None,
                    )
                )
            else:
                distinct = tuple(sorted(set(str(c) for c in cells)))
                if len(distinct) > cardinality_cap:
                    continue
                summaries.append(
                    FieldSummary(
                        entity_def.name, fdef.name, fdef.kind, fdef.unit,
                        values=distinct, cardinality=len(distinct),
                    )
                )
    return summaries


def summary_for(store: DatasetStore, entity: str, fieldname: str,
                cardinality_cap: int = 50) -> FieldSummary | None:
    for s in summarize_fields(store, cardinality_cap):
        if s.entity == entity and s.field == fieldname:
            return s
    return None
