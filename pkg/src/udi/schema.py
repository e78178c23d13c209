"""Multi-entity metadata schema: typed fields, primary keys, and acyclic relations.

A schema describes a set of entity tables (donors, samples, ...), the kind of
each field, and parent/child relations between entities via foreign keys.
Exactly one entity is flagged as the dataset entity; its row identifiers are
what a discovery session ultimately exports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

FIELD_KINDS = ("quantitative", "categorical", "identifier")


class SchemaError(ValueError):
    """Schema config failed validation.

    Carries ``issues``: a list of ``(path, message)`` pairs where ``path``
    points into the config document (``/entities/1/fields/0/kind`` style).
    """

    def __init__(self, issues: list[tuple[str, str]]):
        self.issues = list(issues)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.issues))


@dataclass(frozen=True)
class FieldDef:
    """One column of an entity table."""

    name: str
    kind: str  # quantitative | categorical | identifier
    unit: str | None = None


@dataclass(frozen=True)
class EntityDef:
    """One entity table: named fields plus the identifier field used as key."""

    name: str
    key: str
    fields: tuple[FieldDef, ...]
    is_dataset_entity: bool = False

    def field_def(self, name: str) -> FieldDef | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]


@dataclass(frozen=True)
class RelationDef:
    """Parent/child edge: ``foreign_key`` in the child references the parent's key."""

    parent: str
    child: str
    foreign_key: str


@dataclass(frozen=True)
class SchemaDef:
    """Validated schema: entities plus relations forming a forest."""

    entities: tuple[EntityDef, ...]
    relations: tuple[RelationDef, ...]

    def entity(self, name: str) -> EntityDef | None:
        for e in self.entities:
            if e.name == name:
                return e
        return None

    def dataset_entity(self) -> EntityDef:
        for e in self.entities:
            if e.is_dataset_entity:
                return e
        raise ValueError("schema has no dataset entity")

    def relation(self, parent: str, child: str) -> RelationDef | None:
        for r in self.relations:
            if r.parent == parent and r.child == child:
                return r
        return None

    def neighbors(self, entity: str) -> list[tuple[RelationDef, str]]:
        """Undirected adjacency: (relation, other-endpoint) pairs for ``entity``."""
        out = []
        for r in self.relations:
            if r.parent == entity:
                out.append((r, r.child))
            elif r.child == entity:
                out.append((r, r.parent))
        return out


def load_schema(config_document: str | dict) -> SchemaDef:
    """Parse and validate a schema config document (JSON text or parsed object).

    All structural problems are collected and raised together as a
    :class:`SchemaError`; each issue carries a path into the document.
    """
    if isinstance(config_document, str):
        try:
            doc = json.loads(config_document)
        except json.JSONDecodeError as exc:
            raise SchemaError([("/", f"invalid JSON: {exc}")]) from exc
    else:
        doc = config_document

    issues: list[tuple[str, str]] = []

    def bad(path: str, msg: str) -> None:
        issues.append((path, msg))

    if not isinstance(doc, dict):
        raise SchemaError([("/", "config must be an object")])
    for key in doc:
        if key not in ("entities", "relations"):
            bad(f"/{key}", "unknown key")

    entities: list[EntityDef] = []
    raw_entities = doc.get("entities")
    if not isinstance(raw_entities, list) or not raw_entities:
        bad("/entities", "must be a non-empty list")
        raw_entities = []

    for i, raw in enumerate(raw_entities):
        path = f"/entities/{i}"
        if not isinstance(raw, dict):
            bad(path, "entity must be an object")
            continue
        for key in raw:
            if key not in ("name", "key", "fields", "dataset_entity"):
                bad(f"{path}/{key}", "unknown key")
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            bad(f"{path}/name", "entity name must be a non-empty string")
            continue
        key_field = raw.get("key")
        if not isinstance(key_field, str) or not key_field:
            bad(f"{path}/key", "key must name an identifier field")
            key_field = ""
        is_dataset = raw.get("dataset_entity", False)
        if not isinstance(is_dataset, bool):
            bad(f"{path}/dataset_entity", "must be a boolean")
            is_dataset = False

        fields: list[FieldDef] = []
        raw_fields = raw.get("fields")
        if not isinstance(raw_fields, list) or not raw_fields:
            bad(f"{path}/fields", "must be a non-empty list")
            raw_fields = []
        seen_fields: set[str] = set()
        for j, rf in enumerate(raw_fields):
            fpath = f"{path}/fields/{j}"
            if not isinstance(rf, dict):
                bad(fpath, "field must be an object")
                continue
            for key in rf:
                if key not in ("name", "kind", "unit"):
                    bad(f"{fpath}/{key}", "unknown key")
            fname = rf.get("name")
            if not isinstance(fname, str) or not fname:
                bad(f"{fpath}/name", "field name must be a non-empty string")
                continue
            if fname in seen_fields:
                bad(f"{fpath}/name", f"duplicate field name {fname!r}")
                continue
            seen_fields.add(fname)
            kind = rf.get("kind")
            if kind not in FIELD_KINDS:
                bad(f"{fpath}/kind", f"kind must be one of {', '.join(FIELD_KINDS)}")
                continue
            unit = rf.get("unit")
            if unit is not None and not isinstance(unit, str):
                bad(f"{fpath}/unit", "unit must be a string")
                unit = None
            fields.append(FieldDef(fname, kind, unit))

        entity = EntityDef(name, key_field, tuple(fields), is_dataset)
        kd = entity.field_def(key_field)
        if kd is None:
            bad(f"{path}/key", f"key {key_field!r} is not a field of {name!r}")
        elif kd.kind != "identifier":
            bad(f"{path}/key", f"key {key_field!r} must be an identifier field")
        entities.append(entity)

    names = [e.name for e in entities]
    for i, n in enumerate(names):
        if names.index(n) != i:
            bad(f"/entities/{i}/name", f"duplicate entity name {n!r}")
    dataset_count = sum(1 for e in entities if e.is_dataset_entity)
    if dataset_count == 0:
        bad("/entities", "no entity has dataset_entity = true")
    elif dataset_count > 1:
        bad("/entities", "more than one entity has dataset_entity = true")

    by_name = {e.name: e for e in entities}
    relations: list[RelationDef] = []
    raw_relations = doc.get("relations", [])
    if not isinstance(raw_relations, list):
        bad("/relations", "must be a list")
        raw_relations = []
    for i, raw in enumerate(raw_relations):
        path = f"/relations/{i}"
        if not isinstance(raw, dict):
            bad(path, "relation must be an object")
            continue
        for key in raw:
            if key not in ("parent", "child", "foreign_key"):
                bad(f"{path}/{key}", "unknown key")
        parent = raw.get("parent")
        child = raw.get("child")
        fk = raw.get("foreign_key")
        ok = True
        if not isinstance(parent, str) or parent not in by_name:
            bad(f"{path}/parent", f"unknown entity {parent!r}")
            ok = False
        if not isinstance(child, str) or child not in by_name:
            bad(f"{path}/child", f"unknown entity {child!r}")
            ok = False
        if ok and parent == child:
            bad(path, f"self-relation: {parent!r} cannot relate to itself")
            ok = False
        if ok:
            fdef = by_name[child].field_def(fk) if isinstance(fk, str) else None
            if fdef is None:
                bad(f"{path}/foreign_key", f"{fk!r} is not a field of {child!r}")
                ok = False
            elif fdef.kind != "identifier":
                bad(f"{path}/foreign_key", f"{fk!r} must be an identifier field")
                ok = False
        if ok:
            relations.append(RelationDef(parent, child, fk))

    # Forest check: the undirected entity graph must be acyclic (union-find;
    # a repeated edge between the same pair also counts as a cycle).
    parent_of: dict[str, str] = {n: n for n in by_name}

    def find(x: str) -> str:
        while parent_of[x] != x:
            parent_of[x] = parent_of[parent_of[x]]
            x = parent_of[x]
        return x

    for i, r in enumerate(relations):
        a, b = find(r.parent), find(r.child)
        if a == b:
            bad(f"/relations/{i}", f"cycle: relation {r.parent!r}-{r.child!r} closes a loop")
        else:
            parent_of[a] = b

    if issues:
        raise SchemaError(issues)
    return SchemaDef(tuple(entities), tuple(relations))


def serialize_schema(schema: SchemaDef) -> dict:
    """Render a SchemaDef back into the config-document format.

    ``load_schema(serialize_schema(s)) == s`` for every valid schema.
    """
    entities = []
    for e in schema.entities:
        fields = []
        for f in e.fields:
            fd: dict = {"name": f.name, "kind": f.kind}
            if f.unit is not None:
                fd["unit"] = f.unit
            fields.append(fd)
        entities.append(
            {
                "name": e.name,
                "key": e.key,
                "dataset_entity": e.is_dataset_entity,
                "fields": fields,
            }
        )
    relations = [
        {"parent": r.parent, "child": r.child, "foreign_key": r.foreign_key}
        for r in schema.relations
    ]
    return {"entities": entities, "relations": relations}
