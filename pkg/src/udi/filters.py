"""Active filters and cross-entity visibility.

Filters are conjunctive interval (quantitative) or point (categorical)
constraints on a single entity field. Resolving visibility prunes rows
across relation edges so that a filter on one entity also restricts every
connected entity, without hiding rows (e.g. childless parents) that no
active filter actually constrains.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .schema import SchemaDef
from .store import DatasetStore


class FilterError(ValueError):
    pass


@dataclass(frozen=True)
class FilterSource:
    """Provenance of a filter: the agent message or view selection that created it."""

    type: str  # "agent" | "view" | "user"
    message: int | None = None
    view: str | None = None

    def to_wire(self) -> dict:
        wire: dict = {"type": self.type}
        if self.message is not None:
            wire["message"] = self.message
        if self.view is not None:
            wire["view"] = self.view
        return wire

    @staticmethod
    def from_wire(doc: dict) -> "FilterSource":
        return FilterSource(doc.get("type", "user"), doc.get("message"), doc.get("view"))


@dataclass(frozen=True)
class IntervalFilter:
    """min <= value <= max on a quantitative field; missing values never pass."""

    id: str
    entity: str
    field: str
    min: float
    max: float
    source: FilterSource
    edited: bool = False

    def matches(self, value) -> bool:
        return value is not None and self.min <= value <= self.max

    def to_wire(self) -> dict:
        return {
            "id": self.id, "kind": "interval", "entity": self.entity,
            "field": self.field, "min": self.min, "max": self.max,
            "source": self.source.to_wire(), "edited": self.edited,
        }


@dataclass(frozen=True)
class PointFilter:
    """value in a fixed category set; missing values never pass."""

    id: str
    entity: str
    field: str
    values: frozenset[str]
    source: FilterSource
    edited: bool = False

    def matches(self, value) -> bool:
        return value is not None and value in self.values

    def to_wire(self) -> dict:
        return {
            "id": self.id, "kind": "point", "entity": self.entity,
            "field": self.field, "values": sorted(self.values),
            "source": self.source.to_wire(), "edited": self.edited,
        }


Filter = IntervalFilter | PointFilter


def validate_filter(f: Filter, schema: SchemaDef) -> None:
    """Check entity/field existence, kind compatibility, and bounds/values."""
    entity = schema.entity(f.entity)
    if entity is None:
        raise FilterError(f"unknown entity {f.entity!r}")
    fdef = entity.field_def(f.field)
    if fdef is None:
        raise FilterError(f"unknown field {f.field!r} on entity {f.entity!r}")
    if isinstance(f, IntervalFilter):
        if fdef.kind != "quantitative":
            raise FilterError(
                f"interval filter requires a quantitative field; "
                f"{f.entity}.{f.field} is {fdef.kind}"
            )
        if not isinstance(f.min, (int, float)) or not isinstance(f.max, (int, float)):
            raise FilterError("interval bounds must be numbers")
        if f.min > f.max:
            raise FilterError(f"invalid bounds: min {f.min} > max {f.max}")
    else:
        # Point filters apply to categorical fields, and to identifier fields
        # when they originate from a table-row selection in a view.
        if fdef.kind == "quantitative":
            raise FilterError(
                f"point filter requires a categorical field; "
                f"{f.entity}.{f.field} is quantitative"
            )
        if not f.values:
            raise FilterError("point filter requires a non-empty value set")


def filter_from_wire(doc: dict, schema: SchemaDef) -> Filter:
    kind = doc.get("kind")
    source = FilterSource.from_wire(doc.get("source", {}))
    if kind == "interval":
        f: Filter = IntervalFilter(
            doc["id"], doc["entity"], doc["field"], doc["min"], doc["max"],
            source, doc.get("edited", False),
        )
    elif kind == "point":
        f = PointFilter(
            doc["id"], doc["entity"], doc["field"], frozenset(doc["values"]),
            source, doc.get("edited", False),
        )
    else:
        raise FilterError(f"unknown filter kind {kind!r}")
    validate_filter(f, schema)
    return f


@dataclass(frozen=True)
class FilterState:
    """Ordered, immutable set of active filters with a monotone version."""

    filters: tuple[Filter, ...] = ()
    version: int = 0

    def get(self, filter_id: str) -> Filter | None:
        for f in self.filters:
            if f.id == filter_id:
                return f
        return None

    def on_entity(self, entity: str) -> list[Filter]:
        return [f for f in self.filters if f.entity == entity]

    def restricted_entities(self) -> set[str]:
        return {f.entity for f in self.filters}

    def with_added(self, f: Filter, schema: SchemaDef) -> "FilterState":
        validate_filter(f, schema)
        if self.get(f.id) is not None:
            raise FilterError(f"duplicate filter id {f.id!r}")
        return FilterState(self.filters + (f,), self.version + 1)

    def with_updated(self, filter_id: str, payload: dict, schema: SchemaDef) -> "FilterState":
        """Apply new bounds or values; the filter keeps its source and gains
        a user-adjusted annotation."""
        existing = self.get(filter_id)
        if existing is None:
            raise FilterError(f"unknown filter id {filter_id!r}")
        if isinstance(existing, IntervalFilter):
            if "min" not in payload or "max" not in payload:
                raise FilterError("interval update requires min and max")
            updated: Filter = replace(
                existing, min=payload["min"], max=payload["max"], edited=True
            )
        else:
            if "values" not in payload:
                raise FilterError("point update requires values")
            updated = replace(existing, values=frozenset(payload["values"]), edited=True)
        validate_filter(updated, schema)
        filters = tuple(updated if f.id == filter_id else f for f in self.filters)
        return FilterState(filters, self.version + 1)

    def with_removed(self, filter_id: str) -> "FilterState":
        if self.get(filter_id) is None:
            raise FilterError(f"unknown filter id {filter_id!r}")
        filters = tuple(f for f in self.filters if f.id != filter_id)
        return FilterState(filters, self.version + 1)

    def with_removed_many(self, filter_ids: set[str]) -> "FilterState":
        filters = tuple(f for f in self.filters if f.id not in filter_ids)
        return FilterState(filters, self.version + 1)


@dataclass(frozen=True)
class VisibilityMap:
    """Per-entity visible row keys at a given filter-state version."""

    visible: dict[str, frozenset[str]]
    version: int = 0

    def keys(self, entity: str) -> frozenset[str]:
        return self.visible[entity]


def apply_local(filters_on_entity: list[Filter], store: DatasetStore) -> set[str]:
    """Rows of one entity satisfying the conjunction of its filters.

    A row with a missing value in any filtered field is excluded.
    """
    if not filters_on_entity:
        raise ValueError("apply_local requires at least one filter")
    entity = filters_on_entity[0].entity
    if any(f.entity != entity for f in filters_on_entity):
        raise ValueError("all filters must target the same entity")
    table = store.table(entity)
    out: set[str] = set()
    columns = [table.columns[f.field] for f in filters_on_entity]
    for idx, key in enumerate(table.row_keys):
        if all(f.matches(col[idx]) for f, col in zip(filters_on_entity, columns)):
            out.add(key)
    return out


def _edge_gates(schema: SchemaDef, restricted: set[str]) -> dict[tuple[str, str], tuple[bool, bool]]:
    """Per relation edge (parent, child): (downward_enabled, upward_enabled).

    Removing the edge splits its tree in two; pruning toward one side is
    enabled only when the opposite side contains a restricted entity. This
    keeps unconstrained rows (e.g. parents with no children) visible when
    nothing on the child side is filtered.
    """
    gates: dict[tuple[str, str], tuple[bool, bool]] = {}
    for rel in schema.relations:
        parent_side = _component(schema, rel.parent, skip=rel)
        child_side = _component(schema, rel.child, skip=rel)
        downward = bool(parent_side & restricted)
        upward = bool(child_side & restricted)
        gates[(rel.parent, rel.child)] = (downward, upward)
    return gates


def _component(schema: SchemaDef, start: str, skip) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        for rel, other in schema.neighbors(node):
            if rel is skip or other in seen:
                continue
            seen.add(other)
            stack.append(other)
    return seen


def resolve_visibility(schema: SchemaDef, store: DatasetStore, state: FilterState) -> VisibilityMap:
    """Fixpoint of local filtering plus gated semi-join pruning along relations.

    Local candidates are pruned edge by edge until stable: downward pruning
    drops children whose foreign key is missing or not visible in the parent;
    upward pruning drops parents with no visible child. Each direction is
    enabled per edge only if the far side of that edge contains a filtered
    entity.
    """
    candidates: dict[str, set[str]] = {}
    for entity_def in schema.entities:
        filters = state.on_entity(entity_def.name)
        if filters:
            candidates[entity_def.name] = apply_local(filters, store)
        else:
            candidates[entity_def.name] = set(store.all_keys(entity_def.name))

    gates = _edge_gates(schema, state.restricted_entities())

    changed = True
    while changed:
        changed = False
        for rel in schema.relations:
            downward, upward = gates[(rel.parent, rel.child)]
            parent_set = candidates[rel.parent]
            child_set = candidates[rel.child]
            if downward:
                child_table = store.table(rel.child)
                fk_col = child_table.columns[rel.foreign_key]
                keep = {
                    key for key in child_set
                    if (fk := fk_col[child_table.key_to_row[key]]) is not None
                    and fk in parent_set
                }
                if keep != child_set:
                    candidates[rel.child] = keep
                    changed = True
            if upward:
                child_set = candidates[rel.child]
                index = store.child_index[(rel.parent, rel.child)]
                keep = {
                    key for key in parent_set
                    if any(ck in child_set for ck in index.get(key, ()))
                }
                if keep != parent_set:
                    candidates[rel.parent] = keep
                    changed = True

    return VisibilityMap(
        {name: frozenset(keys) for name, keys in candidates.items()},
        version=state.version,
    )


def full_visibility(schema: SchemaDef, store: DatasetStore, version: int = 0) -> VisibilityMap:
    """Every row of every entity visible (the empty-filter identity)."""
    return VisibilityMap(
        {e.name: frozenset(store.all_keys(e.name)) for e in schema.entities},
        version=version,
    )
