"""Declarative visualization specs: parsing, validation, compilation, linking.

A spec names one or more entity sources, an ordered transform pipeline, and
a representation (mark with encodings, or a table). Parsing is closed: any
key outside the grammar is rejected with a document path, so malformed
model output never reaches execution. Compilation lowers a validated spec
to a Plan whose steps reference only columns proven to exist.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .schema import SchemaDef

MARKS = ("point", "bar", "line", "rect", "text")
ENCODINGS = ("x", "y", "color", "size", "text")
VALUE_KINDS = ("quantitative", "nominal")
FILTER_OPS = ("eq", "in", "range")
ROLLUP_OPS = ("count", "sum", "mean", "min", "max")
SELECTION_KINDS = ("interval_1d", "interval_2d", "point")

_NUMBER = (int, float)


class SpecError(ValueError):
    """Spec document rejected; ``errors`` pairs document paths with messages."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


def _is_number(v) -> bool:
    return isinstance(v, _NUMBER) and not isinstance(v, bool)


def _is_scalar(v) -> bool:
    return isinstance(v, str) or _is_number(v)


# -- spec model -------------------------------------------------------------


@dataclass(frozen=True)
class Source:
    alias: str
    entity: str


@dataclass(frozen=True)
class TFilter:
    field: str
    op: str
    operand: object


@dataclass(frozen=True)
class TGroupBy:
    fields: tuple[str, ...]


@dataclass(frozen=True)
class RollupOutput:
    name: str
    op: str
    field: str | None = None


@dataclass(frozen=True)
class TRollup:
    outputs: tuple[RollupOutput, ...]


@dataclass(frozen=True)
class TBinBy:
    field: str
    bin_count: int
    output: str


@dataclass(frozen=True)
class TJoin:
    left: str
    right: str
    parent: str
    child: str


@dataclass(frozen=True)
class TOrderBy:
    field: str
    descending: bool = False


@dataclass(frozen=True)
class TLimit:
    n: int


Transform = TFilter | TGroupBy | TRollup | TBinBy | TJoin | TOrderBy | TLimit


@dataclass(frozen=True)
class Mapping:
    encoding: str
    field: str
    value_kind: str


@dataclass(frozen=True)
class MarkRepr:
    mark: str
    mapping: tuple[Mapping, ...]


@dataclass(frozen=True)
class TableColumn:
    field: str
    label: str | None = None


@dataclass(frozen=True)
class TableRepr:
    columns: tuple[TableColumn, ...]


@dataclass(frozen=True)
class SelectionDecl:
    """How brushing this view turns into filters on an entity's fields."""

    view: str
    kind: str
    targets: tuple[tuple[str, str], ...]  # (entity, field), 1 or 2 of them

    def to_wire(self) -> dict:
        return {
            "view": self.view,
            "kind": self.kind,
            "targets": [{"entity": e, "field": f} for e, f in self.targets],
        }

    @staticmethod
    def from_wire(doc: dict) -> "SelectionDecl":
        return SelectionDecl(
            doc["view"], doc["kind"],
            tuple((t["entity"], t["field"]) for t in doc["targets"]),
        )


@dataclass(frozen=True)
class Interactivity:
    selection: SelectionDecl
    global_visibility: bool = True


@dataclass(frozen=True)
class ViewSpec:
    sources: tuple[Source, ...]
    transforms: tuple[Transform, ...]
    representation: MarkRepr | TableRepr
    interactivity: Interactivity | None = None


# -- parsing ----------------------------------------------------------------


def _reject_unknown(doc: dict, allowed: tuple[str, ...], path: str,
                    errors: list[tuple[str, str]]) -> None:
    for key in doc:
        if key not in allowed:
            errors.append((f"{path}/{key}", "unknown key"))


def _parse_source(doc, path: str, errors) -> Source | None:
    if not isinstance(doc, dict):
        errors.append((path, "source must be an object"))
        return None
    _reject_unknown(doc, ("name", "entity"), path, errors)
    ok = True
    for key in ("name", "entity"):
        if not isinstance(doc.get(key), str) or not doc.get(key):
            errors.append((f"{path}/{key}", "required string"))
            ok = False
    return Source(doc["name"], doc["entity"]) if ok else None


def _parse_filter(doc: dict, path: str, errors) -> TFilter | None:
    _reject_unknown(doc, ("field", "op", "operand"), path, errors)
    field = doc.get("field")
    if not isinstance(field, str):
        errors.append((f"{path}/field", "required string"))
        return None
    op = doc.get("op")
    if op not in FILTER_OPS:
        errors.append((f"{path}/op", f"must be one of {', '.join(FILTER_OPS)}"))
        return None
    if "operand" not in doc:
        errors.append((f"{path}/operand", "required"))
        return None
    operand = doc["operand"]
    if op == "eq":
        if not _is_scalar(operand):
            errors.append((f"{path}/operand", "eq requires a string or number"))
            return None
    elif op == "in":
        if not isinstance(operand, list) or not operand or not all(_is_scalar(v) for v in operand):
            errors.append((f"{path}/operand", "in requires a non-empty list of scalars"))
            return None
        operand = tuple(operand)
    else:  # range
        if (not isinstance(operand, list) or len(operand) != 2
                or not all(_is_number(v) for v in operand)):
            errors.append((f"{path}/operand", "range requires [min, max] numbers"))
            return None
        if operand[0] > operand[1]:
            errors.append((f"{path}/operand", "range min exceeds max"))
            return None
        operand = tuple(operand)
    return TFilter(field, op, operand)


def _parse_groupby(doc: dict, path: str, errors) -> TGroupBy | None:
    _reject_unknown(doc, ("fields",), path, errors)
    fields = doc.get("fields")
    if (not isinstance(fields, list) or not fields
            or not all(isinstance(f, str) for f in fields)):
        errors.append((f"{path}/fields", "required non-empty list of field names"))
        return None
    return TGroupBy(tuple(fields))


def _parse_rollup(doc: dict, path: str, errors) -> TRollup | None:
    _reject_unknown(doc, ("outputs",), path, errors)
    outputs = doc.get("outputs")
    if not isinstance(outputs, dict) or not outputs:
        errors.append((f"{path}/outputs", "required non-empty object"))
        return None
    parsed = []
    ok = True
    for name, out in outputs.items():
        opath = f"{path}/outputs/{name}"
        if not isinstance(out, dict):
            errors.append((opath, "must be an object"))
            ok = False
            continue
        _reject_unknown(out, ("op", "field"), opath, errors)
        op = out.get("op")
        if op not in ROLLUP_OPS:
            errors.append((f"{opath}/op", f"must be one of {', '.join(ROLLUP_OPS)}"))
            ok = False
            continue
        field = out.get("field")
        if op == "count":
            if field is not None:
                errors.append((f"{opath}/field", "count takes no field"))
                ok = False
                continue
        elif not isinstance(field, str):
            errors.append((f"{opath}/field", f"{op} requires a field"))
            ok = False
            continue
        parsed.append(RollupOutput(name, op, field))
    return TRollup(tuple(parsed)) if ok else None


def _parse_binby(doc: dict, path: str, errors) -> TBinBy | None:
    _reject_unknown(doc, ("field", "bin_count", "output"), path, errors)
    ok = True
    field = doc.get("field")
    if not isinstance(field, str):
        errors.append((f"{path}/field", "required string"))
        ok = False
    bin_count = doc.get("bin_count")
    if not isinstance(bin_count, int) or isinstance(bin_count, bool) or bin_count < 1:
        errors.append((f"{path}/bin_count", "required positive integer"))
        ok = False
    output = doc.get("output")
    if not isinstance(output, str) or not output:
        errors.append((f"{path}/output", "required string"))
        ok = False
    return TBinBy(field, bin_count, output) if ok else None


def _parse_join(doc: dict, path: str, errors) -> TJoin | None:
    _reject_unknown(doc, ("left", "right", "relation"), path, errors)
    ok = True
    for key in ("left", "right"):
        if not isinstance(doc.get(key), str):
            errors.append((f"{path}/{key}", "required source alias"))
            ok = False
    relation = doc.get("relation")
    if (not isinstance(relation, list) or len(relation) != 2
            or not all(isinstance(r, str) for r in relation)):
        errors.append((f"{path}/relation", "required [parent, child] entity pair"))
        ok = False
    return TJoin(doc["left"], doc["right"], relation[0], relation[1]) if ok else None


def _parse_orderby(doc: dict, path: str, errors) -> TOrderBy | None:
    _reject_unknown(doc, ("field", "direction"), path, errors)
    field = doc.get("field")
    if not isinstance(field, str):
        errors.append((f"{path}/field", "required string"))
        return None
    direction = doc.get("direction", "asc")
    if direction not in ("asc", "desc"):
        errors.append((f"{path}/direction", "must be asc or desc"))
        return None
    return TOrderBy(field, direction == "desc")


def _parse_limit(doc: dict, path: str, errors) -> TLimit | None:
    _reject_unknown(doc, ("n",), path, errors)
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        errors.append((f"{path}/n", "required positive integer"))
        return None
    return TLimit(n)


_TRANSFORM_PARSERS = {
    "filter": _parse_filter,
    "groupby": _parse_groupby,
    "rollup": _parse_rollup,
    "binby": _parse_binby,
    "join": _parse_join,
    "orderby": _parse_orderby,
    "limit": _parse_limit,
}


def _parse_transform(doc, path: str, errors) -> Transform | None:
    if not isinstance(doc, dict) or len(doc) != 1:
        errors.append((path, "transform must be an object with exactly one operator key"))
        return None
    (name, body), = doc.items()
    parser = _TRANSFORM_PARSERS.get(name)
    if parser is None:
        errors.append((f"{path}/{name}", "unknown transform"))
        return None
    if not isinstance(body, dict):
        errors.append((f"{path}/{name}", "must be an object"))
        return None
    return parser(body, f"{path}/{name}", errors)


def _parse_representation(doc, path: str, errors) -> MarkRepr | TableRepr | None:
    if not isinstance(doc, dict):
        errors.append((path, "representation must be an object"))
        return None
    if doc.get("type") == "table" or ("type" in doc and "mark" not in doc):
        _reject_unknown(doc, ("type", "columns"), path, errors)
        if doc.get("type") != "table":
            errors.append((f"{path}/type", "must be \"table\""))
            return None
        columns = doc.get("columns")
        if not isinstance(columns, list) or not columns:
            errors.append((f"{path}/columns", "required non-empty list"))
            return None
        parsed_cols = []
        ok = True
        for i, col in enumerate(columns):
            cpath = f"{path}/columns/{i}"
            if not isinstance(col, dict):
                errors.append((cpath, "must be an object"))
                ok = False
                continue
            _reject_unknown(col, ("field", "label"), cpath, errors)
            if not isinstance(col.get("field"), str):
                errors.append((f"{cpath}/field", "required string"))
                ok = False
                continue
            label = col.get("label")
            if label is not None and not isinstance(label, str):
                errors.append((f"{cpath}/label", "must be a string"))
                ok = False
                continue
            parsed_cols.append(TableColumn(col["field"], label))
        return TableRepr(tuple(parsed_cols)) if ok else None

    _reject_unknown(doc, ("mark", "mapping"), path, errors)
    mark = doc.get("mark")
    if mark not in MARKS:
        errors.append((f"{path}/mark", f"must be one of {', '.join(MARKS)}"))
        return None
    mapping = doc.get("mapping")
    if not isinstance(mapping, list) or not mapping:
        errors.append((f"{path}/mapping", "required non-empty list"))
        return None
    parsed_maps = []
    seen_encodings = set()
    ok = True
    for i, m in enumerate(mapping):
        mpath = f"{path}/mapping/{i}"
        if not isinstance(m, dict):
            errors.append((mpath, "must be an object"))
            ok = False
            continue
        _reject_unknown(m, ("encoding", "field", "value_kind"), mpath, errors)
        encoding = m.get("encoding")
        if encoding not in ENCODINGS:
            errors.append((f"{mpath}/encoding", f"must be one of {', '.join(ENCODINGS)}"))
            ok = False
            continue
        if encoding in seen_encodings:
            errors.append((f"{mpath}/encoding", f"duplicate encoding {encoding!r}"))
            ok = False
            continue
        seen_encodings.add(encoding)
        if not isinstance(m.get("field"), str):
            errors.append((f"{mpath}/field", "required string"))
            ok = False
            continue
        if m.get("value_kind") not in VALUE_KINDS:
            errors.append((f"{mpath}/value_kind", "must be quantitative or nominal"))
            ok = False
            continue
        parsed_maps.append(Mapping(encoding, m["field"], m["value_kind"]))
    if ok and mark in ("point", "bar", "line", "rect"):
        if not {"x", "y"} <= seen_encodings:
            errors.append((f"{path}/mapping", f"{mark} mark requires x and y encodings"))
            ok = False
    return MarkRepr(mark, tuple(parsed_maps)) if ok else None


def _parse_interactivity(doc, path: str, errors) -> Interactivity | None:
    if not isinstance(doc, dict):
        errors.append((path, "must be an object"))
        return None
    _reject_unknown(doc, ("selection", "global_visibility"), path, errors)
    sel = doc.get("selection")
    if not isinstance(sel, dict):
        errors.append((f"{path}/selection", "required object"))
        return None
    _reject_unknown(sel, ("view", "kind", "targets"), f"{path}/selection", errors)
    if not isinstance(sel.get("view"), str):
        errors.append((f"{path}/selection/view", "required string"))
        return None
    if sel.get("kind") not in SELECTION_KINDS:
        errors.append((f"{path}/selection/kind",
                       f"must be one of {', '.join(SELECTION_KINDS)}"))
        return None
    targets = sel.get("targets")
    if not isinstance(targets, list) or not 1 <= len(targets) <= 2:
        errors.append((f"{path}/selection/targets", "required list of 1 or 2 targets"))
        return None
    parsed_targets = []
    for i, t in enumerate(targets):
        tpath = f"{path}/selection/targets/{i}"
        if (not isinstance(t, dict) or not isinstance(t.get("entity"), str)
                or not isinstance(t.get("field"), str)):
            errors.append((tpath, "must be {entity, field}"))
            return None
        _reject_unknown(t, ("entity", "field"), tpath, errors)
        parsed_targets.append((t["entity"], t["field"]))
    gv = doc.get("global_visibility", True)
    if not isinstance(gv, bool):
        errors.append((f"{path}/global_visibility", "must be a boolean"))
        return None
    selection = SelectionDecl(sel["view"], sel["kind"], tuple(parsed_targets))
    return Interactivity(selection, gv)


def parse_spec(document: str | dict) -> ViewSpec:
    """Parse a spec document, rejecting anything outside the grammar.

    Raises SpecError carrying every (path, message) pair found, so a caller
    can hand the full list back to the model for a retry.
    """
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as e:
            raise SpecError([("/", f"invalid JSON: {e.msg} at line {e.lineno}")])
    else:
        doc = document
    errors: list[tuple[str, str]] = []
    if not isinstance(doc, dict):
        raise SpecError([("/", "document must be an object")])
    _reject_unknown(doc, ("source", "transformation", "representation", "interactivity"),
                    "", errors)

    sources: list[Source] = []
    raw_source = doc.get("source")
    if raw_source is None:
        errors.append(("/source", "required"))
    elif isinstance(raw_source, list):
        if not raw_source:
            errors.append(("/source", "must name at least one source"))
        for i, s in enumerate(raw_source):
            parsed = _parse_source(s, f"/source/{i}", errors)
            if parsed:
                sources.append(parsed)
    else:
        parsed = _parse_source(raw_source, "/source", errors)
        if parsed:
            sources.append(parsed)

    transforms: list[Transform] = []
    raw_transforms = doc.get("transformation", [])
    if not isinstance(raw_transforms, list):
        errors.append(("/transformation", "must be a list"))
    else:
        for i, t in enumerate(raw_transforms):
            parsed_t = _parse_transform(t, f"/transformation/{i}", errors)
            if parsed_t:
                transforms.append(parsed_t)

    representation = None
    if "representation" not in doc:
        errors.append(("/representation", "required"))
    else:
        representation = _parse_representation(doc["representation"], "/representation", errors)

    interactivity = None
    if "interactivity" in doc:
        interactivity = _parse_interactivity(doc["interactivity"], "/interactivity", errors)

    if errors:
        raise SpecError(errors)
    return ViewSpec(tuple(sources), tuple(transforms), representation, interactivity)


def serialize_spec(spec: ViewSpec) -> dict:
    """Canonical document for a ViewSpec; parse(serialize(s)) == s."""
    if len(spec.sources) == 1:
        source: object = {"name": spec.sources[0].alias, "entity": spec.sources[0].entity}
    else:
        source = [{"name": s.alias, "entity": s.entity} for s in spec.sources]
    doc: dict = {"source": source}
    if spec.transforms:
        doc["transformation"] = [_serialize_transform(t) for t in spec.transforms]
    if isinstance(spec.representation, TableRepr):
        columns = []
        for col in spec.representation.columns:
            entry: dict = {"field": col.field}
            if col.label is not None:
                entry["label"] = col.label
            columns.append(entry)
        doc["representation"] = {"type": "table", "columns": columns}
    else:
        doc["representation"] = {
            "mark": spec.representation.mark,
            "mapping": [
                {"encoding": m.encoding, "field": m.field, "value_kind": m.value_kind}
                for m in spec.representation.mapping
            ],
        }
    if spec.interactivity is not None:
        doc["interactivity"] = {
            "selection": spec.interactivity.selection.to_wire(),
            "global_visibility": spec.interactivity.global_visibility,
        }
    return doc


def _serialize_transform(t: Transform) -> dict:
    if isinstance(t, TFilter):
        operand = list(t.operand) if isinstance(t.operand, tuple) else t.operand
        return {"filter": {"field": t.field, "op": t.op, "operand": operand}}
    if isinstance(t, TGroupBy):
        return {"groupby": {"fields": list(t.fields)}}
    if isinstance(t, TRollup):
        outputs = {}
        for out in t.outputs:
            body: dict = {"op": out.op}
            if out.field is not None:
                body["field"] = out.field
            outputs[out.name] = body
        return {"rollup": {"outputs": outputs}}
    if isinstance(t, TBinBy):
        return {"binby": {"field": t.field, "bin_count": t.bin_count, "output": t.output}}
    if isinstance(t, TJoin):
        return {"join": {"left": t.left, "right": t.right,
                         "relation": [t.parent, t.child]}}
    if isinstance(t, TOrderBy):
        return {"orderby": {"field": t.field,
                            "direction": "desc" if t.descending else "asc"}}
    return {"limit": {"n": t.n}}


# -- compilation ------------------------------------------------------------


@dataclass(frozen=True)
class Column:
    """A pipeline column: display name, result kind, and where it came from.

    origin is ("raw", alias, entity, field) for untouched source fields,
    ("bin", entity, field) for bin labels, or None for computed outputs.
    """

    name: str
    kind: str  # quantitative | nominal
    origin: tuple | None


@dataclass(frozen=True)
class FilterStep:
    column: str
    op: str
    operand: object


@dataclass(frozen=True)
class JoinStep:
    incoming_entity: str
    incoming_alias: str
    incoming_is_child: bool
    foreign_key: str
    pipeline_key_column: str  # holds parent key (incoming child) or child FK (incoming parent)
    renames: tuple[tuple[str, str], ...]  # existing columns renamed on collision
    incoming_columns: tuple[tuple[str, str], ...]  # (column name, entity field)


@dataclass(frozen=True)
class BinStep:
    column: str
    output: str
    entity: str
    field: str
    bin_count: int


@dataclass(frozen=True)
class AggregateStep:
    group_columns: tuple[str, ...]
    outputs: tuple[tuple[str, str, str | None], ...]  # (name, op, source column)


@dataclass(frozen=True)
class OrderStep:
    column: str
    descending: bool


@dataclass(frozen=True)
class LimitStep:
    n: int


PlanStep = FilterStep | JoinStep | BinStep | AggregateStep | OrderStep | LimitStep


@dataclass(frozen=True)
class Plan:
    """Executable lowering of a validated spec."""

    base_entity: str
    entities: tuple[str, ...]
    steps: tuple[PlanStep, ...]
    project: tuple[str, ...]
    output_columns: tuple[tuple[str, str], ...]  # (name, kind)


def _kind_of(field_kind: str) -> str:
    return "quantitative" if field_kind == "quantitative" else "nominal"


class _Tracer:
    """Walks a spec once, accumulating semantic errors, columns, and steps."""

    def __init__(self, spec: ViewSpec, schema: SchemaDef):
        self.spec = spec
        self.schema = schema
        self.errors: list[tuple[str, str]] = []
        self.columns: list[Column] = []
        self.steps: list[PlanStep] = []
        self.joined: dict[str, str] = {}  # alias -> entity, already in pipeline
        self.base_entity = ""

    def error(self, path: str, msg: str) -> None:
        self.errors.append((path, msg))

    def find(self, name: str) -> Column | None:
        for col in self.columns:
            if col.name == name:
                return col
        return None

    def run(self) -> None:
        spec, schema = self.spec, self.schema
        aliases: dict[str, Source] = {}
        for i, src in enumerate(spec.sources):
            path = f"/source/{i}" if len(spec.sources) > 1 else "/source"
            if src.alias in aliases:
                self.error(f"{path}/name", f"duplicate source alias {src.alias!r}")
                continue
            if schema.entity(src.entity) is None:
                self.error(f"{path}/entity", f"unknown entity {src.entity!r}")
                continue
            aliases[src.alias] = src
        if not aliases:
            return
        base = spec.sources[0]
        if base.alias not in aliases:
            return
        self.base_entity = base.entity
        self.joined[base.alias] = base.entity
        for fdef in schema.entity(base.entity).fields:
            self.columns.append(Column(
                fdef.name, _kind_of(fdef.kind), ("raw", base.alias, base.entity, fdef.name)
            ))

        pending_groupby: tuple[TGroupBy, str] | None = None
        for i, t in enumerate(spec.transforms):
            path = f"/transformation/{i}"
            if pending_groupby is not None and not isinstance(t, TRollup):
                self.error(pending_groupby[1], "groupby must be immediately followed by rollup")
                pending_groupby = None
            if isinstance(t, TFilter):
                self.trace_filter(t, path)
            elif isinstance(t, TGroupBy):
                pending_groupby = (t, f"{path}/groupby")
            elif isinstance(t, TRollup):
                groupby = pending_groupby[0] if pending_groupby else None
                gpath = pending_groupby[1] if pending_groupby else path
                pending_groupby = None
                self.trace_aggregate(groupby, gpath, t, f"{path}/rollup")
            elif isinstance(t, TBinBy):
                self.trace_binby(t, f"{path}/binby")
            elif isinstance(t, TJoin):
                self.trace_join(t, f"{path}/join", aliases)
            elif isinstance(t, TOrderBy):
                self.trace_orderby(t, f"{path}/orderby")
            elif isinstance(t, TLimit):
                self.steps.append(LimitStep(t.n))
        if pending_groupby is not None:
            self.error(pending_groupby[1], "groupby must be immediately followed by rollup")

        unused = set(aliases) - set(self.joined)
        for i, src in enumerate(spec.sources):
            if src.alias in unused:
                path = f"/source/{i}" if len(spec.sources) > 1 else "/source"
                self.error(path, f"source {src.alias!r} is never joined")

        self.trace_representation()

    def trace_filter(self, t: TFilter, path: str) -> None:
        col = self.find(t.field)
        if col is None:
            self.error(f"{path}/filter/field", f"unknown field {t.field!r}")
            return
        opath = f"{path}/filter/operand"
        if t.op == "range" and col.kind != "quantitative":
            self.error(opath, f"range requires a quantitative field; {t.field!r} is {col.kind}")
            return
        if t.op == "eq":
            if col.kind == "quantitative" and not _is_number(t.operand):
                self.error(opath, "quantitative eq requires a number")
                return
            if col.kind == "nominal" and not isinstance(t.operand, str):
                self.error(opath, "nominal eq requires a string")
                return
        if t.op == "in":
            want = _is_number if col.kind == "quantitative" else lambda v: isinstance(v, str)
            if not all(want(v) for v in t.operand):
                self.error(opath, f"in-list values must match the {col.kind} field")
                return
        self.steps.append(FilterStep(t.field, t.op, t.operand))

    def trace_aggregate(self, groupby: TGroupBy | None, gpath: str,
                        rollup: TRollup, rpath: str) -> None:
        group_cols: list[Column] = []
        ok = True
        if groupby is not None:
            seen = set()
            for j, name in enumerate(groupby.fields):
                col = self.find(name)
                if col is None:
                    self.error(f"{gpath}/fields/{j}", f"unknown field {name!r}")
                    ok = False
                elif name in seen:
                    self.error(f"{gpath}/fields/{j}", f"duplicate group field {name!r}")
                    ok = False
                else:
                    seen.add(name)
                    group_cols.append(col)
        outputs: list[tuple[str, str, str | None]] = []
        out_cols: list[Column] = []
        taken = {c.name for c in group_cols}
        for out in rollup.outputs:
            opath = f"{rpath}/outputs/{out.name}"
            if out.name in taken:
                self.error(opath, f"output name {out.name!r} collides")
                ok = False
                continue
            taken.add(out.name)
            if out.op == "count":
                outputs.append((out.name, "count", None))
            else:
                col = self.find(out.field)
                if col is None:
                    self.error(f"{opath}/field", f"unknown field {out.field!r}")
                    ok = False
                    continue
                if col.kind != "quantitative":
                    self.error(f"{opath}/field",
                               f"{out.op} requires a quantitative field; "
                               f"{out.field!r} is {col.kind}")
                    ok = False
                    continue
                outputs.append((out.name, out.op, out.field))
            out_cols.append(Column(out.name, "quantitative", None))
        if not ok:
            return
        self.steps.append(AggregateStep(tuple(c.name for c in group_cols), tuple(outputs)))
        self.columns = group_cols + out_cols

    def trace_binby(self, t: TBinBy, path: str) -> None:
        col = self.find(t.field)
        if col is None:
            self.error(f"{path}/field", f"unknown field {t.field!r}")
            return
        if col.kind != "quantitative":
            self.error(f"{path}/field", f"binby requires quantitative; {t.field!r} is {col.kind}")
            return
        if col.origin is None or col.origin[0] != "raw":
            self.error(f"{path}/field", "binby requires an unaggregated source field")
            return
        if self.find(t.output) is not None:
            self.error(f"{path}/output", f"output name {t.output!r} collides")
            return
        _, _, entity, field = col.origin
        self.steps.append(BinStep(t.field, t.output, entity, field, t.bin_count))
        self.columns.append(Column(t.output, "nominal", ("bin", entity, field)))

    def trace_join(self, t: TJoin, path: str, aliases: dict[str, Source]) -> None:
        for key, alias in (("left", t.left), ("right", t.right)):
            if alias not in aliases:
                self.error(f"{path}/{key}", f"unknown source alias {alias!r}")
                return
        rel = self.schema.relation(t.parent, t.child)
        if rel is None:
            self.error(f"{path}/relation",
                       f"no declared relation between {t.parent!r} and {t.child!r}")
            return
        pair = {aliases[t.left].entity, aliases[t.right].entity}
        if pair != {t.parent, t.child}:
            self.error(f"{path}/relation", "relation does not connect the joined sources")
            return
        in_pipe = [a for a in (t.left, t.right) if a in self.joined]
        if len(in_pipe) != 1:
            which = "both" if len(in_pipe) == 2 else "neither"
            self.error(path, f"{which} sides of the join are already in the pipeline")
            return
        incoming_alias = t.right if in_pipe == [t.left] else t.left
        incoming = aliases[incoming_alias].entity
        incoming_is_child = incoming == t.child
        if incoming_is_child:
            pipe_alias = in_pipe[0]
            key_field = self.schema.entity(t.parent).key
            pipe_col = self.find_origin(pipe_alias, t.parent, key_field)
            if pipe_col is None:
                self.error(path, f"parent key column {key_field!r} is not available to join on")
                return
        else:
            pipe_alias = in_pipe[0]
            pipe_col = self.find_origin(pipe_alias, t.child, rel.foreign_key)
            if pipe_col is None:
                self.error(path,
                           f"foreign-key column {rel.foreign_key!r} is not available to join on")
                return

        incoming_fields = self.schema.entity(incoming).fields
        existing_names = {c.name for c in self.columns}
        incoming_names = {f.name for f in incoming_fields}
        renames: list[tuple[str, str]] = []
        new_columns: list[Column] = []
        for col in self.columns:
            if col.name in incoming_names and col.origin and col.origin[0] == "raw":
                new_name = f"{col.origin[1]}.{col.origin[3]}"
                renames.append((col.name, new_name))
                new_columns.append(replace(col, name=new_name))
            else:
                new_columns.append(col)
        incoming_cols: list[tuple[str, str]] = []
        for fdef in incoming_fields:
            name = fdef.name if fdef.name not in existing_names else f"{incoming_alias}.{fdef.name}"
            incoming_cols.append((name, fdef.name))
            new_columns.append(Column(
                name, _kind_of(fdef.kind), ("raw", incoming_alias, incoming, fdef.name)
            ))
        pipe_col_name = dict(renames).get(pipe_col.name, pipe_col.name)
        self.steps.append(JoinStep(
            incoming, incoming_alias, incoming_is_child, rel.foreign_key,
            pipe_col_name, tuple(renames), tuple(incoming_cols),
        ))
        self.columns = new_columns
        self.joined[incoming_alias] = incoming

    def find_origin(self, alias: str, entity: str, field: str) -> Column | None:
        for col in self.columns:
            if col.origin == ("raw", alias, entity, field):
                return col
        return None

    def trace_orderby(self, t: TOrderBy, path: str) -> None:
        if self.find(t.field) is None:
            self.error(f"{path}/field", f"unknown field {t.field!r}")
            return
        self.steps.append(OrderStep(t.field, t.descending))

    def trace_representation(self) -> None:
        repr_ = self.spec.representation
        if isinstance(repr_, TableRepr):
            for i, col in enumerate(repr_.columns):
                if self.find(col.field) is None:
                    self.error(f"/representation/columns/{i}/field",
                               f"unknown field {col.field!r}")
            return
        for i, m in enumerate(repr_.mapping):
            col = self.find(m.field)
            if col is None:
                self.error(f"/representation/mapping/{i}/field", f"unknown field {m.field!r}")
                continue
            if col.kind != m.value_kind:
                self.error(f"/representation/mapping/{i}/value_kind",
                           f"{m.field!r} is {col.kind}, not {m.value_kind}")


def validate_against_schema(spec: ViewSpec, schema: SchemaDef) -> list[tuple[str, str]]:
    """Semantic checks a parsed spec must pass before compilation."""
    tracer = _Tracer(spec, schema)
    tracer.run()
    return tracer.errors


def compile_spec(spec: ViewSpec, schema: SchemaDef) -> Plan:
    """Lower a validated spec to an executable Plan."""
    tracer = _Tracer(spec, schema)
    tracer.run()
    if tracer.errors:
        raise SpecError(tracer.errors)
    by_name = {c.name: c for c in tracer.columns}
    if isinstance(spec.representation, TableRepr):
        project = [c.field for c in spec.representation.columns]
    else:
        project = []
        for m in spec.representation.mapping:
            if m.field not in project:
                project.append(m.field)
    output_columns = tuple((name, by_name[name].kind) for name in project)
    return Plan(
        base_entity=tracer.base_entity,
        entities=tuple(dict.fromkeys(tracer.joined.values())),
        steps=tuple(tracer.steps),
        project=tuple(project),
        output_columns=output_columns,
    )


# -- interactivity ----------------------------------------------------------


def inject_interactivity(spec: ViewSpec, schema: SchemaDef) -> tuple[ViewSpec, SelectionDecl]:
    """Attach the deterministic linked-selection declaration to a valid spec.

    Every field of the input spec is preserved unchanged; the result gains
    an interactivity block and executes against global visibility. The
    selection kind follows a fixed rule table over the representation and
    the provenance of its fields, so identical specs always link the same
    way.
    """
    tracer = _Tracer(spec, schema)
    tracer.run()
    if tracer.errors:
        raise SpecError(tracer.errors)
    selection = _choose_selection(spec, tracer, schema)
    linked = replace(spec, interactivity=Interactivity(selection, True))
    return linked, selection


def _choose_selection(spec: ViewSpec, tracer: _Tracer, schema: SchemaDef) -> SelectionDecl:
    base_entity = tracer.base_entity
    pk = (base_entity, schema.entity(base_entity).key)
    repr_ = spec.representation
    if isinstance(repr_, TableRepr):
        return SelectionDecl("", "point", (pk,))

    by_encoding = {m.encoding: m for m in repr_.mapping}
    cols = {m.encoding: tracer.find(m.field) for m in repr_.mapping}

    def raw_quant(encoding: str) -> tuple[str, str] | None:
        col = cols.get(encoding)
        if col and col.origin and col.origin[0] == "raw" and col.kind == "quantitative":
            return col.origin[2], col.origin[3]
        return None

    def raw_nominal(encoding: str) -> tuple[str, str] | None:
        col = cols.get(encoding)
        if col and col.origin and col.origin[0] == "raw" and col.kind == "nominal":
            entity, field = col.origin[2], col.origin[3]
            if schema.entity(entity).field_def(field).kind == "categorical":
                return entity, field
        return None

    def binned(encoding: str) -> tuple[str, str] | None:
        col = cols.get(encoding)
        if col and col.origin and col.origin[0] == "bin":
            return col.origin[1], col.origin[2]
        return None

    if repr_.mark == "point":
        tx, ty = raw_quant("x"), raw_quant("y")
        if (by_encoding.get("x") and by_encoding.get("y")
                and by_encoding["x"].value_kind == "quantitative"
                and by_encoding["y"].value_kind == "quantitative"
                and tx and ty):
            return SelectionDecl("", "interval_2d", (tx, ty))
    if repr_.mark in ("bar", "rect"):
        for encoding in ("x", "y"):
            target = raw_nominal(encoding)
            if target:
                return SelectionDecl("", "point", (target,))
    for encoding in ("x", "y"):
        target = binned(encoding)
        if target:
            return SelectionDecl("", "interval_1d", (target,))
    if repr_.mark == "line":
        target = raw_quant("x")
        if target:
            return SelectionDecl("", "interval_1d", (target,))
    return SelectionDecl("", "point", (pk,))
