"""Multi-agent message handling: routing, filter synthesis, spec synthesis.

A backend is anything with complete(instructions, user_message, output_schema)
returning a structured document. Model output is never trusted: every
document is validated against the dataset schema, invalid output triggers a
bounded retry with the validation errors appended, and exhausted retries
raise without touching session state.
"""

from __future__ import annotations

import json
from copy import deepcopy
from dataclasses import dataclass
from importlib import resources as importlib_resources
from pathlib import Path

import requests

from .filters import FilterState
from .grammar import SpecError, ViewSpec, parse_spec, validate_against_schema
from .schema import SchemaDef
from .store import DatasetStore, summarize_fields

RETRIES = 2
HISTORY_TURNS = 10


class BackendError(Exception):
    """The backend could not produce any structured document."""


class AgentError(Exception):
    """The backend produced documents, but none survived validation."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(errors))


ROUTE_SCHEMA = {
    "title": "agent_route",
    "type": "object",
    "additionalProperties": False,
    "required": ["needs_filter", "needs_visualization", "rationale"],
    "properties": {
        "needs_filter": {"type": "boolean"},
        "needs_visualization": {"type": "boolean"},
        "rationale": {"type": "string"},
    },
}

FILTER_SCHEMA = {
    "title": "filter_action",
    "type": "object",
    "additionalProperties": False,
    "required": ["filters"],
    "properties": {
        "filters": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind", "entity", "field"],
                "properties": {
                    "kind": {"enum": ["interval", "point"]},
                    "entity": {"type": "string"},
                    "field": {"type": "string"},
                    "min": {"type": "number"},
                    "max": {"type": "number"},
                    "values": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "update": {"type": "string"},
                },
                "allOf": [
                    {"if": {"properties": {"kind": {"const": "interval"}}},
                     "then": {"required": ["min", "max"]}},
                    {"if": {"properties": {"kind": {"const": "point"}}},
                     "then": {"required": ["values"]}},
                ],
            },
        },
    },
}


def view_spec_schema() -> dict:
    """The published grammar contract for visualization agent outputs."""
    text = importlib_resources.files("udi.resources").joinpath(
        "view_spec.schema.json").read_text()
    return json.loads(text)


def viz_schema() -> dict:
    spec_schema = view_spec_schema()
    spec_schema.pop("$schema", None)
    spec_schema.pop("title", None)
    return {
        "title": "viz_action",
        "type": "object",
        "additionalProperties": False,
        "required": ["spec"],
        "properties": {"spec": spec_schema, "caption": {"type": "string"}},
    }


ROUTE_INSTRUCTIONS = (
    "You orchestrate a biomedical data discovery session. Decide whether the "
    "user's message asks to filter the data, to create a visualization or "
    "table, or both. If it asks for neither, set both flags false and explain "
    "in the rationale."
)
FILTER_INSTRUCTIONS = (
    "Translate the user's request into interval filters on quantitative "
    "fields or point filters on categorical fields. Ground every bound in "
    "the field ranges listed below; never invent fields or categories. To "
    "change an existing filter, reference its id in \"update\"."
)
VIZ_INSTRUCTIONS = (
    "Translate the user's request into one visualization spec conforming to "
    "the output schema. Use only the entities and fields listed below."
)


@dataclass(frozen=True)
class AgentContext:
    """Everything an agent may see: rendered data description and state."""

    text: str
    schema: SchemaDef
    state: FilterState


@dataclass(frozen=True)
class AgentRoute:
    needs_filter: bool
    needs_visualization: bool
    rationale: str


@dataclass(frozen=True)
class FilterAction:
    """Validated filter payloads in wire format, ready for the session."""

    payloads: tuple[dict, ...]


@dataclass(frozen=True)
class VizAction:
    spec: ViewSpec
    caption: str


def build_context(schema: SchemaDef, store: DatasetStore, state: FilterState,
                  history: list[str], cardinality_cap: int = 50) -> AgentContext:
    """Render schema, field summaries, filters, and recent turns as text.

    Identifier fields and categorical fields above the cardinality cap are
    never included, keeping the context small and un-spoofable.
    """
    summaries = summarize_fields(store, cardinality_cap)
    by_entity: dict[str, list[str]] = {}
    for s in summaries:
        if s.kind == "quantitative":
            unit = f" {s.unit}" if s.unit else ""
            desc = f"{s.field}: quantitative {_num(s.min)}..{_num(s.max)}{unit}"
        else:
            desc = f"{s.field}: categorical {{{', '.join(s.values)}}}"
        by_entity.setdefault(s.entity, []).append(desc)

    lines = ["Entities and fields:"]
    for entity in schema.entities:
        lines.append(f"- {entity.name}")
        for desc in by_entity.get(entity.name, []):
            lines.append(f"  - {desc}")
    lines.append("Relations:")
    for rel in schema.relations:
        lines.append(f"- {rel.parent} -> {rel.child} (via {rel.foreign_key})")
    lines.append("Active filters:")
    if state.filters:
        for f in state.filters:
            lines.append(f"- {_describe_wire(f.to_wire())} (id {f.id})")
    else:
        lines.append("- (none)")
    lines.append("Recent conversation:")
    if history:
        for turn in history[-HISTORY_TURNS:]:
            lines.append(f"- {turn}")
    else:
        lines.append("- (none)")
    return AgentContext("\n".join(lines), schema, state)


def _num(v) -> str:
    return format(v, "g") if v is not None else "?"


def _describe_wire(payload: dict) -> str:
    name = f"{payload['entity']}.{payload['field']}"
    if payload.get("kind") == "interval" or "min" in payload:
        return f"{name} in [{_num(payload['min'])}, {_num(payload['max'])}]"
    return f"{name} in {{{', '.join(sorted(payload['values']))}}}"


def _complete_validated(backend, instructions: str, message: str,
                        output_schema: dict, validate, retries: int = RETRIES):
    prompt = instructions
    errors: list[str] = ["backend produced no output"]
    for _ in range(retries + 1):
        doc = backend.complete(prompt, message, output_schema)
        result, errors = validate(doc)
        if not errors:
            return result
        prompt = instructions + "\nYour previous output was invalid:\n" + \
            "\n".join(f"- {e}" for e in errors)
    raise AgentError(errors)


def route(message: str, context: AgentContext, backend) -> AgentRoute:
    """Ask the orchestrator whether to filter, visualize, both, or neither."""

    def validate(doc):
        if not isinstance(doc, dict):
            return None, ["route must be an object"]
        errors = []
        for key in ("needs_filter", "needs_visualization"):
            if not isinstance(doc.get(key), bool):
                errors.append(f"{key} must be a boolean")
        rationale = doc.get("rationale", "")
        if not isinstance(rationale, str):
            errors.append("rationale must be a string")
        if errors:
            return None, errors
        if not doc["needs_filter"] and not doc["needs_visualization"] and not rationale:
            return None, ["conversational-only route requires a rationale"]
        return AgentRoute(doc["needs_filter"], doc["needs_visualization"], rationale), []

    instructions = f"{ROUTE_INSTRUCTIONS}\n\n{context.text}"
    return _complete_validated(backend, instructions, message, ROUTE_SCHEMA, validate)


def _validate_filter_payload(payload, schema: SchemaDef, state: FilterState) -> list[str]:
    if not isinstance(payload, dict):
        return ["filter payload must be an object"]
    kind = payload.get("kind")
    if kind not in ("interval", "point"):
        return [f"unknown filter kind {kind!r}"]
    entity = schema.entity(payload.get("entity", ""))
    if entity is None:
        return [f"unknown entity {payload.get('entity')!r}"]
    fdef = entity.field_def(payload.get("field", ""))
    if fdef is None:
        return [f"unknown field {payload.get('field')!r} on entity {entity.name!r}"]
    errors = []
    if kind == "interval":
        if fdef.kind != "quantitative":
            errors.append(f"interval filter requires a quantitative field; "
                          f"{entity.name}.{fdef.name} is {fdef.kind}")
        lo, hi = payload.get("min"), payload.get("max")
        if not isinstance(lo, (int, float)) or not isinstance(hi, (int, float)):
            errors.append("interval filter requires numeric min and max")
        elif lo > hi:
            errors.append(f"invalid bounds: min {lo} > max {hi}")
    else:
        if fdef.kind != "categorical":
            errors.append(f"point filter requires a categorical field; "
                          f"{entity.name}.{fdef.name} is {fdef.kind}")
        values = payload.get("values")
        if (not isinstance(values, list) or not values
                or not all(isinstance(v, str) for v in values)):
            errors.append("point filter requires a non-empty list of category strings")
    update = payload.get("update")
    if update is not None:
        existing = state.get(update)
        if existing is None:
            errors.append(f"no filter with id {update!r} to update")
        elif existing.to_wire()["kind"] != kind:
            errors.append(f"filter {update!r} is not a {kind} filter")
    extra = set(payload) - {"kind", "entity", "field", "min", "max", "values", "update"}
    for key in sorted(extra):
        errors.append(f"unknown key {key!r} in filter payload")
    return errors


def run_filter_agent(message: str, context: AgentContext, backend) -> FilterAction:
    """Produce validated filter payloads for the session to apply."""

    def validate(doc):
        if not isinstance(doc, dict) or not isinstance(doc.get("filters"), list) \
                or not doc["filters"]:
            return None, ["output must contain a non-empty \"filters\" list"]
        errors: list[str] = []
        for payload in doc["filters"]:
            errors.extend(_validate_filter_payload(payload, context.schema, context.state))
        if errors:
            return None, errors
        return FilterAction(tuple(deepcopy(p) for p in doc["filters"])), []

    instructions = f"{FILTER_INSTRUCTIONS}\n\n{context.text}"
    return _complete_validated(backend, instructions, message, FILTER_SCHEMA, validate)


def run_viz_agent(message: str, context: AgentContext, backend) -> VizAction:
    """Produce a parsed, schema-valid visualization spec."""

    def validate(doc):
        if not isinstance(doc, dict) or "spec" not in doc:
            return None, ["output must contain a \"spec\" document"]
        if isinstance(doc["spec"], dict) and "interactivity" in doc["spec"]:
            return None, ["\"interactivity\" is system-injected and must not be generated"]
        try:
            spec = parse_spec(doc["spec"])
        except SpecError as e:
            return None, [f"{path}: {msg}" for path, msg in e.errors]
        errors = validate_against_schema(spec, context.schema)
        if errors:
            return None, [f"{path}: {msg}" for path, msg in errors]
        caption = doc.get("caption") or message
        if not isinstance(caption, str):
            return None, ["caption must be a string"]
        return VizAction(spec, caption), []

    instructions = f"{VIZ_INSTRUCTIONS}\n\n{context.text}"
    return _complete_validated(backend, instructions, message, viz_schema(), validate)


class ScriptedBackend:
    """Deterministic test double: canned responses keyed by message substrings.

    The script is a list of {match, route, filter_action?, viz_action?}
    entries; the first entry whose match occurs case-insensitively in the
    user message wins. Messages matching nothing get a conversational-only
    route.
    """

    def __init__(self, script: list[dict] | str | Path):
        if isinstance(script, (str, Path)):
            script = json.loads(Path(script).read_text())
        self.script = script

    def _entry(self, user_message: str) -> dict | None:
        lowered = user_message.lower()
        for entry in self.script:
            if entry["match"].lower() in lowered:
                return entry
        return None

    def complete(self, instructions: str, user_message: str, output_schema: dict):
        title = output_schema.get("title")
        entry = self._entry(user_message)
        if title == "agent_route":
            if entry is not None and "route" in entry:
                return deepcopy(entry["route"])
            return {"needs_filter": False, "needs_visualization": False,
                    "rationale": "no data action requested"}
        if title == "filter_action":
            return deepcopy(entry.get("filter_action", {})) if entry else {}
        if title == "viz_action":
            return deepcopy(entry.get("viz_action", {})) if entry else {}
        raise BackendError(f"unsupported output schema {title!r}")


class RemoteBackend:
    """Chat-completions-style HTTP endpoint with schema-constrained output."""

    def __init__(self, url: str, key: str | None = None, model: str | None = None,
                 timeout: float = 60.0):
        self.url = url
        self.key = key
        self.model = model
        self.timeout = timeout

    def complete(self, instructions: str, user_message: str, output_schema: dict):
        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        body = {
            "messages": [
                {"role": "system", "content": instructions},
                {"role": "user", "content": user_message},
            ],
            "response_format": {
                "type": "json_schema",
                "json_schema": {
                    "name": output_schema.get("title", "output"),
                    "schema": output_schema,
                    "strict": True,
                },
            },
        }
        if self.model:
            body["model"] = self.model
        try:
            response = requests.post(self.url, json=body, headers=headers,
                                     timeout=self.timeout)
        except requests.RequestException as e:
            raise BackendError(f"backend unreachable: {e}") from e
        if response.status_code != 200:
            raise BackendError(f"backend returned {response.status_code}")
        try:
            content = response.json()["choices"][0]["message"]["content"]
            return json.loads(content)
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise BackendError(f"malformed backend response: {e}") from e


def backend_from_env(role: str, environ) -> RemoteBackend:
    """Build a RemoteBackend for "router" or "viz" from environment variables."""
    prefix = {"router": "ROUTER", "viz": "VIZ"}[role]
    url = environ.get(f"UDI_{prefix}_URL")
    if not url:
        raise BackendError(f"UDI_{prefix}_URL is not set")
    return RemoteBackend(
        url,
        key=environ.get(f"UDI_{prefix}_KEY"),
        model=environ.get(f"UDI_MODEL_{prefix}"),
    )
