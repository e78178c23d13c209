import json

import pytest

from udi import agents
from udi.agents import (
    RETRIES,
    AgentError,
    BackendError,
    RemoteBackend,
    ScriptedBackend,
    backend_from_env,
    build_context,
    route,
    run_filter_agent,
    run_viz_agent,
    view_spec_schema,
    viz_schema,
)
from udi.filters import FilterSource, FilterState, IntervalFilter

TABLE_SPEC = {
    "source": {"name": "d", "entity": "donors"},
    "representation": {"type": "table", "columns": [{"field": "id"}]},
}


class SequenceBackend:
    """Feeds canned documents in order and records every prompt."""

    def __init__(self, docs):
        self.docs = list(docs)
        self.prompts = []
        self.schemas = []

    def complete(self, instructions, user_message, output_schema):
        self.prompts.append(instructions)
        self.schemas.append(output_schema)
        if not self.docs:
            raise BackendError("script exhausted")
        return self.docs.pop(0)


def context_for(desk_schema, desk_store, state=None, history=()):
    return build_context(desk_schema, desk_store, state or FilterState(),
                         list(history))


# -- context rendering --------------------------------------------------------


def test_context_lists_fields_with_summaries(desk_schema, desk_store):
    text = context_for(desk_schema, desk_store).text
    lines = text.splitlines()
    assert lines[0] == "Entities and fields:"
    assert "- donors" in lines
    assert "  - age: quantitative 17..67 years" in lines
    assert "  - sex: categorical {F, M}" in lines
    assert "  - assay: categorical {ATAC-seq, CODEX, RNA-seq}" in lines
    assert "- donors -> samples (via donor_id)" in lines
    assert "- samples -> datasets (via sample_id)" in lines
    assert "- (none)" in lines


def test_context_excludes_identifier_fields(desk_schema, desk_store):
    text = context_for(desk_schema, desk_store).text
    assert "id:" not in text
    assert "donor_id:" not in text


def test_context_shows_active_filters(desk_schema, desk_store):
    state = FilterState().with_added(
        IntervalFilter("f1", "donors", "age", 18, 67,
                       FilterSource("agent", message=1)),
        desk_schema)
    text = context_for(desk_schema, desk_store, state).text
    assert "- donors.age in [18, 67] (id f1)" in text


def test_context_keeps_last_ten_turns(desk_schema, desk_store):
    history = [f"user: turn {i}" for i in range(14)]
    text = context_for(desk_schema, desk_store, history=history).text
    assert "- user: turn 13" in text
    assert "- user: turn 4" in text
    assert "turn 3" not in text


# -- routing ------------------------------------------------------------------


def test_route_happy_path(desk_schema, desk_store):
    backend = SequenceBackend([
        {"needs_filter": True, "needs_visualization": False, "rationale": "filter"}])
    result = route("filter to adults", context_for(desk_schema, desk_store), backend)
    assert result.needs_filter and not result.needs_visualization
    assert backend.schemas[0]["title"] == "agent_route"


def test_route_retries_with_error_feedback(desk_schema, desk_store):
    backend = SequenceBackend([
        {"needs_filter": "yes", "needs_visualization": False, "rationale": ""},
        {"needs_filter": True, "needs_visualization": False, "rationale": "r"},
    ])
    result = route("filter", context_for(desk_schema, desk_store), backend)
    assert result.needs_filter
    assert len(backend.prompts) == 2
    assert "Your previous output was invalid" in backend.prompts[1]
    assert "needs_filter must be a boolean" in backend.prompts[1]
    # the original instructions survive in the retry prompt
    assert backend.prompts[1].startswith(backend.prompts[0].split("\n")[0])


def test_route_gives_up_after_bounded_retries(desk_schema, desk_store):
    bad = {"needs_filter": 1, "needs_visualization": 2, "rationale": ""}
    backend = SequenceBackend([bad] * (RETRIES + 5))
    with pytest.raises(AgentError):
        route("filter", context_for(desk_schema, desk_store), backend)
    assert len(backend.prompts) == RETRIES + 1


def test_conversational_route_needs_rationale(desk_schema, desk_store):
    backend = SequenceBackend([
        {"needs_filter": False, "needs_visualization": False, "rationale": ""},
        {"needs_filter": False, "needs_visualization": False, "rationale": "chat"},
    ])
    result = route("hello", context_for(desk_schema, desk_store), backend)
    assert result.rationale == "chat"
    assert len(backend.prompts) == 2


# -- filter agent -------------------------------------------------------------


def test_filter_agent_happy_path(desk_schema, desk_store):
    backend = SequenceBackend([{"filters": [
        {"kind": "interval", "entity": "donors", "field": "age",
         "min": 18, "max": 67}]}])
    action = run_filter_agent("adults", context_for(desk_schema, desk_store), backend)
    assert action.payloads[0]["min"] == 18
    assert backend.schemas[0]["title"] == "filter_action"


@pytest.mark.parametrize("payload,needle", [
    ({"kind": "interval", "entity": "donors", "field": "agee",
      "min": 1, "max": 2}, "unknown field 'agee'"),
    ({"kind": "interval", "entity": "people", "field": "age",
      "min": 1, "max": 2}, "unknown entity 'people'"),
    ({"kind": "interval", "entity": "donors", "field": "age",
      "min": 90, "max": 18}, "min 90 > max 18"),
    ({"kind": "interval", "entity": "donors", "field": "sex",
      "min": 1, "max": 2}, "requires a quantitative field"),
    ({"kind": "point", "entity": "donors", "field": "age",
      "values": ["x"]}, "requires a categorical field"),
    ({"kind": "point", "entity": "donors", "field": "id",
      "values": ["D1"]}, "donors.id is identifier"),
    ({"kind": "point", "entity": "donors", "field": "sex",
      "values": []}, "non-empty list"),
    ({"kind": "scope", "entity": "donors", "field": "sex",
      "values": ["F"]}, "unknown filter kind"),
    ({"kind": "point", "entity": "donors", "field": "sex",
      "values": ["F"], "color": "red"}, "unknown key 'color'"),
    ({"kind": "interval", "entity": "donors", "field": "age",
      "min": 1, "max": 2, "update": "f9"}, "no filter with id 'f9'"),
])
def test_filter_agent_rejects_bad_payloads(desk_schema, desk_store, payload, needle):
    backend = SequenceBackend([{"filters": [payload]}] * (RETRIES + 1))
    with pytest.raises(AgentError) as exc:
        run_filter_agent("x", context_for(desk_schema, desk_store), backend)
    assert needle in str(exc.value)


def test_filter_agent_update_must_match_kind(desk_schema, desk_store):
    state = FilterState().with_added(
        IntervalFilter("f1", "donors", "age", 18, 67,
                       FilterSource("agent", message=1)),
        desk_schema)
    context = build_context(desk_schema, desk_store, state, [])
    backend = SequenceBackend([{"filters": [
        {"kind": "point", "entity": "donors", "field": "sex",
         "values": ["F"], "update": "f1"}]}] * (RETRIES + 1))
    with pytest.raises(AgentError) as exc:
        run_filter_agent("x", context, backend)
    assert "'f1' is not a point filter" in str(exc.value)


def test_filter_agent_recovers_on_retry(desk_schema, desk_store):
    backend = SequenceBackend([
        {"filters": [{"kind": "interval", "entity": "donors",
                      "field": "agee", "min": 1, "max": 2}]},
        {"filters": [{"kind": "interval", "entity": "donors",
                      "field": "age", "min": 18, "max": 67}]},
    ])
    action = run_filter_agent("adults", context_for(desk_schema, desk_store), backend)
    assert action.payloads[0]["field"] == "age"
    assert "unknown field 'agee'" in backend.prompts[1]


# -- viz agent ----------------------------------------------------------------


def test_viz_agent_happy_path(desk_schema, desk_store):
    backend = SequenceBackend([{"spec": TABLE_SPEC, "caption": "All donors"}])
    action = run_viz_agent("show donors", context_for(desk_schema, desk_store), backend)
    assert action.caption == "All donors"
    assert action.spec.sources[0].entity == "donors"
    assert backend.schemas[0]["title"] == "viz_action"


def test_viz_agent_caption_defaults_to_message(desk_schema, desk_store):
    backend = SequenceBackend([{"spec": TABLE_SPEC}])
    action = run_viz_agent("show donors", context_for(desk_schema, desk_store), backend)
    assert action.caption == "show donors"


def test_viz_agent_rejects_interactivity(desk_schema, desk_store):
    doc = dict(TABLE_SPEC)
    doc["interactivity"] = {"selection": {"view": "v9", "kind": "point",
                                          "targets": [{"entity": "donors",
                                                       "field": "id"}]}}
    backend = SequenceBackend([{"spec": doc}] * (RETRIES + 1))
    with pytest.raises(AgentError) as exc:
        run_viz_agent("x", context_for(desk_schema, desk_store), backend)
    assert "system-injected" in str(exc.value)


def test_viz_agent_reports_paths_on_retry(desk_schema, desk_store):
    bad = {"spec": {"source": {"name": "d", "entity": "donors"},
                    "representation": {"mark": "pie", "mapping": []}}}
    backend = SequenceBackend([bad, {"spec": TABLE_SPEC}])
    action = run_viz_agent("x", context_for(desk_schema, desk_store), backend)
    assert action.spec.representation is not None
    assert "/representation/mark" in backend.prompts[1]


def test_viz_agent_semantic_errors_use_paths(desk_schema, desk_store):
    bad = {"spec": {"source": {"name": "d", "entity": "patients"},
                    "representation": {"type": "table",
                                       "columns": [{"field": "id"}]}}}
    backend = SequenceBackend([bad] * (RETRIES + 1))
    with pytest.raises(AgentError) as exc:
        run_viz_agent("x", context_for(desk_schema, desk_store), backend)
    assert "/source/entity: unknown entity 'patients'" in str(exc.value)


def test_viz_output_schema_has_no_interactivity():
    spec_schema = view_spec_schema()
    assert "interactivity" not in spec_schema["properties"]
    wrapped = viz_schema()
    assert wrapped["title"] == "viz_action"
    assert "interactivity" not in wrapped["properties"]["spec"]["properties"]


# -- scripted backend ---------------------------------------------------------


def test_scripted_backend_matches_substring_case_insensitively():
    backend = ScriptedBackend([
        {"match": "ADULTS",
         "route": {"needs_filter": True, "needs_visualization": False,
                   "rationale": "r"},
         "filter_action": {"filters": [
             {"kind": "interval", "entity": "donors", "field": "age",
              "min": 18, "max": 67}]}},
    ])
    doc = backend.complete("i", "please filter to adults now",
                           {"title": "agent_route"})
    assert doc["needs_filter"] is True
    doc = backend.complete("i", "Filter To Adults", {"title": "filter_action"})
    assert doc["filters"][0]["field"] == "age"


def test_scripted_backend_first_match_wins():
    backend = ScriptedBackend([
        {"match": "donor", "route": {"needs_filter": False,
                                     "needs_visualization": True,
                                     "rationale": "first"}},
        {"match": "donor data", "route": {"needs_filter": False,
                                          "needs_visualization": True,
                                          "rationale": "second"}},
    ])
    doc = backend.complete("i", "show donor data", {"title": "agent_route"})
    assert doc["rationale"] == "first"


def test_scripted_backend_default_route_is_conversational():
    backend = ScriptedBackend([])
    doc = backend.complete("i", "how are you?", {"title": "agent_route"})
    assert doc == {"needs_filter": False, "needs_visualization": False,
                   "rationale": "no data action requested"}


def test_scripted_backend_returns_fresh_copies():
    entry = {"match": "x", "filter_action": {"filters": [
        {"kind": "interval", "entity": "donors", "field": "age",
         "min": 1, "max": 2}]}}
    backend = ScriptedBackend([entry])
    first = backend.complete("i", "x", {"title": "filter_action"})
    first["filters"][0]["min"] = 99
    second = backend.complete("i", "x", {"title": "filter_action"})
    assert second["filters"][0]["min"] == 1


def test_scripted_backend_loads_from_path(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps([{"match": "hi", "route": {
        "needs_filter": False, "needs_visualization": False,
        "rationale": "greeting"}}]))
    backend = ScriptedBackend(path)
    doc = backend.complete("i", "hi there", {"title": "agent_route"})
    assert doc["rationale"] == "greeting"


def test_scripted_backend_rejects_unknown_schema():
    with pytest.raises(BackendError):
        ScriptedBackend([]).complete("i", "x", {"title": "mystery"})


# -- remote backend -----------------------------------------------------------


class FakeResponse:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload

    def json(self):
        return self._payload


def test_remote_backend_request_shape(monkeypatch):
    calls = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        calls["url"] = url
        calls["body"] = json
        calls["headers"] = headers
        content = {"choices": [{"message": {"content": "{\"ok\": true}"}}]}
        return FakeResponse(200, content)

    monkeypatch.setattr(agents.requests, "post", fake_post)
    backend = RemoteBackend("http://backend/v1/chat", key="secret", model="m1")
    doc = backend.complete("do the thing", "user message",
                           {"title": "agent_route", "type": "object"})
    assert doc == {"ok": True}
    assert calls["url"] == "http://backend/v1/chat"
    assert calls["headers"]["Authorization"] == "Bearer secret"
    assert calls["body"]["model"] == "m1"
    assert calls["body"]["messages"][0] == {"role": "system",
                                            "content": "do the thing"}
    assert calls["body"]["messages"][1]["content"] == "user message"
    rf = calls["body"]["response_format"]
    assert rf["type"] == "json_schema"
    assert rf["json_schema"]["name"] == "agent_route"
    assert rf["json_schema"]["strict"] is True


def test_remote_backend_maps_failures_to_backend_error(monkeypatch):
    monkeypatch.setattr(agents.requests, "post",
                        lambda *a, **k: FakeResponse(500, {}))
    with pytest.raises(BackendError):
        RemoteBackend("http://x").complete("i", "m", {})

    monkeypatch.setattr(agents.requests, "post",
                        lambda *a, **k: FakeResponse(200, {"nope": 1}))
    with pytest.raises(BackendError):
        RemoteBackend("http://x").complete("i", "m", {})

    def boom(*a, **k):
        raise agents.requests.ConnectionError("refused")

    monkeypatch.setattr(agents.requests, "post", boom)
    with pytest.raises(BackendError):
        RemoteBackend("http://x").complete("i", "m", {})


def test_backend_from_env():
    env = {"UDI_ROUTER_URL": "http://r", "UDI_ROUTER_KEY": "rk",
           "UDI_MODEL_ROUTER": "rm", "UDI_VIZ_URL": "http://v"}
    router = backend_from_env("router", env)
    assert (router.url, router.key, router.model) == ("http://r", "rk", "rm")
    viz = backend_from_env("viz", env)
    assert (viz.url, viz.key, viz.model) == ("http://v", None, None)
    with pytest.raises(BackendError):
        backend_from_env("viz", {})
