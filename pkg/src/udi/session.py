"""Per-conversation state: chat, filters, views, selections, exports.

Every mutation produces exactly one SessionDelta with a fresh sequence
number; replaying the delta log from an empty session reconstructs the
snapshot exactly. A non-blocking lock enforces one message pipeline at a
time per session.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

from .agents import (
    AgentError,
    BackendError,
    build_context,
    route,
    run_filter_agent,
    run_viz_agent,
)
from .executor import ResultTable, execute
from .filters import (
    FilterError,
    FilterSource,
    FilterState,
    IntervalFilter,
    PointFilter,
    filter_from_wire,
    resolve_visibility,
)
from .grammar import (
    Plan,
    SelectionDecl,
    ViewSpec,
    compile_spec,
    inject_interactivity,
    parse_spec,
    serialize_spec,
)
from .schema import SchemaDef
from .store import DatasetStore

CONVERSATIONAL_REPLY = (
    "I can filter the data or add visualizations. Ask me to filter by a "
    "field, or to show a chart or table."
)


class SessionBusyError(Exception):
    """Another message pipeline is in flight for this session."""


class UnknownViewError(KeyError):
    pass


class SelectionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ChatEntry:
    role: str  # user | agent | system
    text: str
    message: int | None = None  # user-turn number this entry belongs to
    widget: str | None = None  # filter id rendered inline with this entry
    view: str | None = None

    def to_wire(self) -> dict:
        wire: dict = {"role": self.role, "text": self.text}
        if self.message is not None:
            wire["message"] = self.message
        if self.widget is not None:
            wire["widget"] = self.widget
        if self.view is not None:
            wire["view"] = self.view
        return wire

    @staticmethod
    def from_wire(doc: dict) -> "ChatEntry":
        return ChatEntry(doc["role"], doc["text"], doc.get("message"),
                         doc.get("widget"), doc.get("view"))


@dataclass
class ViewState:
    id: str
    original: ViewSpec
    injected: ViewSpec
    selection_decl: SelectionDecl
    plan: Plan
    caption: str
    created_by: int
    selection: dict | None = None

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "caption": self.caption,
            "created_by": self.created_by,
            "spec": serialize_spec(self.original),
            "injected_spec": serialize_spec(self.injected),
            "selection_decl": self.selection_decl.to_wire(),
            "selection": self.selection,
        }


@dataclass(frozen=True)
class SessionDelta:
    """One state transition: everything a client needs to catch up."""

    seq: int
    kind: str
    chat: tuple[dict, ...] = ()
    filters_added: tuple[dict, ...] = ()
    filters_updated: tuple[dict, ...] = ()
    filters_removed: tuple[str, ...] = ()
    views_added: tuple[dict, ...] = ()
    selections: tuple[dict, ...] = ()  # {"view": id, "payload": dict | None}
    refresh: tuple[str, ...] = ()

    def to_wire(self) -> dict:
        return {
            "seq": self.seq,
            "kind": self.kind,
            "chat": [dict(e) for e in self.chat],
            "filters": {
                "added": [dict(f) for f in self.filters_added],
                "updated": [dict(f) for f in self.filters_updated],
                "removed": list(self.filters_removed),
            },
            "views": [dict(v) for v in self.views_added],
            "selections": [dict(s) for s in self.selections],
            "refresh": list(self.refresh),
        }


def describe_filter(f) -> str:
    name = f"{f.entity}.{f.field}"
    if isinstance(f, IntervalFilter):
        return f"{name} in [{format(f.min, 'g')}, {format(f.max, 'g')}]"
    return f"{name} in {{{', '.join(sorted(f.values))}}}"


class Session:
    """Single-writer discovery session over one schema and store."""

    def __init__(self, session_id: str, schema: SchemaDef, store: DatasetStore,
                 router_backend, viz_backend):
        self.id = session_id
        self.schema = schema
        self.store = store
        self.router_backend = router_backend
        self.viz_backend = viz_backend
        self.seq = 0
        self.chat: list[ChatEntry] = []
        self.filter_state = FilterState()
        self.views: list[ViewState] = []
        self.message_count = 0
        self._filter_counter = 0
        self._view_counter = 0
        self._pipeline = threading.Lock()
        self._write = threading.RLock()
        # called with each delta while the write lock is held, so a server
        # can broadcast events in exactly the order mutations committed
        self.on_delta = None

    def _emit(self, delta: SessionDelta) -> SessionDelta:
        if self.on_delta is not None:
            self.on_delta(delta)
        return delta

    # -- state access --------------------------------------------------------

    def view(self, view_id: str) -> ViewState:
        for v in self.views:
            if v.id == view_id:
                return v
        raise UnknownViewError(view_id)

    def visibility(self, exclude_view: str | None = None):
        state = self.filter_state
        if exclude_view is not None:
            kept = tuple(f for f in state.filters
                         if f.source.view != exclude_view)
            if len(kept) != len(state.filters):
                state = FilterState(kept, state.version)
        return resolve_visibility(self.schema, self.store, state)

    def visible_rows(self, entity: str, offset: int = 0,
                     limit: int | None = None) -> ResultTable:
        """Page of visible rows of one entity, every declared field included."""
        entity_def = self.schema.entity(entity)
        if entity_def is None:
            raise KeyError(entity)
        table = self.store.table(entity)
        visible = self.visibility().visible[entity]
        indexes = [i for i, key in enumerate(table.row_keys) if key in visible]
        total = len(indexes)
        end = offset + limit if limit is not None else None
        page = indexes[offset:end]
        names = entity_def.field_names()
        columns = tuple(
            (f.name, "quantitative" if f.kind == "quantitative" else "nominal")
            for f in entity_def.fields
        )
        rows = tuple(
            tuple(table.columns[name][i] for name in names) for i in page
        )
        return ResultTable(columns, rows, total, self.filter_state.version)

    def view_data(self, view_id: str) -> ResultTable:
        """Execute a view's plan, excluding the view's own selection filters."""
        view = self.view(view_id)
        return execute(view.plan, self.store, self.visibility(exclude_view=view_id))

    def export_visible(self, entity: str | None = None) -> list[str]:
        """Sorted visible primary keys; defaults to the dataset entity."""
        if entity is None:
            entity = self.schema.dataset_entity().name
        if self.schema.entity(entity) is None:
            raise KeyError(entity)
        return sorted(self.visibility().visible[entity])

    def snapshot(self) -> dict:
        return {
            "session_id": self.id,
            "seq": self.seq,
            "chat": [e.to_wire() for e in self.chat],
            "filters": [f.to_wire() for f in self.filter_state.filters],
            "views": [v.to_wire() for v in self.views],
        }

    # -- mutations -----------------------------------------------------------

    def handle_message(self, text: str) -> SessionDelta:
        """Run the full agent pipeline for one user message."""
        if not self._pipeline.acquire(blocking=False):
            raise SessionBusyError(self.id)
        try:
            with self._write:
                return self._handle_message(text)
        finally:
            self._pipeline.release()

    def _handle_message(self, text: str) -> SessionDelta:
        self.message_count += 1
        msg = self.message_count
        chat: list[ChatEntry] = [ChatEntry("user", text, message=msg)]
        added: list[dict] = []
        updated: list[dict] = []
        views_added: list[dict] = []

        history = [f"{e.role}: {e.text}" for e in self.chat]
        context = build_context(self.schema, self.store, self.filter_state, history)

        agent_route = None
        try:
            agent_route = route(text, context, self.router_backend)
        except (AgentError, BackendError) as e:
            chat.append(ChatEntry("system", f"message {msg}: routing error: {e}",
                                  message=msg))

        if agent_route is not None and agent_route.needs_filter:
            try:
                action = run_filter_agent(text, context, self.router_backend)
            except (AgentError, BackendError) as e:
                chat.append(ChatEntry(
                    "system", f"message {msg}: filter agent error: {e}", message=msg))
            else:
                for payload in action.payloads:
                    try:
                        entry, wire = self._apply_filter_payload(payload, msg)
                    except FilterError as e:
                        chat.append(ChatEntry(
                            "system", f"message {msg}: filter rejected: {e}",
                            message=msg))
                        continue
                    chat.append(entry)
                    if payload.get("update"):
                        updated.append(wire)
                    else:
                        added.append(wire)

        if agent_route is not None and agent_route.needs_visualization:
            try:
                action = run_viz_agent(text, context, self.viz_backend)
            except (AgentError, BackendError) as e:
                chat.append(ChatEntry(
                    "system", f"message {msg}: visualization agent error: {e}",
                    message=msg))
            else:
                view = self._add_view(action.spec, action.caption, msg)
                views_added.append(view.to_wire())
                chat.append(ChatEntry(
                    "system",
                    f"message {msg}: added view {view.id}: {view.caption}",
                    message=msg, view=view.id))

        if agent_route is not None and not agent_route.needs_filter \
                and not agent_route.needs_visualization:
            chat.append(ChatEntry("agent", CONVERSATIONAL_REPLY, message=msg))

        if added or updated:
            refresh = tuple(v.id for v in self.views)
        elif views_added:
            refresh = tuple(v["id"] for v in views_added)
        else:
            refresh = ()

        self.chat.extend(chat)
        self.seq += 1
        return self._emit(SessionDelta(
            seq=self.seq, kind="message",
            chat=tuple(e.to_wire() for e in chat),
            filters_added=tuple(added), filters_updated=tuple(updated),
            views_added=tuple(views_added), refresh=refresh,
        ))

    def _apply_filter_payload(self, payload: dict, msg: int) -> tuple[ChatEntry, dict]:
        update_id = payload.get("update")
        if update_id:
            body = {k: payload[k] for k in ("min", "max", "values") if k in payload}
            self.filter_state = self.filter_state.with_updated(
                update_id, body, self.schema)
            f = self.filter_state.get(update_id)
            entry = ChatEntry(
                "system",
                f"message {msg}: updated filter {update_id}: {describe_filter(f)}",
                message=msg, widget=update_id)
            return entry, f.to_wire()
        self._filter_counter += 1
        fid = f"f{self._filter_counter}"
        source = FilterSource("agent", message=msg)
        if payload["kind"] == "interval":
            f: IntervalFilter | PointFilter = IntervalFilter(
                fid, payload["entity"], payload["field"],
                payload["min"], payload["max"], source)
        else:
            f = PointFilter(fid, payload["entity"], payload["field"],
                            frozenset(payload["values"]), source)
        self.filter_state = self.filter_state.with_added(f, self.schema)
        entry = ChatEntry(
            "system",
            f"message {msg}: added filter {fid}: {describe_filter(f)}",
            message=msg, widget=fid)
        return entry, f.to_wire()

    def _add_view(self, spec: ViewSpec, caption: str, msg: int) -> ViewState:
        self._view_counter += 1
        vid = f"v{self._view_counter}"
        injected, selection = inject_interactivity(spec, self.schema)
        selection = replace(selection, view=vid)
        injected = replace(
            injected,
            interactivity=replace(injected.interactivity, selection=selection))
        plan = compile_spec(injected, self.schema)
        view = ViewState(vid, spec, injected, selection, plan, caption, msg)
        self.views.append(view)
        return view

    def update_filter(self, filter_id: str, payload: dict) -> SessionDelta:
        """Apply a widget edit; the filter keeps its provenance, marked edited."""
        with self._write:
            self.filter_state = self.filter_state.with_updated(
                filter_id, payload, self.schema)
            self.seq += 1
            wire = self.filter_state.get(filter_id).to_wire()
            return self._emit(SessionDelta(
                seq=self.seq, kind="widget_update",
                filters_updated=(wire,),
                refresh=tuple(v.id for v in self.views),
            ))

    def remove_filter(self, filter_id: str) -> SessionDelta:
        """Remove a filter; a selection filter takes its whole group along."""
        with self._write:
            f = self.filter_state.get(filter_id)
            if f is None:
                raise FilterError(f"unknown filter id {filter_id!r}")
            removed = {filter_id}
            selections: tuple[dict, ...] = ()
            if f.source.type == "view":
                vid = f.source.view
                removed = {g.id for g in self.filter_state.filters
                           if g.source.view == vid}
                self.view(vid).selection = None
                selections = ({"view": vid, "payload": None},)
            self.filter_state = self.filter_state.with_removed_many(removed)
            self.seq += 1
            return self._emit(SessionDelta(
                seq=self.seq, kind="filter_removed",
                filters_removed=tuple(sorted(removed)),
                selections=selections,
                refresh=tuple(v.id for v in self.views),
            ))

    def apply_selection(self, view_id: str, payload: dict) -> SessionDelta:
        """Materialize a brush as filters; re-brushing replaces the old ones."""
        with self._write:
            view = self.view(view_id)
            decl = view.selection_decl
            if payload.get("kind") != decl.kind:
                raise SelectionMismatchError(
                    f"view {view_id} takes {decl.kind} selections, "
                    f"got {payload.get('kind')!r}")
            new_filters = self._selection_filters(decl, payload)
            old_ids = {f.id for f in self.filter_state.filters
                       if f.source.view == view_id}
            state = self.filter_state.with_removed_many(old_ids) if old_ids \
                else self.filter_state
            for f in new_filters:
                state = state.with_added(f, self.schema)
            # single mutation: collapse the intermediate version bumps
            self.filter_state = FilterState(state.filters,
                                            self.filter_state.version + 1)
            view.selection = dict(payload)
            self.seq += 1
            return self._emit(SessionDelta(
                seq=self.seq, kind="selection",
                filters_added=tuple(f.to_wire() for f in new_filters),
                filters_removed=tuple(sorted(old_ids)),
                selections=({"view": view_id, "payload": dict(payload)},),
                refresh=tuple(v.id for v in self.views if v.id != view_id),
            ))

    def _selection_filters(self, decl: SelectionDecl, payload: dict):
        source = FilterSource("view", view=decl.view)
        if decl.kind == "interval_2d":
            intervals = payload.get("intervals")
            if (not isinstance(intervals, list) or len(intervals) != 2
                    or not all(isinstance(i, list) and len(i) == 2 for i in intervals)):
                raise SelectionMismatchError(
                    "interval_2d selection requires \"intervals\": [[lo,hi],[lo,hi]]")
            suffixes = ("x", "y")
            return [
                IntervalFilter(f"{decl.view}.{suffix}", entity, fieldname,
                               interval[0], interval[1], source)
                for suffix, (entity, fieldname), interval
                in zip(suffixes, decl.targets, intervals)
            ]
        if decl.kind == "interval_1d":
            interval = payload.get("interval")
            if not isinstance(interval, list) or len(interval) != 2:
                raise SelectionMismatchError(
                    "interval_1d selection requires \"interval\": [lo,hi]")
            entity, fieldname = decl.targets[0]
            return [IntervalFilter(f"{decl.view}.sel", entity, fieldname,
                                   interval[0], interval[1], source)]
        values = payload.get("values")
        if not isinstance(values, list) or not values:
            raise SelectionMismatchError(
                "point selection requires a non-empty \"values\" list")
        entity, fieldname = decl.targets[0]
        return [PointFilter(f"{decl.view}.sel", entity, fieldname,
                            frozenset(values), source)]

    def clear_selection(self, view_id: str) -> SessionDelta:
        with self._write:
            view = self.view(view_id)
            old_ids = {f.id for f in self.filter_state.filters
                       if f.source.view == view_id}
            if old_ids:
                self.filter_state = self.filter_state.with_removed_many(old_ids)
            view.selection = None
            self.seq += 1
            return self._emit(SessionDelta(
                seq=self.seq, kind="selection_cleared",
                filters_removed=tuple(sorted(old_ids)),
                selections=({"view": view_id, "payload": None},),
                refresh=tuple(v.id for v in self.views if v.id != view_id),
            ))


def replay_deltas(deltas: list[dict], schema: SchemaDef) -> dict:
    """Reconstruct a snapshot (minus session id) from a delta log."""
    chat: list[dict] = []
    filters: list[dict] = []
    views: list[dict] = []
    seq = 0
    for delta in deltas:
        assert delta["seq"] == seq + 1, "delta log has a gap"
        seq = delta["seq"]
        chat.extend(delta["chat"])
        # removals first: a re-brush removes and re-adds the same filter ids
        removed = set(delta["filters"]["removed"])
        filters = [f for f in filters if f["id"] not in removed]
        for wire in delta["filters"]["added"]:
            filter_from_wire(wire, schema)  # validates
            filters.append(wire)
        by_id = {f["id"]: f for f in filters}
        for wire in delta["filters"]["updated"]:
            by_id[wire["id"]].update(wire)
        views.extend(delta["views"])
        view_by_id = {v["id"]: v for v in views}
        for sel in delta["selections"]:
            view_by_id[sel["view"]]["selection"] = sel["payload"]
    return {"seq": seq, "chat": chat, "filters": filters, "views": views}


def parse_view_wire(doc: dict) -> ViewSpec:
    """Round-trip helper: rebuild the injected ViewSpec from a snapshot."""
    return parse_spec(doc["injected_spec"])
