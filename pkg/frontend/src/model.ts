// Client-side session state: a mirror of the server snapshot, advanced by
// applying deltas in seq order. Rendering is a pure function of this model
// plus the pending flags, so replaying the same delta stream always
// produces the same UI.

import type {
  ChatEntryWire,
  DeltaWire,
  FilterUpdate,
  FilterWire,
  SnapshotWire,
  ViewWire,
} from "./types.js";

export type ApplyResult = "applied" | "stale" | "gap";

export class SessionModel {
  sessionId = "";
  seq = 0;
  chat: ChatEntryWire[] = [];
  filters: FilterWire[] = [];
  views: ViewWire[] = [];

  /** True while a chat message is being processed by the server. */
  busy = false;
  /** True after a seq gap; the owner must refetch the snapshot. */
  needsResync = false;
  /** Optimistic widget edits not yet confirmed by a delta, by filter id. */
  private optimistic = new Map<string, FilterUpdate>();

  static fromSnapshot(snap: SnapshotWire): SessionModel {
    const model = new SessionModel();
    model.resync(snap);
    return model;
  }

  resync(snap: SnapshotWire): void {
    this.sessionId = snap.session_id;
    this.seq = snap.seq;
    this.chat = [...snap.chat];
    this.filters = [...snap.filters];
    this.views = [...snap.views];
    this.needsResync = false;
    this.optimistic.clear();
  }

  /**
   * Apply one delta. Out-of-date deltas are ignored; a gap flips
   * needsResync and leaves the model untouched.
   */
  applyDelta(delta: DeltaWire): ApplyResult {
    if (delta.seq <= this.seq) return "stale";
    if (delta.seq > this.seq + 1) {
      this.needsResync = true;
      return "gap";
    }
    this.seq = delta.seq;
    this.chat.push(...delta.chat);

    // removals first: re-brushing removes and re-adds the same filter ids
    const removed = new Set(delta.filters.removed);
    this.filters = this.filters.filter((f) => !removed.has(f.id));
    this.filters.push(...delta.filters.added);
    const byId = new Map(this.filters.map((f) => [f.id, f]));
    for (const wire of delta.filters.updated) {
      const existing = byId.get(wire.id);
      if (existing) Object.assign(existing, wire);
      this.optimistic.delete(wire.id);
    }
    for (const id of removed) this.optimistic.delete(id);

    this.views.push(...delta.views);
    const viewById = new Map(this.views.map((v) => [v.id, v]));
    for (const sel of delta.selections) {
      const view = viewById.get(sel.view);
      if (view) view.selection = sel.payload;
    }
    return "applied";
  }

  filter(fid: string): FilterWire | undefined {
    return this.filters.find((f) => f.id === fid);
  }

  view(vid: string): ViewWire | undefined {
    return this.views.find((v) => v.id === vid);
  }

  /** Record a widget edit optimistically, before the PATCH round-trips. */
  stageFilterEdit(fid: string, payload: FilterUpdate): void {
    this.optimistic.set(fid, payload);
  }

  dropFilterEdit(fid: string): void {
    this.optimistic.delete(fid);
  }

  /** Filter wire as the widget should render it, pending edits included. */
  effectiveFilter(fid: string): FilterWire | undefined {
    const base = this.filter(fid);
    if (!base) return undefined;
    const pending = this.optimistic.get(fid);
    if (!pending) return base;
    return { ...base, ...pending, edited: true } as FilterWire;
  }

  hasPendingEdit(fid: string): boolean {
    return this.optimistic.has(fid);
  }
}

/** Human-readable provenance badge for the filter toolbar. */
export function sourceBadge(wire: FilterWire): string {
  const parts: string[] = [];
  if (wire.source.type === "agent") {
    parts.push(`agent, message ${wire.source.message}`);
  } else {
    parts.push(`view ${wire.source.view}`);
  }
  if (wire.edited) parts.push("edited");
  return parts.join(", ");
}

/** One-line description of a filter, e.g. "donors.age: 21–67". */
export function describeFilter(wire: FilterWire): string {
  const name = `${wire.entity}.${wire.field}`;
  if (wire.kind === "interval") {
    return `${name}: ${wire.min}–${wire.max}`;
  }
  return `${name}: ${[...wire.values].join(", ")}`;
}
