import { describe, expect, it } from "vitest";
import { describeFilter, SessionModel, sourceBadge } from "../src/model.js";
import type {
  DeltaWire,
  FilterWire,
  SnapshotWire,
  ViewWire,
} from "../src/types.js";

function snap(over: Partial<SnapshotWire> = {}): SnapshotWire {
  return {
    session_id: "s1",
    seq: 0,
    chat: [],
    filters: [],
    views: [],
    ...over,
  };
}

function delta(seq: number, over: Partial<DeltaWire> = {}): DeltaWire {
  return {
    seq,
    kind: "message",
    chat: [],
    filters: { added: [], updated: [], removed: [] },
    views: [],
    selections: [],
    refresh: [],
    ...over,
  };
}

function ageFilter(over: Partial<FilterWire> = {}): FilterWire {
  return {
    id: "f1",
    kind: "interval",
    entity: "donors",
    field: "age",
    min: 18,
    max: 67,
    source: { type: "agent", message: 1 },
    edited: false,
    ...over,
  } as FilterWire;
}

function brushFilter(id: string, field: string, min: number, max: number): FilterWire {
  return {
    id,
    kind: "interval",
    entity: "donors",
    field,
    min,
    max,
    source: { type: "view", view: "v1" },
    edited: false,
  };
}

function view(id: string): ViewWire {
  return {
    id,
    caption: "test view",
    created_by: 1,
    spec: {},
    injected_spec: {},
    selection_decl: {
      view: id,
      kind: "interval_2d",
      targets: [
        { entity: "donors", field: "height" },
        { entity: "donors", field: "weight" },
      ],
    },
    selection: null,
  };
}

describe("SessionModel", () => {
  it("loads a snapshot", () => {
    const m = SessionModel.fromSnapshot(snap({
      seq: 4,
      chat: [{ role: "user", text: "hi", message: 1 }],
      filters: [ageFilter()],
      views: [view("v1")],
    }));
    expect(m.sessionId).toBe("s1");
    expect(m.seq).toBe(4);
    expect(m.chat).toHaveLength(1);
    expect(m.filter("f1")?.entity).toBe("donors");
    expect(m.view("v1")?.caption).toBe("test view");
  });

  it("applies the next delta and rejects replays of it", () => {
    const m = SessionModel.fromSnapshot(snap());
    const d = delta(1, {
      chat: [{ role: "user", text: "filter to adults", message: 1 }],
      filters: { added: [ageFilter()], updated: [], removed: [] },
    });
    expect(m.applyDelta(d)).toBe("applied");
    expect(m.seq).toBe(1);
    expect(m.filters).toHaveLength(1);
    expect(m.applyDelta(d)).toBe("stale");
    expect(m.filters).toHaveLength(1);
  });

  it("flags a gap and leaves state untouched", () => {
    const m = SessionModel.fromSnapshot(snap({ seq: 2 }));
    const result = m.applyDelta(delta(5, {
      filters: { added: [ageFilter()], updated: [], removed: [] },
    }));
    expect(result).toBe("gap");
    expect(m.needsResync).toBe(true);
    expect(m.seq).toBe(2);
    expect(m.filters).toHaveLength(0);
  });

  it("processes removals before additions so a re-brush keeps its filters", () => {
    const m = SessionModel.fromSnapshot(snap({
      seq: 3,
      filters: [
        brushFilter("v1.x", "height", 170, 180),
        brushFilter("v1.y", "weight", 75, 95),
      ],
    }));
    const result = m.applyDelta(delta(4, {
      kind: "selection",
      filters: {
        added: [
          brushFilter("v1.x", "height", 160, 170),
          brushFilter("v1.y", "weight", 50, 60),
        ],
        updated: [],
        removed: ["v1.x", "v1.y"],
      },
    }));
    expect(result).toBe("applied");
    expect(m.filters).toHaveLength(2);
    const fx = m.filter("v1.x");
    expect(fx && fx.kind === "interval" ? [fx.min, fx.max] : null).toEqual([160, 170]);
  });

  it("merges filter updates in place", () => {
    const m = SessionModel.fromSnapshot(snap({ seq: 1, filters: [ageFilter()] }));
    m.applyDelta(delta(2, {
      kind: "filter_update",
      filters: { added: [], updated: [ageFilter({ min: 21, edited: true })], removed: [] },
    }));
    const f = m.filter("f1");
    expect(f && f.kind === "interval" ? f.min : null).toBe(21);
    expect(f?.edited).toBe(true);
  });

  it("reconciles optimistic edits when their delta arrives", () => {
    const m = SessionModel.fromSnapshot(snap({ seq: 1, filters: [ageFilter()] }));
    m.stageFilterEdit("f1", { min: 21, max: 67 });
    expect(m.hasPendingEdit("f1")).toBe(true);
    const eff = m.effectiveFilter("f1");
    expect(eff && eff.kind === "interval" ? eff.min : null).toBe(21);
    expect(eff?.edited).toBe(true);
    // base wire is untouched until the server confirms
    const base = m.filter("f1");
    expect(base && base.kind === "interval" ? base.min : null).toBe(18);

    m.applyDelta(delta(2, {
      filters: { added: [], updated: [ageFilter({ min: 21, edited: true })], removed: [] },
    }));
    expect(m.hasPendingEdit("f1")).toBe(false);
    const after = m.effectiveFilter("f1");
    expect(after && after.kind === "interval" ? after.min : null).toBe(21);
  });

  it("applies selection payloads to views", () => {
    const m = SessionModel.fromSnapshot(snap({ seq: 1, views: [view("v1")] }));
    m.applyDelta(delta(2, {
      kind: "selection",
      selections: [{
        view: "v1",
        payload: { kind: "interval_2d", intervals: [[170, 180], [75, 95]] },
      }],
    }));
    expect(m.view("v1")?.selection?.intervals).toEqual([[170, 180], [75, 95]]);
    m.applyDelta(delta(3, {
      kind: "selection_clear",
      selections: [{ view: "v1", payload: null }],
    }));
    expect(m.view("v1")?.selection).toBeNull();
  });

  it("adds views from deltas", () => {
    const m = SessionModel.fromSnapshot(snap());
    m.applyDelta(delta(1, { views: [view("v1")], refresh: ["v1"] }));
    expect(m.views.map((v) => v.id)).toEqual(["v1"]);
  });
});

describe("filter labels", () => {
  it("describes interval and point filters", () => {
    expect(describeFilter(ageFilter({ min: 21 }))).toBe("donors.age: 21–67");
    expect(describeFilter({
      id: "f2",
      kind: "point",
      entity: "donors",
      field: "death_event",
      values: ["accident", "homicide"],
      source: { type: "agent", message: 2 },
      edited: false,
    })).toBe("donors.death_event: accident, homicide");
  });

  it("builds provenance badges", () => {
    expect(sourceBadge(ageFilter({ source: { type: "agent", message: 4 } })))
      .toBe("agent, message 4");
    expect(sourceBadge(ageFilter({ source: { type: "agent", message: 4 }, edited: true })))
      .toBe("agent, message 4, edited");
    expect(sourceBadge(brushFilter("v2.x", "height", 1, 2)))
      .toBe("view v1");
  });
});
