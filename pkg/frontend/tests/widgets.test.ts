import { describe, expect, it } from "vitest";
import { renderFilterChip, renderWidget } from "../src/widgets.js";
import type {
  FilterUpdate,
  FilterWire,
  IntervalFilterWire,
  PointFilterWire,
  SummaryWire,
} from "../src/types.js";

const AGE_SUMMARY: SummaryWire = {
  entity: "donors",
  field: "age",
  kind: "quantitative",
  unit: "years",
  min: 17,
  max: 67,
};

const DEATH_SUMMARY: SummaryWire = {
  entity: "donors",
  field: "death_event",
  kind: "categorical",
  values: ["accident", "homicide", "natural causes", "suicide"],
  cardinality: 4,
};

function ageFilter(over: Partial<IntervalFilterWire> = {}): IntervalFilterWire {
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
  };
}

function deathFilter(over: Partial<PointFilterWire> = {}): PointFilterWire {
  return {
    id: "f2",
    kind: "point",
    entity: "donors",
    field: "death_event",
    values: ["homicide", "accident"],
    source: { type: "agent", message: 2 },
    edited: false,
    ...over,
  };
}

function edits() {
  const calls: [string, FilterUpdate][] = [];
  return {
    calls,
    callbacks: { onEdit: (id: string, update: FilterUpdate) => calls.push([id, update]) },
  };
}

function change(el: HTMLInputElement, value?: string) {
  if (value !== undefined) el.value = value;
  el.dispatchEvent(new Event("change", { bubbles: true }));
}

describe("interval widget", () => {
  it("renders inputs at the filter bounds, limited by the field summary", () => {
    const el = renderWidget(ageFilter(), AGE_SUMMARY, edits().callbacks);
    const min = el.querySelector<HTMLInputElement>(".min-input")!;
    const max = el.querySelector<HTMLInputElement>(".max-input")!;
    expect(min.value).toBe("18");
    expect(max.value).toBe("67");
    expect(min.min).toBe("17");
    expect(min.max).toBe("67");
    const slider = el.querySelector<HTMLInputElement>(".min-slider")!;
    expect(slider.min).toBe("17");
    expect(slider.value).toBe("18");
  });

  it("submits an interval update when a bound changes", () => {
    const { calls, callbacks } = edits();
    const el = renderWidget(ageFilter(), AGE_SUMMARY, callbacks);
    change(el.querySelector<HTMLInputElement>(".min-input")!, "21");
    expect(calls).toEqual([["f1", { min: 21, max: 67 }]]);
  });

  it("keeps slider and number input in sync", () => {
    const { calls, callbacks } = edits();
    const el = renderWidget(ageFilter(), AGE_SUMMARY, callbacks);
    change(el.querySelector<HTMLInputElement>(".min-slider")!, "30");
    expect(el.querySelector<HTMLInputElement>(".min-input")!.value).toBe("30");
    expect(calls).toEqual([["f1", { min: 30, max: 67 }]]);
  });

  it("rejects inverted bounds with the server's message", () => {
    const { calls, callbacks } = edits();
    const el = renderWidget(ageFilter(), AGE_SUMMARY, callbacks);
    change(el.querySelector<HTMLInputElement>(".min-input")!, "70");
    expect(calls).toEqual([]);
    expect(el.classList.contains("invalid")).toBe(true);
    expect(el.querySelector(".widget-error")?.textContent)
      .toBe("invalid bounds: min 70 > max 67");
  });

  it("shows the edited badge once a filter was adjusted", () => {
    const plain = renderWidget(ageFilter(), AGE_SUMMARY, edits().callbacks);
    expect(plain.querySelector(".badge.edited")).toBeNull();
    const edited = renderWidget(ageFilter({ edited: true }), AGE_SUMMARY, edits().callbacks);
    expect(edited.querySelector(".badge.edited")?.textContent).toBe("edited");
  });

  it("falls back to the filter bounds when no summary exists", () => {
    const el = renderWidget(ageFilter(), undefined, edits().callbacks);
    expect(el.querySelector<HTMLInputElement>(".min-input")!.min).toBe("18");
  });
});

describe("point widget", () => {
  it("lists every category with the chosen ones checked", () => {
    const el = renderWidget(deathFilter(), DEATH_SUMMARY, edits().callbacks);
    const boxes = [...el.querySelectorAll<HTMLInputElement>("input[type=checkbox]")];
    expect(boxes.map((b) => b.value)).toEqual([
      "accident", "homicide", "natural causes", "suicide",
    ]);
    expect(boxes.filter((b) => b.checked).map((b) => b.value))
      .toEqual(["accident", "homicide"]);
  });

  it("submits the checked set on change", () => {
    const { calls, callbacks } = edits();
    const el = renderWidget(deathFilter(), DEATH_SUMMARY, callbacks);
    const suicide = el.querySelector<HTMLInputElement>('input[value="suicide"]')!;
    suicide.checked = true;
    change(suicide);
    expect(calls).toEqual([["f2", { values: ["accident", "homicide", "suicide"] }]]);
  });

  it("refuses to empty the set and reverts the checkbox", () => {
    const { calls, callbacks } = edits();
    const el = renderWidget(deathFilter({ values: ["homicide"] }), DEATH_SUMMARY, callbacks);
    const homicide = el.querySelector<HTMLInputElement>('input[value="homicide"]')!;
    homicide.checked = false;
    change(homicide);
    expect(calls).toEqual([]);
    expect(homicide.checked).toBe(true);
    expect(el.querySelector(".widget-error")?.textContent)
      .toBe("point filter requires a non-empty value set");
  });
});

describe("filter chip", () => {
  it("shows description, provenance and a working remove control", () => {
    const removed: string[] = [];
    const chip = renderFilterChip(
      ageFilter({ min: 21, edited: true }) as FilterWire,
      "donors.age: 21–67",
      "agent, message 1, edited",
      (fid) => removed.push(fid),
    );
    expect(chip.querySelector(".chip-text")?.textContent).toBe("donors.age: 21–67");
    expect(chip.querySelector(".badge.source")?.textContent)
      .toBe("agent, message 1, edited");
    chip.querySelector<HTMLButtonElement>(".chip-remove")!.click();
    expect(removed).toEqual(["f1"]);
  });
});
