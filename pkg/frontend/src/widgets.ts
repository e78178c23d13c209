// Inline filter widgets rendered inside chat entries, plus the dashboard
// filter chips. Edits are validated client-side with the same rules the
// server applies, then sent as PATCH payloads; the caller stages the edit
// optimistically and reconciles when the delta arrives.

import type {
  FilterUpdate,
  FilterWire,
  IntervalFilterWire,
  PointFilterWire,
  SummaryWire,
} from "./types.js";

export interface WidgetCallbacks {
  onEdit(filterId: string, update: FilterUpdate): void;
}

/** Render the widget for `filter` into a fresh element. */
export function renderWidget(
  filter: FilterWire,
  summary: SummaryWire | undefined,
  callbacks: WidgetCallbacks,
): HTMLElement {
  if (filter.kind === "interval") {
    return intervalWidget(filter, summary, callbacks);
  }
  return pointWidget(filter, summary, callbacks);
}

function header(filter: FilterWire): HTMLElement {
  const head = document.createElement("div");
  head.className = "widget-head";
  const label = document.createElement("span");
  label.className = "widget-field";
  label.textContent = `${filter.entity}.${filter.field}`;
  head.appendChild(label);
  if (filter.edited) head.appendChild(editedBadge());
  return head;
}

function editedBadge(): HTMLElement {
  const badge = document.createElement("span");
  badge.className = "badge edited";
  badge.textContent = "edited";
  return badge;
}

function intervalWidget(
  filter: IntervalFilterWire,
  summary: SummaryWire | undefined,
  callbacks: WidgetCallbacks,
): HTMLElement {
  const root = document.createElement("div");
  root.className = "widget interval-widget";
  root.dataset.filter = filter.id;
  root.appendChild(header(filter));

  const lo = summary?.min ?? filter.min;
  const hi = summary?.max ?? filter.max;
  const minInput = bound("min", filter.min, lo, hi);
  const maxInput = bound("max", filter.max, lo, hi);
  const minSlider = slider("min", filter.min, lo, hi);
  const maxSlider = slider("max", filter.max, lo, hi);
  const error = document.createElement("div");
  error.className = "widget-error";

  const submit = () => {
    const min = Number(minInput.value);
    const max = Number(maxInput.value);
    if (!Number.isFinite(min) || !Number.isFinite(max)) {
      error.textContent = "bounds must be numbers";
      root.classList.add("invalid");
      return;
    }
    if (min > max) {
      error.textContent = `invalid bounds: min ${fmt(min)} > max ${fmt(max)}`;
      root.classList.add("invalid");
      return;
    }
    error.textContent = "";
    root.classList.remove("invalid");
    callbacks.onEdit(filter.id, { min, max });
  };

  link(minSlider, minInput, submit);
  link(maxSlider, maxInput, submit);
  minInput.addEventListener("change", () => {
    minSlider.value = minInput.value;
    submit();
  });
  maxInput.addEventListener("change", () => {
    maxSlider.value = maxInput.value;
    submit();
  });

  const row = document.createElement("div");
  row.className = "widget-row";
  row.append(minInput, minSlider, maxSlider, maxInput);
  root.append(row, error);
  return root;
}

function bound(which: string, value: number, lo: number, hi: number) {
  const input = document.createElement("input");
  input.type = "number";
  input.className = `${which}-input`;
  input.min = String(lo);
  input.max = String(hi);
  input.value = String(value);
  return input;
}

function slider(which: string, value: number, lo: number, hi: number) {
  const input = document.createElement("input");
  input.type = "range";
  input.className = `${which}-slider`;
  input.min = String(lo);
  input.max = String(hi);
  input.step = "any";
  input.value = String(value);
  return input;
}

function link(sliderEl: HTMLInputElement, inputEl: HTMLInputElement, submit: () => void) {
  sliderEl.addEventListener("input", () => {
    inputEl.value = sliderEl.value;
  });
  sliderEl.addEventListener("change", () => {
    inputEl.value = sliderEl.value;
    submit();
  });
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : String(v);
}

function pointWidget(
  filter: PointFilterWire,
  summary: SummaryWire | undefined,
  callbacks: WidgetCallbacks,
): HTMLElement {
  const root = document.createElement("div");
  root.className = "widget point-widget";
  root.dataset.filter = filter.id;
  root.appendChild(header(filter));

  const chosen = new Set(filter.values);
  const categories = summary?.values ?? filter.values;
  const error = document.createElement("div");
  error.className = "widget-error";
  const list = document.createElement("div");
  list.className = "widget-row";

  const boxes: HTMLInputElement[] = [];
  for (const category of categories) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.value = category;
    box.checked = chosen.has(category);
    box.addEventListener("change", () => {
      const values = boxes.filter((b) => b.checked).map((b) => b.value);
      if (values.length === 0) {
        error.textContent = "point filter requires a non-empty value set";
        root.classList.add("invalid");
        box.checked = true; // revert; the server would refuse this
        return;
      }
      error.textContent = "";
      root.classList.remove("invalid");
      callbacks.onEdit(filter.id, { values });
    });
    boxes.push(box);
    label.append(box, document.createTextNode(` ${category}`));
    list.appendChild(label);
  }
  root.append(list, error);
  return root;
}

/** Dashboard toolbar chip: description, provenance badge, remove control. */
export function renderFilterChip(
  filter: FilterWire,
  description: string,
  badge: string,
  onRemove: (filterId: string) => void,
): HTMLElement {
  const chip = document.createElement("span");
  chip.className = "filter-chip";
  chip.dataset.filter = filter.id;

  const text = document.createElement("span");
  text.className = "chip-text";
  text.textContent = description;

  const source = document.createElement("span");
  source.className = "badge source";
  source.textContent = badge;

  const remove = document.createElement("button");
  remove.className = "chip-remove";
  remove.textContent = "×";
  remove.title = `remove ${filter.id}`;
  remove.addEventListener("click", () => onRemove(filter.id));

  chip.append(text, source, remove);
  return chip;
}
