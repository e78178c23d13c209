// SVG renderers for view ResultTables. The engine has already filtered,
// joined, and aggregated; these functions only draw rows and translate
// gestures into selection payloads. No re-aggregation happens here.

import { bandScale, extent, linearScale, parseBinLabel } from "./scales.js";
import type { SelectionPayload, TableWire, ViewWire } from "./types.js";

export const CHART = {
  width: 360,
  height: 220,
  margin: { top: 12, right: 12, bottom: 32, left: 44 },
};

export interface ChartHandlers {
  onSelection(payload: SelectionPayload): void;
  onClear(): void;
}

const SVG_NS = "http://www.w3.org/2000/svg";

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, String(value));
  }
  return el;
}

interface Mapping {
  encoding: string;
  field: string;
  value_kind: string;
}

function representation(view: ViewWire): Record<string, unknown> {
  return (view.injected_spec.representation ?? {}) as Record<string, unknown>;
}

function mappingOf(view: ViewWire): Mapping[] {
  return (representation(view).mapping ?? []) as Mapping[];
}

function columnIndex(table: TableWire, field: string): number {
  return table.columns.findIndex((c) => c.name === field);
}

function numbers(table: TableWire, index: number): number[] {
  return table.rows
    .map((r) => r[index])
    .filter((v): v is number => typeof v === "number");
}

/** Render one view's data into `host`, replacing previous content. */
export function renderView(
  host: HTMLElement,
  view: ViewWire,
  table: TableWire,
  handlers: ChartHandlers,
): void {
  host.textContent = "";
  host.dataset.filterVersion = String(table.filter_version);
  const repr = representation(view);
  if (repr.type === "table" || repr.mark === "text" || !repr.mark) {
    renderTable(host, view, table, handlers);
    return;
  }
  const mark = repr.mark as string;
  if (mark === "point") renderScatter(host, view, table, handlers);
  else if (mark === "line") renderLine(host, view, table, handlers);
  else renderBars(host, view, table, handlers); // bar and rect
}

// -- table ---------------------------------------------------------------

const PAGE_SIZE = 8;

function renderTable(
  host: HTMLElement,
  view: ViewWire,
  table: TableWire,
  handlers: ChartHandlers,
  page = 0,
): void {
  host.textContent = "";
  const grid = document.createElement("table");
  grid.className = "data-grid";
  const head = grid.createTHead().insertRow();
  for (const col of table.columns) {
    const th = document.createElement("th");
    th.textContent = col.name;
    head.appendChild(th);
  }

  const decl = view.selection_decl;
  const keyIndex = decl.kind === "point"
    ? columnIndex(table, decl.targets[0].field)
    : -1;
  const selected = new Set(
    view.selection?.kind === "point" ? view.selection.values ?? [] : [],
  );

  const body = grid.createTBody();
  const start = page * PAGE_SIZE;
  for (const row of table.rows.slice(start, start + PAGE_SIZE)) {
    const tr = body.insertRow();
    for (const cell of row) {
      tr.insertCell().textContent = cell === null ? "" : String(cell);
    }
    if (keyIndex >= 0) {
      const key = row[keyIndex];
      tr.classList.add("selectable");
      if (selected.has(String(key))) tr.classList.add("selected");
      tr.addEventListener("click", (ev) => {
        const value = String(key);
        const next = ev.ctrlKey || ev.metaKey
          ? toggle(selected, value)
          : [value];
        if (next.length === 0) handlers.onClear();
        else handlers.onSelection({ kind: "point", values: next });
      });
    }
  }
  host.appendChild(grid);

  const footer = document.createElement("div");
  footer.className = "table-footer";
  const pages = Math.max(1, Math.ceil(table.rows.length / PAGE_SIZE));
  const label = document.createElement("span");
  const shown = table.rows.length === 0
    ? "0"
    : `${start + 1}–${Math.min(start + PAGE_SIZE, table.rows.length)}`;
  label.textContent = `rows ${shown} of ${table.total_row_count}`;
  const prev = pagerButton("prev", page > 0, () =>
    renderTable(host, view, table, handlers, page - 1));
  const next = pagerButton("next", page < pages - 1, () =>
    renderTable(host, view, table, handlers, page + 1));
  footer.append(prev, label, next);
  host.appendChild(footer);
}

function pagerButton(label: string, enabled: boolean, onClick: () => void) {
  const button = document.createElement("button");
  button.textContent = label;
  button.disabled = !enabled;
  button.addEventListener("click", onClick);
  return button;
}

function toggle(current: Set<string>, value: string): string[] {
  const next = new Set(current);
  if (next.has(value)) next.delete(value);
  else next.add(value);
  return [...next];
}

// -- bar / rect ------------------------------------------------------------

function renderBars(
  host: HTMLElement,
  view: ViewWire,
  table: TableWire,
  handlers: ChartHandlers,
): void {
  const mapping = mappingOf(view);
  const xMap = mapping.find((m) => m.encoding === "x");
  const yMap = mapping.find((m) => m.encoding === "y");
  if (!xMap || !yMap) {
    renderTable(host, view, table, handlers);
    return;
  }
  const horizontal = xMap.value_kind === "quantitative" && yMap.value_kind === "nominal";
  const catMap = horizontal ? yMap : xMap;
  const valMap = horizontal ? xMap : yMap;
  const catIndex = columnIndex(table, catMap.field);
  const valIndex = columnIndex(table, valMap.field);

  const categories = table.rows.map((r) => String(r[catIndex]));
  const { width, height, margin } = CHART;
  const innerW: [number, number] = [margin.left, width - margin.right];
  const innerH: [number, number] = [height - margin.bottom, margin.top];
  const maxValue = Math.max(0, ...numbers(table, valIndex));
  const value = linearScale([0, maxValue || 1], horizontal ? [margin.left, width - margin.right] : innerH);
  const band = bandScale(categories, horizontal ? [margin.top, height - margin.bottom] : innerW);

  const svg = svgElement("svg", {
    width,
    height,
    viewBox: `0 0 ${width} ${height}`,
    class: "chart bar-chart",
  });
  const selected = new Set(
    view.selection?.kind === "point" ? view.selection.values ?? [] : [],
  );

  table.rows.forEach((row) => {
    const category = String(row[catIndex]);
    const raw = row[valIndex];
    const magnitude = typeof raw === "number" ? raw : 0;
    let rect;
    if (horizontal) {
      rect = svgElement("rect", {
        x: margin.left,
        y: band.position(category),
        width: Math.max(0, value(magnitude) - margin.left),
        height: band.bandwidth(),
      });
    } else {
      rect = svgElement("rect", {
        x: band.position(category),
        y: value(magnitude),
        width: band.bandwidth(),
        height: Math.max(0, innerH[0] - value(magnitude)),
      });
    }
    rect.classList.add("bar");
    rect.dataset.category = category;
    if (selected.has(category)) rect.classList.add("selected");
    svg.appendChild(rect);

    const label = svgElement("text", {
      x: horizontal ? margin.left - 4 : band.position(category) + band.bandwidth() / 2,
      y: horizontal
        ? band.position(category) + band.bandwidth() / 2
        : height - margin.bottom + 14,
      "text-anchor": horizontal ? "end" : "middle",
      class: "axis-label",
    });
    label.textContent = category;
    svg.appendChild(label);
  });

  const decl = view.selection_decl;
  if (decl.kind === "point") {
    svg.querySelectorAll<SVGRectElement>("rect.bar").forEach((rect) => {
      rect.addEventListener("click", (ev) => {
        const category = rect.dataset.category ?? "";
        const next = ev.ctrlKey || ev.metaKey
          ? toggle(selected, category)
          : [category];
        if (next.length === 0) handlers.onClear();
        else handlers.onSelection({ kind: "point", values: next });
      });
    });
  } else if (decl.kind === "interval_1d" && !horizontal) {
    attachSpanBrush(svg, (x0, x1) => {
      const i0 = band.indexAt(Math.min(x0, x1));
      const i1 = band.indexAt(Math.max(x0, x1));
      const low = parseBinLabel(categories[i0]);
      const high = parseBinLabel(categories[i1]);
      if (!low || !high) return null;
      return { kind: "interval_1d", interval: [low[0], high[1]] };
    }, handlers);
  }
  host.appendChild(svg);
}

// -- scatter ---------------------------------------------------------------

function renderScatter(
  host: HTMLElement,
  view: ViewWire,
  table: TableWire,
  handlers: ChartHandlers,
): void {
  const mapping = mappingOf(view);
  const xMap = mapping.find((m) => m.encoding === "x");
  const yMap = mapping.find((m) => m.encoding === "y");
  if (!xMap || !yMap) {
    renderTable(host, view, table, handlers);
    return;
  }
  const xIndex = columnIndex(table, xMap.field);
  const yIndex = columnIndex(table, yMap.field);
  const { width, height, margin } = CHART;
  const x = linearScale(extent(numbers(table, xIndex)), [margin.left, width - margin.right]);
  const y = linearScale(extent(numbers(table, yIndex)), [height - margin.bottom, margin.top]);

  const svg = svgElement("svg", {
    width,
    height,
    viewBox: `0 0 ${width} ${height}`,
    class: "chart scatter-chart",
  });
  for (const row of table.rows) {
    const xv = row[xIndex];
    const yv = row[yIndex];
    if (typeof xv !== "number" || typeof yv !== "number") continue;
    const dot = svgElement("circle", { cx: x(xv), cy: y(yv), r: 4 });
    dot.classList.add("dot");
    svg.appendChild(dot);
  }

  if (view.selection?.kind === "interval_2d" && view.selection.intervals) {
    const [[x0, x1], [y0, y1]] = view.selection.intervals;
    svg.appendChild(svgElement("rect", {
      x: Math.min(x(x0), x(x1)),
      y: Math.min(y(y0), y(y1)),
      width: Math.abs(x(x1) - x(x0)),
      height: Math.abs(y(y1) - y(y0)),
      class: "brush-extent",
    }));
  }

  if (view.selection_decl.kind === "interval_2d") {
    attachRectBrush(svg, (px0, py0, px1, py1) => {
      const xLo = Math.min(x.invert(px0), x.invert(px1));
      const xHi = Math.max(x.invert(px0), x.invert(px1));
      const yLo = Math.min(y.invert(py0), y.invert(py1));
      const yHi = Math.max(y.invert(py0), y.invert(py1));
      return {
        kind: "interval_2d",
        intervals: [[round(xLo), round(xHi)], [round(yLo), round(yHi)]],
      };
    }, handlers);
  }
  host.appendChild(svg);
}

// -- line --------------------------------------------------------------------

function renderLine(
  host: HTMLElement,
  view: ViewWire,
  table: TableWire,
  handlers: ChartHandlers,
): void {
  const mapping = mappingOf(view);
  const xMap = mapping.find((m) => m.encoding === "x");
  const yMap = mapping.find((m) => m.encoding === "y");
  if (!xMap || !yMap) {
    renderTable(host, view, table, handlers);
    return;
  }
  const xIndex = columnIndex(table, xMap.field);
  const yIndex = columnIndex(table, yMap.field);
  const { width, height, margin } = CHART;
  const x = linearScale(extent(numbers(table, xIndex)), [margin.left, width - margin.right]);
  const y = linearScale(extent(numbers(table, yIndex)), [height - margin.bottom, margin.top]);

  const svg = svgElement("svg", {
    width,
    height,
    viewBox: `0 0 ${width} ${height}`,
    class: "chart line-chart",
  });
  const points: string[] = [];
  for (const row of table.rows) {
    const xv = row[xIndex];
    const yv = row[yIndex];
    if (typeof xv !== "number" || typeof yv !== "number") continue;
    points.push(`${x(xv)},${y(yv)}`);
  }
  svg.appendChild(svgElement("polyline", {
    points: points.join(" "),
    fill: "none",
    class: "line",
  }));

  if (view.selection_decl.kind === "interval_1d") {
    attachSpanBrush(svg, (px0, px1) => {
      const lo = Math.min(x.invert(px0), x.invert(px1));
      const hi = Math.max(x.invert(px0), x.invert(px1));
      return { kind: "interval_1d", interval: [round(lo), round(hi)] };
    }, handlers);
  }
  host.appendChild(svg);
}

// -- brushing ----------------------------------------------------------------

function round(v: number): number {
  return Math.round(v * 100) / 100;
}

function localPoint(svg: SVGSVGElement, ev: MouseEvent): [number, number] {
  const box = svg.getBoundingClientRect();
  return [ev.clientX - box.left, ev.clientY - box.top];
}

function attachRectBrush(
  svg: SVGSVGElement,
  toPayload: (x0: number, y0: number, x1: number, y1: number) => SelectionPayload | null,
  handlers: ChartHandlers,
): void {
  const overlay = svgElement("rect", {
    x: 0, y: 0, width: CHART.width, height: CHART.height,
    fill: "transparent", class: "brush-overlay",
  });
  const feedback = svgElement("rect", { class: "brush-rect", display: "none" });
  svg.append(overlay, feedback);
  let start: [number, number] | null = null;

  overlay.addEventListener("mousedown", (ev) => {
    start = localPoint(svg, ev);
  });
  overlay.addEventListener("mousemove", (ev) => {
    if (!start) return;
    const [x1, y1] = localPoint(svg, ev);
    feedback.setAttribute("display", "inline");
    feedback.setAttribute("x", String(Math.min(start[0], x1)));
    feedback.setAttribute("y", String(Math.min(start[1], y1)));
    feedback.setAttribute("width", String(Math.abs(x1 - start[0])));
    feedback.setAttribute("height", String(Math.abs(y1 - start[1])));
  });
  overlay.addEventListener("mouseup", (ev) => {
    if (!start) return;
    const [x1, y1] = localPoint(svg, ev);
    const [x0, y0] = start;
    start = null;
    feedback.setAttribute("display", "none");
    if (Math.abs(x1 - x0) < 3 && Math.abs(y1 - y0) < 3) {
      handlers.onClear();
      return;
    }
    const payload = toPayload(x0, y0, x1, y1);
    if (payload) handlers.onSelection(payload);
  });
}

function attachSpanBrush(
  svg: SVGSVGElement,
  toPayload: (x0: number, x1: number) => SelectionPayload | null,
  handlers: ChartHandlers,
): void {
  const overlay = svgElement("rect", {
    x: 0, y: 0, width: CHART.width, height: CHART.height,
    fill: "transparent", class: "brush-overlay",
  });
  const feedback = svgElement("rect", {
    class: "brush-rect", display: "none",
    y: CHART.margin.top, height: CHART.height - CHART.margin.top - CHART.margin.bottom,
  });
  svg.append(overlay, feedback);
  let startX: number | null = null;

  overlay.addEventListener("mousedown", (ev) => {
    startX = localPoint(svg, ev)[0];
  });
  overlay.addEventListener("mousemove", (ev) => {
    if (startX === null) return;
    const x1 = localPoint(svg, ev)[0];
    feedback.setAttribute("display", "inline");
    feedback.setAttribute("x", String(Math.min(startX, x1)));
    feedback.setAttribute("width", String(Math.abs(x1 - startX)));
  });
  overlay.addEventListener("mouseup", (ev) => {
    if (startX === null) return;
    const x1 = localPoint(svg, ev)[0];
    const x0 = startX;
    startX = null;
    feedback.setAttribute("display", "none");
    if (Math.abs(x1 - x0) < 3) {
      handlers.onClear();
      return;
    }
    const payload = toPayload(x0, x1);
    if (payload) handlers.onSelection(payload);
  });
}
