// Dashboard pane: the filter toolbar, one card per view, and export
// controls. Cards re-request their data from the server whenever a delta
// says so; nothing is aggregated client-side.

import type { Api } from "./api.js";
import { renderView } from "./charts.js";
import { describeFilter, sourceBadge, SessionModel } from "./model.js";
import { renderFilterChip } from "./widgets.js";
import type { SelectionPayload, ViewWire } from "./types.js";

export interface DashboardCallbacks {
  onRemoveFilter(filterId: string): void;
  onSelection(viewId: string, payload: SelectionPayload): void;
  onClearSelection(viewId: string): void;
  onExport(entity: string): void;
}

export class Dashboard {
  private api: Api;
  private model: SessionModel;
  private entities: string[];
  private callbacks: DashboardCallbacks;
  private toolbar: HTMLElement;
  private exports: HTMLElement;
  private grid: HTMLElement;
  private bodies = new Map<string, HTMLElement>();
  private fetchToken = new Map<string, number>();

  constructor(
    host: HTMLElement,
    api: Api,
    model: SessionModel,
    entities: string[],
    callbacks: DashboardCallbacks,
  ) {
    this.api = api;
    this.model = model;
    this.entities = entities;
    this.callbacks = callbacks;

    this.toolbar = document.createElement("div");
    this.toolbar.className = "toolbar";
    this.exports = document.createElement("div");
    this.exports.className = "exports";
    this.grid = document.createElement("div");
    this.grid.className = "view-grid";
    host.textContent = "";
    host.append(this.toolbar, this.exports, this.grid);
    this.renderExports();
  }

  renderToolbar(): void {
    this.toolbar.textContent = "";
    for (const filter of this.model.filters) {
      this.toolbar.appendChild(renderFilterChip(
        filter,
        describeFilter(filter),
        sourceBadge(filter),
        this.callbacks.onRemoveFilter,
      ));
    }
    if (this.model.filters.length === 0) {
      const empty = document.createElement("span");
      empty.className = "toolbar-empty";
      empty.textContent = "no filters";
      this.toolbar.appendChild(empty);
    }
  }

  private renderExports(): void {
    for (const entity of this.entities) {
      const button = document.createElement("button");
      button.className = "export-button";
      button.dataset.entity = entity;
      button.textContent = `export ${entity}`;
      button.addEventListener("click", () => this.callbacks.onExport(entity));
      this.exports.appendChild(button);
    }
  }

  /** Create cards for views that don't have one yet. */
  syncViews(): string[] {
    const added: string[] = [];
    for (const view of this.model.views) {
      if (this.bodies.has(view.id)) continue;
      this.grid.appendChild(this.card(view));
      added.push(view.id);
    }
    return added;
  }

  private card(view: ViewWire): HTMLElement {
    const card = document.createElement("div");
    card.className = "view-card";
    card.dataset.view = view.id;

    const head = document.createElement("div");
    head.className = "view-head";
    const caption = document.createElement("span");
    caption.className = "view-caption";
    caption.textContent = view.caption;
    const vid = document.createElement("span");
    vid.className = "view-id";
    vid.textContent = view.id;
    const clear = document.createElement("button");
    clear.className = "clear-selection";
    clear.textContent = "clear";
    clear.addEventListener("click", () => this.callbacks.onClearSelection(view.id));
    head.append(caption, vid, clear);

    const body = document.createElement("div");
    body.className = "view-body";
    this.bodies.set(view.id, body);
    card.append(head, body);
    return card;
  }

  /** Refetch and redraw the given views (all views when omitted). */
  async refresh(viewIds?: string[]): Promise<void> {
    const ids = viewIds ?? [...this.bodies.keys()];
    await Promise.all(ids.map((vid) => this.refreshOne(vid)));
  }

  private async refreshOne(viewId: string): Promise<void> {
    const body = this.bodies.get(viewId);
    const view = this.model.view(viewId);
    if (!body || !view) return;
    const token = (this.fetchToken.get(viewId) ?? 0) + 1;
    this.fetchToken.set(viewId, token);
    try {
      const table = await this.api.viewData(this.model.sessionId, viewId);
      if (this.fetchToken.get(viewId) !== token) return; // superseded
      const card = body.parentElement;
      if (card) {
        const clear = card.querySelector<HTMLButtonElement>(".clear-selection");
        if (clear) clear.style.display = view.selection ? "inline" : "none";
      }
      renderView(body, view, table, {
        onSelection: (payload) => this.callbacks.onSelection(viewId, payload),
        onClear: () => this.callbacks.onClearSelection(viewId),
      });
    } catch (err) {
      if (this.fetchToken.get(viewId) !== token) return;
      body.textContent = `failed to load: ${err instanceof Error ? err.message : err}`;
    }
  }
}
