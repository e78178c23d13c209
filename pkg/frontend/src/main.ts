// Application wiring: one session, one event stream, a chat pane and a
// dashboard pane. Every delta is applied exactly once whether it arrives
// via the mutation response or the event stream; a seq gap falls back to a
// full snapshot refetch.

import { Api, ApiError } from "./api.js";
import { renderChat } from "./chat.js";
import { Dashboard } from "./dashboard.js";
import { SessionModel } from "./model.js";
import { openEventStream, type StreamHandle } from "./sse.js";
import type {
  DeltaWire,
  FilterUpdate,
  SelectionPayload,
  SummaryWire,
} from "./types.js";

export class App {
  readonly api: Api;
  readonly model: SessionModel;
  readonly summaries: SummaryWire[];
  readonly dashboard: Dashboard;
  private chatHost: HTMLElement;
  private errorHost: HTMLElement;
  private stream: StreamHandle | null = null;
  private resyncing: Promise<void> | null = null;

  private constructor(
    root: HTMLElement,
    api: Api,
    model: SessionModel,
    summaries: SummaryWire[],
    entities: string[],
  ) {
    this.api = api;
    this.model = model;
    this.summaries = summaries;

    root.textContent = "";
    root.className = "app";
    this.errorHost = document.createElement("div");
    this.errorHost.className = "app-error";
    this.chatHost = document.createElement("div");
    this.chatHost.className = "chat-pane";
    const dashHost = document.createElement("div");
    dashHost.className = "dash-pane";
    root.append(this.errorHost, this.chatHost, dashHost);

    this.dashboard = new Dashboard(dashHost, api, model, entities, {
      onRemoveFilter: (fid) => this.removeFilter(fid),
      onSelection: (vid, payload) => this.applySelection(vid, payload),
      onClearSelection: (vid) => this.clearSelection(vid),
      onExport: (entity) => this.exportEntity(entity),
    });
  }

  /** Create a session against `api` and mount the app under `root`. */
  static async boot(root: HTMLElement, api: Api): Promise<App> {
    const { schema, summaries } = await api.schema();
    const { session_id } = await api.createSession();
    const snap = await api.snapshot(session_id);
    const entities = schema.entities.map((e) => e.name);
    const app = new App(root, api, SessionModel.fromSnapshot(snap), summaries, entities);
    app.renderAll();
    app.subscribe();
    return app;
  }

  close(): void {
    this.stream?.close();
    this.stream = null;
  }

  private subscribe(): void {
    this.stream = openEventStream(
      this.api.eventsUrl(this.model.sessionId),
      (event) => {
        const delta = JSON.parse(event.data) as DeltaWire;
        void this.ingest(delta);
      },
    );
    this.stream.done.catch(() => this.showError("event stream lost"));
  }

  /** Apply a delta from either source and render what it touched. */
  private async ingest(delta: DeltaWire): Promise<void> {
    const result = this.model.applyDelta(delta);
    if (result === "stale") return;
    if (result === "gap") {
      await this.resync();
      return;
    }
    this.renderChatPane();
    this.dashboard.renderToolbar();
    const added = this.dashboard.syncViews();
    const stale = new Set([...delta.refresh, ...added]);
    await this.dashboard.refresh([...stale]);
  }

  private resync(): Promise<void> {
    // collapse concurrent gap reports into one refetch
    this.resyncing ??= (async () => {
      try {
        const snap = await this.api.snapshot(this.model.sessionId);
        this.model.resync(snap);
        this.renderAll();
        await this.dashboard.refresh();
      } finally {
        this.resyncing = null;
      }
    })();
    return this.resyncing;
  }

  private renderAll(): void {
    this.renderChatPane();
    this.dashboard.renderToolbar();
    this.dashboard.syncViews();
  }

  private renderChatPane(): void {
    renderChat(this.chatHost, this.model, this.summaries, {
      onSend: (text) => void this.sendMessage(text),
      onEdit: (fid, update) => void this.editFilter(fid, update),
    });
  }

  private showError(message: string): void {
    this.errorHost.textContent = message;
  }

  private clearError(): void {
    this.errorHost.textContent = "";
  }

  async sendMessage(text: string): Promise<void> {
    this.clearError();
    this.model.busy = true;
    this.renderChatPane();
    try {
      const delta = await this.api.sendMessage(this.model.sessionId, text);
      this.model.busy = false;
      await this.ingest(delta);
    } catch (err) {
      this.model.busy = false;
      this.report(err);
    } finally {
      this.renderChatPane();
    }
  }

  async editFilter(fid: string, update: FilterUpdate): Promise<void> {
    this.clearError();
    this.model.stageFilterEdit(fid, update);
    this.renderChatPane();
    try {
      const delta = await this.api.updateFilter(this.model.sessionId, fid, update);
      await this.ingest(delta);
    } catch (err) {
      this.model.dropFilterEdit(fid);
      this.renderChatPane();
      this.report(err);
    }
  }

  async removeFilter(fid: string): Promise<void> {
    this.clearError();
    try {
      const delta = await this.api.removeFilter(this.model.sessionId, fid);
      await this.ingest(delta);
    } catch (err) {
      this.report(err);
    }
  }

  async applySelection(vid: string, payload: SelectionPayload): Promise<void> {
    this.clearError();
    try {
      const delta = await this.api.applySelection(this.model.sessionId, vid, payload);
      await this.ingest(delta);
    } catch (err) {
      this.report(err);
    }
  }

  async clearSelection(vid: string): Promise<void> {
    if (!this.model.view(vid)?.selection) return;
    this.clearError();
    try {
      const delta = await this.api.clearSelection(this.model.sessionId, vid);
      await this.ingest(delta);
    } catch (err) {
      this.report(err);
    }
  }

  async exportEntity(entity: string): Promise<void> {
    this.clearError();
    try {
      const text = await this.api.exportText(this.model.sessionId, entity);
      downloadText(`${entity}.txt`, text);
    } catch (err) {
      this.report(err);
    }
  }

  private report(err: unknown): void {
    if (err instanceof ApiError) {
      this.showError(err.path ? `${err.message} (${err.path})` : err.message);
    } else {
      this.showError(err instanceof Error ? err.message : String(err));
    }
  }
}

/** Save `text` as a file; falls back to a data URI where blobs are missing. */
export function downloadText(filename: string, text: string): void {
  const anchor = document.createElement("a");
  if (typeof URL.createObjectURL === "function") {
    const url = URL.createObjectURL(new Blob([text], { type: "text/plain" }));
    anchor.href = url;
    anchor.download = filename;
    anchor.click();
    URL.revokeObjectURL(url);
  } else {
    anchor.href = `data:text/plain,${encodeURIComponent(text)}`;
    anchor.download = filename;
    anchor.click();
  }
}

export async function init(root: HTMLElement, api: Api): Promise<App> {
  return App.boot(root, api);
}
