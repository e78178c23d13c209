// Typed client for the discovery server's HTTP API.

import type {
  ApiErrorBody,
  DeltaWire,
  FilterUpdate,
  SchemaWire,
  SelectionPayload,
  SnapshotWire,
  SummaryWire,
  TableWire,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly path?: string,
  ) {
    super(message);
  }
}

async function fail(response: Response): Promise<never> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    // non-JSON error body; fall through to a generic error
  }
  if (body && typeof body.code === "string") {
    throw new ApiError(response.status, body.code, body.message, body.path);
  }
  throw new ApiError(response.status, "http_error", `HTTP ${response.status}`);
}

export class Api {
  constructor(readonly base: string = "") {}

  private async json<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.base + path, init);
    if (!response.ok) await fail(response);
    return (await response.json()) as T;
  }

  schema(): Promise<{ schema: SchemaWire; summaries: SummaryWire[] }> {
    return this.json("GET", "/api/schema");
  }

  createSession(): Promise<{ session_id: string; seq: number }> {
    return this.json("POST", "/api/sessions");
  }

  snapshot(sid: string): Promise<SnapshotWire> {
    return this.json("GET", `/api/sessions/${sid}`);
  }

  sendMessage(sid: string, text: string): Promise<DeltaWire> {
    return this.json("POST", `/api/sessions/${sid}/messages`, { text });
  }

  updateFilter(sid: string, fid: string, payload: FilterUpdate): Promise<DeltaWire> {
    return this.json("PATCH", `/api/sessions/${sid}/filters/${fid}`, payload);
  }

  removeFilter(sid: string, fid: string): Promise<DeltaWire> {
    return this.json("DELETE", `/api/sessions/${sid}/filters/${fid}`);
  }

  applySelection(sid: string, vid: string, payload: SelectionPayload): Promise<DeltaWire> {
    return this.json("POST", `/api/sessions/${sid}/views/${vid}/selection`, payload);
  }

  clearSelection(sid: string, vid: string): Promise<DeltaWire> {
    return this.json("DELETE", `/api/sessions/${sid}/views/${vid}/selection`);
  }

  viewData(sid: string, vid: string): Promise<TableWire> {
    return this.json("GET", `/api/sessions/${sid}/views/${vid}/data`);
  }

  rows(sid: string, entity: string, offset = 0, limit?: number): Promise<TableWire> {
    const query = limit === undefined
      ? `offset=${offset}`
      : `offset=${offset}&limit=${limit}`;
    return this.json("GET", `/api/sessions/${sid}/entities/${entity}/rows?${query}`);
  }

  exportIds(sid: string, entity?: string): Promise<{ entity: string; ids: string[] }> {
    const query = entity === undefined ? "" : `?entity=${entity}`;
    return this.json("GET", `/api/sessions/${sid}/export${query}`);
  }

  async exportText(sid: string, entity?: string): Promise<string> {
    const query = entity === undefined ? "format=text" : `entity=${entity}&format=text`;
    const response = await fetch(`${this.base}/api/sessions/${sid}/export?${query}`);
    if (!response.ok) await fail(response);
    return response.text();
  }

  eventsUrl(sid: string): string {
    return `${this.base}/api/sessions/${sid}/events`;
  }
}
