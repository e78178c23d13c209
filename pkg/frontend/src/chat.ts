// Chat pane: transcript with inline filter widgets, plus the input row.
// Re-rendered wholesale from the session model; widgets reflect staged
// edits so an in-flight PATCH doesn't snap back before its delta lands.

import type { SessionModel } from "./model.js";
import type { FilterUpdate, SummaryWire } from "./types.js";
import { renderWidget } from "./widgets.js";

export interface ChatCallbacks {
  onSend(text: string): void;
  onEdit(filterId: string, update: FilterUpdate): void;
}

export function summaryFor(
  summaries: SummaryWire[],
  entity: string,
  field: string,
): SummaryWire | undefined {
  return summaries.find((s) => s.entity === entity && s.field === field);
}

export function renderChat(
  host: HTMLElement,
  model: SessionModel,
  summaries: SummaryWire[],
  callbacks: ChatCallbacks,
): void {
  host.textContent = "";
  const log = document.createElement("div");
  log.className = "chat-log";

  for (const entry of model.chat) {
    const item = document.createElement("div");
    item.className = `chat-entry ${entry.role}`;
    const text = document.createElement("div");
    text.className = "chat-text";
    text.textContent = entry.text;
    item.appendChild(text);

    if (entry.widget) {
      const filter = model.effectiveFilter(entry.widget);
      if (filter) {
        const summary = summaryFor(summaries, filter.entity, filter.field);
        item.appendChild(renderWidget(filter, summary, {
          onEdit: callbacks.onEdit,
        }));
      } else {
        const gone = document.createElement("div");
        gone.className = "widget-removed";
        gone.textContent = "(filter removed)";
        item.appendChild(gone);
      }
    }
    log.appendChild(item);
  }
  host.appendChild(log);

  const row = document.createElement("form");
  row.className = "chat-input";
  const input = document.createElement("input");
  input.type = "text";
  input.placeholder = "ask about the data";
  input.disabled = model.busy;
  const send = document.createElement("button");
  send.type = "submit";
  send.textContent = model.busy ? "…" : "send";
  send.disabled = model.busy;
  if (model.busy) {
    const spinner = document.createElement("span");
    spinner.className = "spinner";
    row.appendChild(spinner);
  }
  row.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = input.value.trim();
    if (!text || model.busy) return;
    input.value = "";
    callbacks.onSend(text);
  });
  row.append(input, send);
  host.appendChild(row);
  log.scrollTop = log.scrollHeight;
}
