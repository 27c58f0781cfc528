/** HTML-string renderers; pure so the view logic is testable without a DOM. */

import type { Status } from "./model.js";

function esc(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => `&#${ch.charCodeAt(0)};`);
}

export function renderChain(order: string[]): string {
  if (order.length === 0) return "<em>(empty chain)</em>";
  return order.map((g) => `<span class="fn">${esc(g)}</span>`).join(" → ");
}

export function renderOrders(status: Status): string {
  const changed = status.current_order.join() !== status.default_order.join();
  return `
    <div class="order-row"><span class="label">current</span> ${renderChain(status.current_order)}
      ${changed ? '<span class="badge reordered">reordered</span>' : '<span class="badge">standard</span>'}</div>
    <div class="order-row"><span class="label">default</span> ${renderChain(status.default_order)}</div>
    <div class="order-row"><span class="label">epoch</span> ${status.epoch}</div>`;
}

export function renderGroups(status: Status): string {
  const names = Object.keys(status.groups).sort();
  if (names.length === 0) {
    return "<p><em>no security function groups registered</em></p>";
  }
  const { regular, imminent } = status.thresholds;
  const rows = names.map((name) => {
    const group = status.groups[name];
    const count = group.attack_counter;
    const level = count >= imminent ? "crit" : count >= regular ? "warn" : "ok";
    return `<tr class="${level}"><td>${esc(name)}</td><td>${count}</td><td>${esc(
      group.functions.join(", "),
    )}</td></tr>`;
  });
  return `<table><thead><tr><th>group</th><th>attacks</th><th>functions</th></tr></thead>
    <tbody>${rows.join("")}</tbody></table>
    <p class="hint">thresholds: regular ${regular}, imminent ${imminent}</p>`;
}

export function renderEvents(status: Status): string {
  if (status.events.length === 0) return "<p><em>no reorder events yet</em></p>";
  const rows = [...status.events]
    .reverse()
    .map(
      (e) =>
        `<tr><td>${e.time.toFixed(0)}s</td><td class="trigger-${esc(e.trigger)}">${esc(
          e.trigger,
        )}</td><td>${esc(e.order.join(" → "))}</td><td>${e.epoch}</td></tr>`,
    );
  return `<table><thead><tr><th>time</th><th>trigger</th><th>order</th><th>epoch</th></tr></thead>
    <tbody>${rows.join("")}</tbody></table>`;
}

export function renderPicker(remaining: string[], chosen: string[], complete: boolean): string {
  const picks = remaining
    .map((g) => `<button type="button" class="pick" data-group="${esc(g)}">${esc(g)}</button>`)
    .join(" ");
  return `
    <div class="picked">${renderChain(chosen)}</div>
    <div class="choices">${picks || "<em>chain complete</em>"}</div>
    <button type="button" id="submit-order" ${complete ? "" : "disabled"}>apply order</button>
    <button type="button" id="reset-order">clear</button>`;
}
