/** DOM wiring: one polling loop, one reorder form, one stale banner. */

import { ApiClient } from "./api.js";
import { apiBase, OrderBuilder, Status, validatePermutation } from "./model.js";
import { renderEvents, renderGroups, renderOrders, renderPicker } from "./render.js";

const POLL_INTERVAL_MS = 1000;

const client = new ApiClient(apiBase(window.location));
const builder = new OrderBuilder();

let lastStatus: Status | null = null;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function setBanner(text: string | null): void {
  const banner = el("banner");
  banner.textContent = text ?? "";
  banner.classList.toggle("hidden", text === null);
}

function renderForm(): void {
  el("reorder").innerHTML = renderPicker(builder.remaining, builder.order, builder.complete);
  for (const button of el("reorder").querySelectorAll<HTMLButtonElement>("button.pick")) {
    button.addEventListener("click", () => {
      builder.pick(button.dataset.group ?? "");
      renderForm();
    });
  }
  el("reset-order").addEventListener("click", () => {
    builder.reset();
    renderForm();
  });
  el("submit-order").addEventListener("click", () => void submitOrder());
}

function renderStatus(status: Status): void {
  lastStatus = status;
  el("orders").innerHTML = renderOrders(status);
  el("groups").innerHTML = renderGroups(status);
  el("events").innerHTML = renderEvents(status);
  builder.syncGroups(Object.keys(status.groups));
  renderForm();
}

async function submitOrder(): Promise<void> {
  const groups = lastStatus ? Object.keys(lastStatus.groups) : [];
  const problem = validatePermutation(builder.order, groups);
  const note = el("form-note");
  if (problem !== null) {
    note.textContent = problem;
    return;
  }
  try {
    const rejected = await client.submitOrder(builder.order);
    note.textContent = rejected === null ? "order applied" : rejected.detail;
    if (rejected === null) builder.reset();
  } catch (err) {
    setBanner(`controller unreachable: ${err}`);
  }
}

async function poll(): Promise<void> {
  try {
    const status = await client.fetchStatus();
    setBanner(null);
    renderStatus(status);
  } catch (err) {
    // keep the last rendered data; only flag it as stale
    setBanner(`stale: last poll failed (${err})`);
  }
}

window.addEventListener("DOMContentLoaded", () => {
  void poll();
  setInterval(() => void poll(), POLL_INTERVAL_MS);
});
