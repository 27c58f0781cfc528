/** Thin fetch client for the controller endpoints the dashboard consumes. */

import type { Status } from "./model.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface OrderRejected {
  status: number;
  detail: string;
}

export class ApiClient {
  private queue: Promise<unknown> = Promise.resolve();

  constructor(
    private base: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  /** Serializes requests: at most one in flight, submissions queue behind polls. */
  private enqueue<T>(op: () => Promise<T>): Promise<T> {
    const next = this.queue.then(op, op);
    this.queue = next.catch(() => undefined);
    return next;
  }

  fetchStatus(): Promise<Status> {
    return this.enqueue(async () => {
      const response = await this.fetchFn(`${this.base}/api/status`);
      if (!response.ok) throw new Error(`status ${response.status}`);
      return (await response.json()) as Status;
    });
  }

  /** Resolves with null on success, with the server's complaint on 400. */
  submitOrder(order: string[]): Promise<OrderRejected | null> {
    return this.enqueue(async () => {
      const response = await this.fetchFn(`${this.base}/api/order`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ order }),
      });
      if (response.ok) return null;
      let detail = `rejected with status ${response.status}`;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the generic detail
      }
      return { status: response.status, detail };
    });
  }
}
