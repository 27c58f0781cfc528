/** Typed view of GET /api/status plus the pure logic behind the reorder form. */

export interface GroupStats {
  attack_counter: number;
  functions: string[];
}

export interface ReorderEvent {
  time: number;
  order: string[];
  trigger: string;
  epoch: number;
  counters: Record<string, number>;
}

export interface Status {
  time: number;
  current_order: string[];
  default_order: string[];
  epoch: number;
  groups: Record<string, GroupStats>;
  registry: Record<string, unknown>;
  thresholds: { regular: number; imminent: number };
  events: ReorderEvent[];
}

export function sameOrder(a: string[], b: string[]): boolean {
  return a.length === b.length && a.every((g, i) => g === b[i]);
}

/** Mirrors the server-side check: the submitted order must be a permutation
 * of the currently registered groups. */
export function validatePermutation(order: string[], groups: string[]): string | null {
  const seen = new Set<string>();
  for (const g of order) {
    if (seen.has(g)) return `duplicate group: ${g}`;
    if (!groups.includes(g)) return `unknown group: ${g}`;
    seen.add(g);
  }
  if (order.length < groups.length) {
    const missing = groups.filter((g) => !seen.has(g));
    return `missing groups: ${missing.join(", ")}`;
  }
  return null;
}

/** Builds a manual order click by click; by construction it can only ever
 * produce permutations of the group set it was last synced with. */
export class OrderBuilder {
  private chosen: string[] = [];
  private groups: string[] = [];

  /** Re-sync with the latest snapshot; drops picks that no longer exist. */
  syncGroups(groups: string[]): void {
    this.groups = [...groups].sort();
    this.chosen = this.chosen.filter((g) => groups.includes(g));
  }

  pick(group: string): void {
    if (this.groups.includes(group) && !this.chosen.includes(group)) {
      this.chosen.push(group);
    }
  }

  reset(): void {
    this.chosen = [];
  }

  get order(): string[] {
    return [...this.chosen];
  }

  get remaining(): string[] {
    return this.groups.filter((g) => !this.chosen.includes(g));
  }

  get complete(): boolean {
    return this.groups.length > 0 && this.chosen.length === this.groups.length;
  }
}

/** Where the controller lives: ?api=<base> beats same-origin. */
export function apiBase(location: { origin: string; search: string }): string {
  const fromQuery = new URLSearchParams(location.search).get("api");
  return (fromQuery ?? location.origin).replace(/\/$/, "");
}
