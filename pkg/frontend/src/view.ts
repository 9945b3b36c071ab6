// Contract between the shell and the screens. A view owns one element;
// the shell mounts it, drives its poll() on the app cadence, and calls
// dispose() before switching away.

import type { ApiClient } from "./api.js";
import { el, notice } from "./dom.js";
import type { SessionInfo } from "./model.js";

export interface Route {
  name: string;
  claimId?: string;
}

export interface View {
  el: HTMLElement;
  poll?(): Promise<void>;
  dispose?(): void;
}

export interface Ctx {
  api: ApiClient;
  session: SessionInfo;
  navigate(route: Route): Promise<void>;
  /** Returns true when err was a 401 and the shell took over. */
  authExpired(err: unknown): boolean;
}

export function errorText(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}

export function errorView(err: unknown): View {
  return { el: el("div", {}, notice("error", errorText(err))) };
}
