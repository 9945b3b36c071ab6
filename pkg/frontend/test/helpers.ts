// Shared test scaffolding: a DOM polling loop and context stubs.

import type { ApiClient } from "../src/api.js";
import type { Role, SessionInfo } from "../src/model.js";
import type { Ctx } from "../src/view.js";

export async function until<T>(
  probe: () => T | null | undefined | false,
  what: string,
  timeoutMs = 10_000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = probe();
    if (value) return value;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
}

export function q<T extends Element>(root: ParentNode, selector: string): T {
  const node = root.querySelector(selector);
  if (node === null) throw new Error(`missing element ${selector}`);
  return node as T;
}

export function setInput(field: HTMLInputElement | HTMLTextAreaElement, value: string): void {
  field.value = value;
  field.dispatchEvent(new Event("input", { bubbles: true }));
}

export function submitForm(form: HTMLFormElement): void {
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

export function sessionFor(role: Role): SessionInfo {
  return {
    token: "test-token",
    role,
    display_name: "Test User",
    subject_id: "tester",
    uid: role === "policyholder" ? "INS-ACME-0001" : null,
    hospital_id: role === "hospital" ? "HOSP-001" : null,
    expires_at: "2026-01-01T00:00:00Z",
  };
}

/** Ctx over a partial client stub; only the stubbed calls may be used. */
export function ctxWith(api: Partial<ApiClient>, role: Role = "tpa"): Ctx {
  return {
    api: api as ApiClient,
    session: sessionFor(role),
    navigate: async () => {},
    authExpired: () => false,
  };
}
