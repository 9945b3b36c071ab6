// Mirror of the gateway's role matrix plus the mapping from workflow
// events to user-facing actions. A button is offered iff the event is
// in the claim's allowed_events AND the matrix grants the group to the
// logged-in role; the machine-fired events have no action entry at all,
// so they can never surface as buttons.

import type { Role } from "./model.js";

export const GROUP_ROLES: Record<string, readonly Role[]> = {
  "preauth:submit": ["policyholder", "hospital"],
  "claims:list": ["policyholder", "hospital", "tpa"],
  "claims:view": ["policyholder", "hospital", "tpa"],
  "claims:scrutiny": ["tpa"],
  "claims:authorize": ["tpa"],
  "claims:payment": ["hospital", "tpa"],
  "claims:settle": ["tpa"],
  "hospitals:list": ["policyholder", "hospital"],
  admin: ["admin"],
};

export function roleAllows(role: Role, group: string): boolean {
  const roles = GROUP_ROLES[group];
  return roles !== undefined && roles.includes(role);
}

export type ActionKind = "scrutiny" | "authorize" | "payment" | "settle";

export interface ActionSpec {
  event: string;
  kind: ActionKind;
  label: string;
  group: string;
}

export const EVENT_ACTIONS: Record<string, Omit<ActionSpec, "event">> = {
  ScrutinyApprove: { kind: "scrutiny", label: "Approve", group: "claims:scrutiny" },
  ScrutinyDeny: { kind: "scrutiny", label: "Deny", group: "claims:scrutiny" },
  Authorize: { kind: "authorize", label: "Authorize cash", group: "claims:authorize" },
  PaymentDone: { kind: "payment", label: "Record payment", group: "claims:payment" },
  Settle: { kind: "settle", label: "Settle claim", group: "claims:settle" },
};

export function actionsFor(role: Role, allowedEvents: readonly string[]): ActionSpec[] {
  const actions: ActionSpec[] = [];
  for (const event of allowedEvents) {
    const spec = EVENT_ACTIONS[event];
    if (spec !== undefined && roleAllows(role, spec.group)) {
      actions.push({ event, ...spec });
    }
  }
  return actions;
}
