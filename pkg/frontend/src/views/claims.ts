// Claim listing and the per-claim detail with its status timeline.
// The detail screen is also where workflow actions live; which buttons
// exist is decided by actionsFor alone, never by local state checks.

import { actionsFor, type ActionSpec } from "../actions.js";
import type { ApiClient } from "../api.js";
import { el, clear, moneyEl, notice, stateBadge } from "../dom.js";
import { formatStamp, rupeesToMinor, shortId } from "../format.js";
import { CLAIM_STATES, type ClaimDetail, type ClaimSummary } from "../model.js";
import { errorText, type Ctx, type View } from "../view.js";

const LIST_TITLES = {
  policyholder: "My claims",
  hospital: "Hospital claims",
  tpa: "All claims",
  admin: "Claims",
} as const;

export async function renderClaims(ctx: Ctx): Promise<View> {
  const { api, session } = ctx;
  const message = el("div");
  const tableWrap = el("div");

  const filter = el("select", { "data-field": "state-filter" }, el("option", { value: "" }, "All states"));
  for (const state of CLAIM_STATES) {
    filter.append(el("option", { value: state }, state));
  }
  filter.addEventListener("change", () => void load());

  async function load(): Promise<void> {
    message.replaceChildren();
    try {
      const chosen = filter.value === "" ? undefined : filter.value;
      const { claims } = await api.listClaims(chosen);
      drawTable(claims);
    } catch (err) {
      if (!ctx.authExpired(err)) message.append(notice("error", errorText(err)));
    }
  }

  function drawTable(claims: ClaimSummary[]): void {
    clear(tableWrap);
    if (claims.length === 0) {
      tableWrap.append(el("div", { class: "empty" }, "no claims to show"));
      return;
    }
    const body = el("tbody");
    for (const claim of claims) {
      body.append(
        el(
          "tr",
          {
            class: "row",
            "data-claim": claim.claim_id,
            onclick: () => void ctx.navigate({ name: "claim", claimId: claim.claim_id }),
          },
          el("td", {}, el("code", {}, shortId(claim.claim_id))),
          el("td", {}, stateBadge(claim.state)),
          el("td", {}, claim.uid),
          el("td", {}, claim.hospital_id),
          el("td", { class: "num" }, moneyEl(claim.estimated_expense)),
          el("td", {}, formatStamp(claim.submitted_at)),
        ),
      );
    }
    tableWrap.append(
      el(
        "table",
        { class: "listing" },
        el(
          "thead",
          {},
          el(
            "tr",
            {},
            el("th", {}, "Claim"),
            el("th", {}, "State"),
            el("th", {}, "UID"),
            el("th", {}, "Hospital"),
            el("th", { class: "num" }, "Estimated"),
            el("th", {}, "Submitted"),
          ),
        ),
        body,
      ),
    );
  }

  await load();

  const root = el(
    "div",
    {},
    el("h1", {}, LIST_TITLES[session.role]),
    el(
      "div",
      { class: "toolbar" },
      filter,
      el("div", { class: "spacer" }),
      el("button", { class: "action", type: "button", onclick: () => void load() }, "Refresh"),
    ),
    message,
    tableWrap,
  );
  return { el: root };
}

// -- detail ------------------------------------------------------------------

function pair(term: string, ...value: (Node | string)[]): Node[] {
  return [el("dt", {}, term), el("dd", {}, ...value)];
}

function detailBody(ctx: Ctx, claim: ClaimDetail, onAction: ActionRunner): HTMLElement {
  const grid = el(
    "dl",
    { class: "detail-grid" },
    ...pair("Identification number", claim.uid),
    ...pair("Hospital", claim.hospital_id),
    ...pair("Estimated expense", moneyEl(claim.estimated_expense)),
    ...pair("Submitted", formatStamp(claim.submitted_at)),
    ...pair("Illness", claim.preauth.illness_details),
    ...pair("Proposed treatment", claim.preauth.proposed_treatment),
    ...pair(
      "Treating doctor",
      `${claim.preauth.doctor_name} (${claim.preauth.doctor_registration_number})`,
    ),
  );
  if (claim.policy !== null) {
    grid.append(
      ...pair("Insurer", claim.policy.company_id),
      ...pair("Policy type", claim.policy.policy_type),
      ...pair("Eligible amount", moneyEl(claim.policy.eligible_amount)),
    );
  }
  if (claim.scrutiny !== null) {
    grid.append(
      ...pair(
        "Scrutiny",
        `${claim.scrutiny.decision} by ${claim.scrutiny.adjuster_id}`,
        claim.scrutiny.notes === null ? "" : ` (${claim.scrutiny.notes})`,
      ),
    );
  }
  if (claim.authorization !== null) {
    grid.append(...pair("Authorized amount", moneyEl(claim.authorization.authorized_amount)));
  }
  if (claim.payment !== null) {
    grid.append(
      ...pair("Actual expense", moneyEl(claim.payment.actual_expense)),
      ...pair(
        "Paid to hospital",
        moneyEl(claim.payment.paid_amount),
        ` (${claim.payment.payee_hospital_id})`,
      ),
    );
  }

  const sections = el("div", {}, grid);

  if (claim.settlement !== null) {
    sections.append(
      el(
        "div",
        { class: "refund-panel", "data-field": "refund" },
        el("div", {}, "Refund amount"),
        moneyEl(claim.settlement.refund_amount),
        el("div", { class: "meta" }, `settled ${formatStamp(claim.settlement.settled_at)}`),
      ),
    );
  }

  const actions = actionsFor(ctx.session.role, claim.allowed_events);
  const panel = actionPanel(ctx.api, claim, actions, onAction);
  if (panel !== null) sections.append(panel);

  const timeline = el("ol", { class: "timeline" });
  for (const entry of claim.history) {
    timeline.append(
      el(
        "li",
        { "data-event": entry.event },
        el("span", { class: "event" }, entry.event),
        el(
          "div",
          { class: "meta" },
          `${entry.from_state} → ${entry.to_state} · ${formatStamp(entry.at)} · ${entry.actor}`,
        ),
      ),
    );
  }
  sections.append(el("h2", {}, "Timeline"), timeline);
  return sections;
}

type ActionRunner = (run: () => Promise<(Node | string)[]>) => Promise<void>;

function actionPanel(
  claimApi: ApiClient,
  claim: ClaimDetail,
  actions: ActionSpec[],
  onAction: ActionRunner,
): HTMLElement | null {
  if (actions.length === 0) return null;
  const panel = el("div", { class: "card", "data-field": "actions" }, el("h2", {}, "Actions"));

  const scrutiny = actions.filter((a) => a.kind === "scrutiny");
  if (scrutiny.length > 0) {
    const notes = el("textarea", { placeholder: "scrutiny notes", "data-field": "notes" });
    const row = el("div", { class: "decide" }, notes);
    for (const action of scrutiny) {
      const decision = action.event === "ScrutinyDeny" ? "deny" : "approve";
      row.append(
        el(
          "button",
          {
            class: decision === "deny" ? "action danger" : "action",
            type: "button",
            "data-action": action.event,
            onclick: () =>
              void onAction(async () => {
                const text = notes.value.trim();
                if (decision === "deny" && text === "") {
                  throw new Error("denial requires notes");
                }
                const result = await claimApi.scrutinize(
                  claim.claim_id,
                  decision,
                  text === "" ? undefined : text,
                );
                return [
                  `decision recorded, now ${result.state}. `,
                  factChip("hospital in network", result.hospital_in_network),
                  factChip("estimate within eligible", result.estimate_within_eligible),
                ];
              }),
          },
          action.label,
        ),
      );
    }
    panel.append(row);
  }

  const simpleRow = el("div", { class: "decide" });
  for (const action of actions) {
    if (action.kind === "authorize") {
      simpleRow.append(
        el(
          "button",
          {
            class: "action",
            type: "button",
            "data-action": action.event,
            onclick: () =>
              void onAction(async () => {
                const result = await claimApi.authorize(claim.claim_id);
                return ["cash authorized: ", moneyEl(result.authorized_amount)];
              }),
          },
          action.label,
        ),
      );
    } else if (action.kind === "settle") {
      simpleRow.append(
        el(
          "button",
          {
            class: "action",
            type: "button",
            "data-action": action.event,
            onclick: () =>
              void onAction(async () => {
                const result = await claimApi.settle(claim.claim_id);
                return ["claim settled, refund ", moneyEl(result.refund_amount)];
              }),
          },
          action.label,
        ),
      );
    }
  }
  if (simpleRow.childNodes.length > 0) panel.append(simpleRow);

  const payment = actions.find((a) => a.kind === "payment");
  if (payment !== undefined) {
    const actual = el("input", {
      placeholder: "actual expense (INR)",
      inputmode: "decimal",
      "data-field": "actual-expense",
    });
    panel.append(
      el(
        "div",
        { class: "decide" },
        actual,
        el(
          "button",
          {
            class: "action",
            type: "button",
            "data-action": payment.event,
            onclick: () =>
              void onAction(async () => {
                const minor = rupeesToMinor(actual.value);
                if (minor === null) {
                  throw new Error("enter a positive rupee amount, two decimals at most");
                }
                const result = await claimApi.payment(claim.claim_id, minor);
                return ["payment recorded: ", moneyEl(result.paid_amount)];
              }),
          },
          payment.label,
        ),
      ),
    );
  }

  return panel;
}

function factChip(label: string, value: boolean): HTMLElement {
  return el("span", { class: "fact" }, `${label}: `, el("strong", {}, value ? "yes" : "no"));
}

export async function renderClaimDetail(ctx: Ctx, claimId: string): Promise<View> {
  const banner = el("div", { "data-field": "banner" });
  const body = el("div");

  async function refresh(): Promise<void> {
    let claim: ClaimDetail;
    try {
      claim = await ctx.api.claim(claimId);
    } catch (err) {
      if (!ctx.authExpired(err)) {
        clear(body);
        body.append(notice("error", errorText(err)));
      }
      return;
    }
    clear(body);
    body.append(
      el(
        "div",
        { class: "toolbar" },
        el("h1", {}, `Claim ${shortId(claim.claim_id)}`),
        stateBadge(claim.state),
        el("div", { class: "spacer" }),
        el(
          "button",
          { class: "action", type: "button", onclick: () => void refresh() },
          "Refresh",
        ),
      ),
      detailBody(ctx, claim, runAction),
    );
  }

  async function runAction(run: () => Promise<(Node | string)[]>): Promise<void> {
    banner.replaceChildren();
    try {
      const parts = await run();
      banner.append(notice("ok", ...parts));
      await refresh();
    } catch (err) {
      if (!ctx.authExpired(err)) banner.append(notice("error", errorText(err)));
    }
  }

  await refresh();
  return { el: el("div", {}, banner, body) };
}
