// TPA scrutiny queue: every claim sitting in UNDER_SCRUTINY, with the
// figures an adjuster weighs (estimate against the policy's eligible
// amount) shown side by side. The authoritative verdict facts come back
// on the decision response and are surfaced in the banner; a card leaves
// the queue only after the gateway confirms the decision.

import { el, clear, moneyEl, notice, stateBadge } from "../dom.js";
import { formatStamp, shortId } from "../format.js";
import type { ClaimDetail } from "../model.js";
import { errorText, type Ctx, type View } from "../view.js";

export async function renderScrutinyQueue(ctx: Ctx): Promise<View> {
  const { api } = ctx;
  const banner = el("div", { "data-field": "banner" });
  const listWrap = el("div", { "data-field": "queue" });

  async function load(): Promise<void> {
    let details: ClaimDetail[];
    try {
      const { claims } = await api.listClaims("UNDER_SCRUTINY");
      details = await Promise.all(claims.map((c) => api.claim(c.claim_id)));
    } catch (err) {
      if (!ctx.authExpired(err)) {
        banner.replaceChildren(notice("error", errorText(err)));
      }
      return;
    }
    clear(listWrap);
    if (details.length === 0) {
      listWrap.append(el("div", { class: "empty" }, "the queue is empty"));
      return;
    }
    for (const claim of details) listWrap.append(card(claim));
  }

  function card(claim: ClaimDetail): HTMLElement {
    const notes = el("textarea", {
      placeholder: "scrutiny notes (required to deny)",
      "data-field": "notes",
    });
    const wrap = el("div", { class: "card queue-card", "data-claim": claim.claim_id });

    async function decide(decision: "approve" | "deny"): Promise<void> {
      banner.replaceChildren();
      const text = notes.value.trim();
      if (decision === "deny" && text === "") {
        banner.append(notice("error", "denial requires notes"));
        return;
      }
      try {
        const result = await api.scrutinize(
          claim.claim_id,
          decision,
          text === "" ? undefined : text,
        );
        banner.append(
          notice(
            "ok",
            `Claim ${shortId(claim.claim_id)} ${decision === "approve" ? "approved" : "denied"}, now ${result.state}. `,
            fact("hospital in network", result.hospital_in_network),
            fact("estimate within eligible", result.estimate_within_eligible),
          ),
        );
        wrap.remove();
        if (listWrap.querySelector(".queue-card") === null) {
          listWrap.append(el("div", { class: "empty" }, "the queue is empty"));
        }
      } catch (err) {
        if (ctx.authExpired(err)) return;
        banner.append(notice("error", errorText(err)));
        await load(); // a 409 means someone else decided first; resync
      }
    }

    const eligible = claim.policy?.eligible_amount ?? null;
    const within =
      eligible === null
        ? null
        : claim.estimated_expense.amount_minor <= eligible.amount_minor;

    wrap.append(
      el(
        "div",
        { class: "head" },
        el("span", { class: "cid" }, shortId(claim.claim_id)),
        stateBadge(claim.state),
        el("span", {}, claim.uid),
        el("span", { class: "meta" }, `submitted ${formatStamp(claim.submitted_at)}`),
      ),
      el(
        "div",
        { class: "facts" },
        el("span", { class: "fact" }, "hospital: ", el("strong", {}, claim.hospital_id)),
        el("span", { class: "fact" }, "estimated: ", moneyEl(claim.estimated_expense)),
        eligible === null
          ? el("span", { class: "fact" }, "eligible: ", el("strong", {}, "unknown"))
          : el("span", { class: "fact" }, "eligible: ", moneyEl(eligible)),
        within === null ? null : fact("estimate within eligible", within),
      ),
      el(
        "div",
        { class: "facts" },
        el("span", { class: "fact" }, "illness: ", el("strong", {}, claim.preauth.illness_details)),
        el(
          "span",
          { class: "fact" },
          "treatment: ",
          el("strong", {}, claim.preauth.proposed_treatment),
        ),
      ),
      el(
        "div",
        { class: "decide" },
        notes,
        el(
          "button",
          {
            class: "action",
            type: "button",
            "data-action": "ScrutinyApprove",
            onclick: () => void decide("approve"),
          },
          "Approve",
        ),
        el(
          "button",
          {
            class: "action danger",
            type: "button",
            "data-action": "ScrutinyDeny",
            onclick: () => void decide("deny"),
          },
          "Deny",
        ),
      ),
    );
    return wrap;
  }

  function fact(label: string, value: boolean): HTMLElement {
    return el("span", { class: "fact" }, `${label}: `, el("strong", {}, value ? "yes" : "no"));
  }

  await load();

  const root = el(
    "div",
    {},
    el(
      "div",
      { class: "toolbar" },
      el("h1", {}, "Scrutiny queue"),
      el("div", { class: "spacer" }),
      el("button", { class: "action", type: "button", onclick: () => void load() }, "Refresh"),
    ),
    banner,
    listWrap,
  );
  return {
    el: root,
    poll: async () => {
      // skip the cadence tick while the adjuster is typing in a card
      if (listWrap.contains(document.activeElement)) return;
      await load();
    },
  };
}
