// Settlement desk: claims waiting on money movement. The actual forms
// live on the claim detail; this screen is the worklist that gets a
// desk user there.

import { el, clear, moneyEl, notice, stateBadge } from "../dom.js";
import { formatStamp, shortId } from "../format.js";
import type { ClaimSummary } from "../model.js";
import { errorText, type Ctx, type View } from "../view.js";

export async function renderSettlement(ctx: Ctx): Promise<View> {
  const { api } = ctx;
  const message = el("div");
  const authorizedWrap = el("div", { "data-field": "authorized" });
  const paidWrap = el("div", { "data-field": "paid" });

  function drawRows(wrap: HTMLElement, claims: ClaimSummary[], emptyText: string): void {
    clear(wrap);
    if (claims.length === 0) {
      wrap.append(el("div", { class: "empty" }, emptyText));
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
          el("td", {}, claim.hospital_id),
          el("td", { class: "num" }, moneyEl(claim.estimated_expense)),
          el("td", {}, formatStamp(claim.submitted_at)),
        ),
      );
    }
    wrap.append(
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
            el("th", {}, "Hospital"),
            el("th", { class: "num" }, "Estimated"),
            el("th", {}, "Submitted"),
          ),
        ),
        body,
      ),
    );
  }

  async function load(): Promise<void> {
    message.replaceChildren();
    try {
      const [authorized, paid] = await Promise.all([
        api.listClaims("CASH_AUTHORIZED"),
        api.listClaims("PAID"),
      ]);
      drawRows(authorizedWrap, authorized.claims, "nothing awaiting payment");
      drawRows(paidWrap, paid.claims, "nothing awaiting settlement");
    } catch (err) {
      if (!ctx.authExpired(err)) message.append(notice("error", errorText(err)));
    }
  }

  await load();

  const root = el(
    "div",
    {},
    el(
      "div",
      { class: "toolbar" },
      el("h1", {}, "Settlement"),
      el("div", { class: "spacer" }),
      el("button", { class: "action", type: "button", onclick: () => void load() }, "Refresh"),
    ),
    message,
    el("h2", {}, "Awaiting payment (cash authorized)"),
    authorizedWrap,
    el("h2", {}, "Awaiting settlement (paid)"),
    paidWrap,
  );
  return { el: root, poll: load };
}
