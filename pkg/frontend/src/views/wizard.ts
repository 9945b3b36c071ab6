// Pre-authorization wizard. Ownership is enforced by the gateway; the
// form simply locks the fields the session already determines (own uid
// for policyholders, own desk for hospital users) so an owned submission
// is the only thing it can express.

import { el, moneyEl, notice, stateBadge } from "../dom.js";
import { rupeesToMinor, shortId } from "../format.js";
import type { Hospital, PreAuthDraft } from "../model.js";
import { errorText, type Ctx, type View } from "../view.js";

export async function renderWizard(ctx: Ctx): Promise<View> {
  const { api, session } = ctx;
  let hospitals: Hospital[] = [];
  let loadError: string | null = null;
  try {
    hospitals = (await api.hospitals()).hospitals;
  } catch (err) {
    if (ctx.authExpired(err)) return { el: el("div") };
    loadError = errorText(err);
  }

  const result = el("div", { "data-field": "result" });

  const uid = el("input", {
    name: "uid",
    "data-field": "uid",
    value: session.role === "policyholder" ? (session.uid ?? "") : "",
    disabled: session.role === "policyholder",
  });
  const hospital = el("select", { name: "hospital", "data-field": "hospital" });
  for (const entry of hospitals) {
    hospital.append(
      el("option", { value: entry.hospital_id }, `${entry.name} (${entry.hospital_id})`),
    );
  }
  if (session.role === "hospital" && session.hospital_id !== null) {
    hospital.value = session.hospital_id;
    hospital.disabled = true;
  }
  const illness = el("textarea", { name: "illness", "data-field": "illness" });
  const treatment = el("textarea", { name: "treatment", "data-field": "treatment" });
  const expense = el("input", {
    name: "expense",
    "data-field": "expense",
    inputmode: "decimal",
    placeholder: "50000 or 50000.00",
  });
  const doctorName = el("input", { name: "doctor_name", "data-field": "doctor-name" });
  const doctorReg = el("input", {
    name: "doctor_reg",
    "data-field": "doctor-reg",
    placeholder: "MCI/2015/0042",
  });
  const submit = el("button", { class: "primary", type: "submit" }, "Submit pre-authorization");

  function draft(): PreAuthDraft | string {
    const minor = rupeesToMinor(expense.value);
    if (minor === null) return "enter a positive rupee amount, two decimals at most";
    const fields = {
      uid: uid.value.trim(),
      hospital_id: hospital.value,
      illness_details: illness.value.trim(),
      proposed_treatment: treatment.value.trim(),
      doctor_name: doctorName.value.trim(),
      doctor_registration_number: doctorReg.value.trim(),
    };
    for (const [key, value] of Object.entries(fields)) {
      if (value === "") return `${key.replaceAll("_", " ")} is required`;
    }
    return { ...fields, estimated_expense: { amount_minor: minor, currency: "INR" } };
  }

  async function send(): Promise<void> {
    result.replaceChildren();
    const built = draft();
    if (typeof built === "string") {
      result.append(notice("error", built));
      return;
    }
    submit.disabled = true;
    try {
      const outcome = await api.submitPreAuth(built);
      const viewLink = el(
        "button",
        {
          class: "action",
          type: "button",
          onclick: () => void ctx.navigate({ name: "claim", claimId: outcome.claim_id }),
        },
        "View claim",
      );
      if (outcome.state === "ID_REJECTED") {
        result.append(
          notice(
            "warn",
            `Claim ${shortId(outcome.claim_id)} was rejected: `,
            el("span", { "data-field": "rejection-message" }, outcome.message ?? ""),
            " ",
            viewLink,
          ),
        );
      } else {
        result.append(
          notice(
            "ok",
            `Claim ${shortId(outcome.claim_id)} submitted for `,
            moneyEl(built.estimated_expense),
            ", now ",
            stateBadge(outcome.state),
            " ",
            viewLink,
          ),
        );
      }
    } catch (err) {
      if (!ctx.authExpired(err)) result.append(notice("error", errorText(err)));
    } finally {
      submit.disabled = false;
    }
  }

  const form = el(
    "form",
    {
      class: "stack",
      onsubmit: (event: Event) => {
        event.preventDefault();
        void send();
      },
    },
    el("label", {}, "Identification number (health card)", uid),
    el("label", {}, "Network hospital", hospital),
    el("label", {}, "Illness details", illness),
    el("label", {}, "Proposed treatment", treatment),
    el("label", {}, "Estimated expense (INR)", expense),
    el("label", {}, "Treating doctor", doctorName),
    el("label", {}, "Doctor registration number", doctorReg),
    submit,
  );

  const root = el(
    "div",
    {},
    el("h1", {}, "New pre-authorization"),
    loadError === null ? null : notice("error", loadError),
    result,
    el("div", { class: "card" }, form),
  );
  return { el: root };
}
