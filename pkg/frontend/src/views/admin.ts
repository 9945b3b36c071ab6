// Service health panel: the registry as the monitor sees it, the
// metrics window, and a manual bind/unbind switch per instance.

import { el, clear, notice, stateBadge } from "../dom.js";
import { formatStamp } from "../format.js";
import type { MetricsSnapshot, ServiceEntry } from "../model.js";
import { errorText, type Ctx, type View } from "../view.js";

function ms(value: number | null): string {
  return value === null ? "–" : `${value.toFixed(1)} ms`;
}

export async function renderAdmin(ctx: Ctx): Promise<View> {
  const { api } = ctx;
  const message = el("div");
  const registryWrap = el("div", { "data-field": "registry" });
  const metricsWrap = el("div", { "data-field": "metrics" });

  async function flip(entry: ServiceEntry): Promise<void> {
    message.replaceChildren();
    try {
      await api.setServiceState(entry.service_id, entry.state === "bound" ? "unbound" : "bound");
      await load();
    } catch (err) {
      if (!ctx.authExpired(err)) message.append(notice("error", errorText(err)));
    }
  }

  function drawRegistry(services: ServiceEntry[]): void {
    clear(registryWrap);
    const body = el("tbody");
    for (const entry of services) {
      body.append(
        el(
          "tr",
          { "data-service": entry.service_id },
          el("td", {}, entry.name),
          el("td", {}, entry.version),
          el("td", {}, el("code", {}, entry.endpoint)),
          el("td", {}, stateBadge(entry.state)),
          el("td", { class: "num" }, String(entry.health.consecutive_failures)),
          el("td", { class: "num" }, String(entry.health.consecutive_successes)),
          el(
            "td",
            {},
            entry.health.last_probe_at === null ? "–" : formatStamp(entry.health.last_probe_at),
          ),
          el(
            "td",
            {},
            el(
              "button",
              {
                class: entry.state === "bound" ? "action danger" : "action",
                type: "button",
                "data-action": "toggle",
                onclick: () => void flip(entry),
              },
              entry.state === "bound" ? "Unbind" : "Bind",
            ),
          ),
        ),
      );
    }
    registryWrap.append(
      el(
        "table",
        { class: "listing" },
        el(
          "thead",
          {},
          el(
            "tr",
            {},
            el("th", {}, "Service"),
            el("th", {}, "Version"),
            el("th", {}, "Endpoint"),
            el("th", {}, "State"),
            el("th", { class: "num" }, "Consec. fails"),
            el("th", { class: "num" }, "Consec. successes"),
            el("th", {}, "Last probe"),
            el("th", {}, ""),
          ),
        ),
        body,
      ),
    );
  }

  function drawMetrics(snapshot: MetricsSnapshot): void {
    clear(metricsWrap);
    const body = el("tbody");
    for (const m of snapshot.services) {
      body.append(
        el(
          "tr",
          {},
          el("td", {}, m.name),
          el("td", {}, stateBadge(m.state)),
          el("td", { class: "num" }, `${(m.availability * 100).toFixed(1)}%`),
          el("td", { class: "num" }, ms(m.p50_ms)),
          el("td", { class: "num" }, ms(m.p95_ms)),
          el("td", { class: "num" }, String(m.probes_total)),
          el("td", { class: "num" }, String(m.failures_total)),
        ),
      );
    }
    metricsWrap.append(
      el(
        "div",
        { class: "facts" },
        el(
          "span",
          { class: "fact" },
          "window: ",
          el("strong", {}, `${snapshot.window_seconds} s`),
        ),
        el(
          "span",
          { class: "fact" },
          "schema violations: ",
          el("strong", {}, String(snapshot.schema_violations_total)),
        ),
        el(
          "span",
          { class: "fact" },
          "generated: ",
          el("strong", {}, formatStamp(snapshot.generated_at)),
        ),
      ),
      el(
        "table",
        { class: "listing" },
        el(
          "thead",
          {},
          el(
            "tr",
            {},
            el("th", {}, "Service"),
            el("th", {}, "State"),
            el("th", { class: "num" }, "Availability"),
            el("th", { class: "num" }, "p50"),
            el("th", { class: "num" }, "p95"),
            el("th", { class: "num" }, "Probes"),
            el("th", { class: "num" }, "Failures"),
          ),
        ),
        body,
      ),
    );
  }

  async function load(): Promise<void> {
    message.replaceChildren();
    try {
      const [services, snapshot] = await Promise.all([api.services(), api.metrics()]);
      drawRegistry(services.services);
      drawMetrics(snapshot);
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
      el("h1", {}, "Service health"),
      el("div", { class: "spacer" }),
      el("button", { class: "action", type: "button", onclick: () => void load() }, "Refresh"),
    ),
    message,
    el("h2", {}, "Registry"),
    registryWrap,
    el("h2", {}, "Probe metrics"),
    metricsWrap,
  );
  return { el: root, poll: load };
}
