// Shell: session, navigation, header chrome, and the poll cadence.
// Routes are in-memory state; every screen is reachable from the nav,
// which offers only the routes the gateway's role matrix would let the
// logged-in role use.

import { ApiClient, ApiError } from "./api.js";
import { roleAllows } from "./actions.js";
import { el, clear } from "./dom.js";
import type { Role, SessionInfo } from "./model.js";
import { errorView, type Ctx, type Route, type View } from "./view.js";
import { renderAdmin } from "./views/admin.js";
import { renderClaimDetail, renderClaims } from "./views/claims.js";
import { renderLogin } from "./views/login.js";
import { renderScrutinyQueue } from "./views/scrutiny.js";
import { renderSettlement } from "./views/settlement.js";
import { renderWizard } from "./views/wizard.js";

export interface AppOptions {
  pollMs?: number;
}

interface NavItem {
  route: string;
  group: string;
  label(role: Role): string;
}

const NAV: NavItem[] = [
  {
    route: "claims",
    group: "claims:list",
    label: (role) =>
      role === "policyholder" ? "My claims" : role === "hospital" ? "Hospital claims" : "Claims",
  },
  { route: "wizard", group: "preauth:submit", label: () => "New pre-auth" },
  { route: "queue", group: "claims:scrutiny", label: () => "Scrutiny queue" },
  { route: "settlement", group: "claims:payment", label: () => "Settlement" },
  { route: "admin", group: "admin", label: () => "Service health" },
];

function homeRoute(role: Role): Route {
  if (role === "tpa") return { name: "queue" };
  if (role === "admin") return { name: "admin" };
  return { name: "claims" };
}

export class App {
  private session: SessionInfo | null = null;
  private route: Route = { name: "login" };
  private view: View | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private epoch = 0;
  private readonly pollMs: number;

  constructor(
    private readonly root: HTMLElement,
    readonly api: ApiClient,
    options: AppOptions = {},
  ) {
    this.pollMs = options.pollMs ?? 5000;
  }

  start(): Promise<void> {
    return this.show({ name: "login" });
  }

  navigate(route: Route): Promise<void> {
    return this.show(route);
  }

  logout(): void {
    this.session = null;
    this.api.token = null;
    void this.show({ name: "login" });
  }

  private handleAuthError(err: unknown): boolean {
    if (err instanceof ApiError && err.status === 401) {
      this.session = null;
      this.api.token = null;
      void this.show({ name: "login" }, "your session has ended, sign in again");
      return true;
    }
    return false;
  }

  private async show(route: Route, loginNotice?: string): Promise<void> {
    const epoch = ++this.epoch;
    this.stopPolling();
    let view: View;
    if (this.session === null || route.name === "login") {
      route = { name: "login" };
      view = renderLogin({
        api: this.api,
        notice: loginNotice ?? null,
        onLogin: async (session) => {
          this.session = session;
          this.api.token = session.token;
          await this.show(homeRoute(session.role));
        },
      });
    } else {
      const ctx: Ctx = {
        api: this.api,
        session: this.session,
        navigate: (next) => this.show(next),
        authExpired: (err) => this.handleAuthError(err),
      };
      try {
        view = await this.buildView(route, ctx);
      } catch (err) {
        if (this.handleAuthError(err)) return;
        view = errorView(err);
      }
    }
    if (epoch !== this.epoch) {
      view.dispose?.();
      return;
    }
    this.view?.dispose?.();
    this.view = view;
    this.route = route;
    clear(this.root);
    if (this.session === null) {
      this.root.append(view.el);
    } else {
      this.root.append(this.header(this.session), el("main", {}, view.el));
      this.startPolling(view);
    }
  }

  private buildView(route: Route, ctx: Ctx): Promise<View> {
    switch (route.name) {
      case "wizard":
        return renderWizard(ctx);
      case "claim":
        return renderClaimDetail(ctx, route.claimId ?? "");
      case "queue":
        return renderScrutinyQueue(ctx);
      case "settlement":
        return renderSettlement(ctx);
      case "admin":
        return renderAdmin(ctx);
      default:
        return renderClaims(ctx);
    }
  }

  private header(session: SessionInfo): HTMLElement {
    const nav = el("nav");
    for (const item of NAV) {
      if (!roleAllows(session.role, item.group)) continue;
      nav.append(
        el(
          "button",
          {
            type: "button",
            class: this.route.name === item.route ? "active" : null,
            "data-nav": item.route,
            onclick: () => void this.show({ name: item.route }),
          },
          item.label(session.role),
        ),
      );
    }
    return el(
      "header",
      { class: "topbar" },
      el("span", { class: "brand" }, "MedClaim"),
      nav,
      el(
        "span",
        { class: "who" },
        el("strong", {}, session.display_name),
        ` · ${session.role}`,
      ),
      el(
        "button",
        { class: "logout", type: "button", onclick: () => this.logout() },
        "Sign out",
      ),
    );
  }

  private startPolling(view: View): void {
    if (view.poll === undefined) return;
    this.timer = setInterval(() => {
      void view.poll?.().catch((err) => {
        this.handleAuthError(err);
      });
    }, this.pollMs);
  }

  private stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

export function startApp(root: HTMLElement, api: ApiClient, options: AppOptions = {}): App {
  const app = new App(root, api, options);
  void app.start();
  return app;
}
