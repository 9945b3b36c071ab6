import type { ApiClient } from "../api.js";
import { ApiError } from "../api.js";
import { el, notice } from "../dom.js";
import type { SessionInfo } from "../model.js";
import { errorText, type View } from "../view.js";

export interface LoginDeps {
  api: ApiClient;
  notice: string | null;
  onLogin(session: SessionInfo): Promise<void>;
}

export function renderLogin(deps: LoginDeps): View {
  const message = el("div", { class: "notice warn", "data-field": "login-message" });
  if (deps.notice !== null) message.textContent = deps.notice;

  const username = el("input", {
    name: "username",
    autocomplete: "username",
    required: true,
  });
  const secret = el("input", {
    name: "secret",
    type: "password",
    autocomplete: "current-password",
    required: true,
  });
  const submit = el("button", { class: "primary", type: "submit" }, "Sign in");

  const form = el(
    "form",
    {
      class: "stack",
      onsubmit: (event: Event) => {
        event.preventDefault();
        void attempt();
      },
    },
    el("label", {}, "Username", username),
    el("label", {}, "Secret", secret),
    submit,
  );

  async function attempt(): Promise<void> {
    message.textContent = "";
    message.className = "notice error";
    submit.disabled = true;
    try {
      const session = await deps.api.login(username.value.trim(), secret.value);
      await deps.onLogin(session);
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        message.textContent = "invalid credentials";
      } else {
        message.textContent = errorText(err);
      }
    } finally {
      submit.disabled = false;
    }
  }

  const root = el(
    "div",
    { class: "login-wrap" },
    el(
      "div",
      { class: "card" },
      el("h1", {}, "MedClaim"),
      el("p", {}, "Sign in to file and track cashless claims."),
      message,
      form,
    ),
  );
  return { el: root };
}
