// Thin gateway client. Every mutation in the app goes through here;
// errors carry the gateway's {code, message} detail so views can show
// them inline without re-interpreting statuses.

import type {
  AuthorizeResult,
  ClaimDetail,
  ClaimSummary,
  Hospital,
  MetricsSnapshot,
  PaymentResult,
  PreAuthDraft,
  PreAuthResult,
  ScrutinyResult,
  ServiceEntry,
  SessionInfo,
  SettleResult,
} from "./model.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function errorParts(payload: unknown, status: number): [string, string] {
  // Gateway errors arrive as {"detail": {"code", "message"}}.
  let detail = payload;
  if (detail !== null && typeof detail === "object" && "detail" in detail) {
    detail = (detail as { detail: unknown }).detail;
  }
  if (detail !== null && typeof detail === "object") {
    const record = detail as Record<string, unknown>;
    const code = typeof record.code === "string" ? record.code : "error";
    const message =
      typeof record.message === "string"
        ? record.message
        : `request failed with status ${status}`;
    return [code, message];
  }
  return ["error", `request failed with status ${status}`];
}

export class ApiClient {
  token: string | null = null;

  constructor(
    readonly base: string = "",
    private readonly fetchFn: FetchLike = (input, init) =>
      globalThis.fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["content-type"] = "application/json";
    if (this.token !== null) headers["authorization"] = `Bearer ${this.token}`;
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "network-error", `cannot reach the gateway: ${err}`);
    }
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    if (!response.ok) {
      const [code, message] = errorParts(payload, response.status);
      throw new ApiError(response.status, code, message);
    }
    return payload as T;
  }

  login(username: string, secret: string): Promise<SessionInfo> {
    return this.request("POST", "/login", { username, secret });
  }

  submitPreAuth(draft: PreAuthDraft): Promise<PreAuthResult> {
    return this.request("POST", "/preauth", draft);
  }

  listClaims(state?: string): Promise<{ claims: ClaimSummary[] }> {
    const suffix = state === undefined ? "" : `?state=${encodeURIComponent(state)}`;
    return this.request("GET", `/claims${suffix}`);
  }

  claim(claimId: string): Promise<ClaimDetail> {
    return this.request("GET", `/claims/${claimId}`);
  }

  scrutinize(
    claimId: string,
    decision: "approve" | "deny",
    notes?: string,
  ): Promise<ScrutinyResult> {
    const body: Record<string, unknown> = { decision };
    if (notes !== undefined) body.notes = notes;
    return this.request("POST", `/claims/${claimId}/scrutiny`, body);
  }

  authorize(claimId: string): Promise<AuthorizeResult> {
    return this.request("POST", `/claims/${claimId}/authorize`);
  }

  payment(claimId: string, actualExpenseMinor: number): Promise<PaymentResult> {
    return this.request("POST", `/claims/${claimId}/payment`, {
      actual_expense: { amount_minor: actualExpenseMinor, currency: "INR" },
    });
  }

  settle(claimId: string): Promise<SettleResult> {
    return this.request("POST", `/claims/${claimId}/settle`);
  }

  hospitals(tpa?: string): Promise<{ hospitals: Hospital[] }> {
    const suffix = tpa === undefined ? "" : `?tpa=${encodeURIComponent(tpa)}`;
    return this.request("GET", `/hospitals${suffix}`);
  }

  services(): Promise<{ services: ServiceEntry[] }> {
    return this.request("GET", "/registry/services");
  }

  setServiceState(serviceId: string, state: "bound" | "unbound"): Promise<ServiceEntry> {
    return this.request("POST", `/registry/services/${serviceId}/state`, { state });
  }

  metrics(): Promise<MetricsSnapshot> {
    return this.request("GET", "/monitor/metrics");
  }
}
