import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Captured {
  input: string;
  init: RequestInit | undefined;
}

function clientReturning(
  status: number,
  body: unknown,
): { client: ApiClient; calls: Captured[] } {
  const calls: Captured[] = [];
  const client = new ApiClient("http://gw", async (input, init) => {
    calls.push({ input, init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  });
  return { client, calls };
}

describe("ApiClient", () => {
  it("unwraps gateway error details", async () => {
    const { client } = clientReturning(409, {
      detail: { code: "wrong-state", message: "claim is SETTLED" },
    });
    const err = await client.settle("abc").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.code).toBe("wrong-state");
    expect(err.message).toBe("claim is SETTLED");
  });

  it("falls back to a generic message when the body is not a detail", async () => {
    const { client } = clientReturning(500, { oops: 1 });
    const err = await client.listClaims().catch((e) => e);
    expect(err.code).toBe("error");
    expect(err.message).toBe("request failed with status 500");
  });

  it("maps transport failure to status 0", async () => {
    const client = new ApiClient("http://gw", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await client.listClaims().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(0);
    expect(err.code).toBe("network-error");
  });

  it("sends the bearer token and json content type", async () => {
    const { client, calls } = clientReturning(200, { claims: [] });
    client.token = "tok-1";
    await client.listClaims("SETTLED");
    expect(calls[0].input).toBe("http://gw/claims?state=SETTLED");
    const headers = calls[0].init?.headers as Record<string, string>;
    expect(headers.authorization).toBe("Bearer tok-1");
    expect(headers["content-type"]).toBeUndefined();

    await client.scrutinize("abc", "deny", "paperwork missing");
    const postHeaders = calls[1].init?.headers as Record<string, string>;
    expect(postHeaders["content-type"]).toBe("application/json");
    expect(JSON.parse(String(calls[1].init?.body))).toEqual({
      decision: "deny",
      notes: "paperwork missing",
    });
  });

  it("omits the auth header before login", async () => {
    const { client, calls } = clientReturning(200, { token: "t" });
    await client.login("asha", "asha-secret-1");
    const headers = calls[0].init?.headers as Record<string, string>;
    expect(headers.authorization).toBeUndefined();
  });

  it("returns success payloads untouched", async () => {
    const body = {
      claim_id: "c1",
      state: "ID_REJECTED",
      message: "identification number is invalid",
    };
    const { client } = clientReturning(201, body);
    const result = await client.submitPreAuth({
      uid: "INS-GHOST-0001",
      hospital_id: "HOSP-001",
      illness_details: "x",
      proposed_treatment: "y",
      estimated_expense: { amount_minor: 1000, currency: "INR" },
      doctor_name: "Dr",
      doctor_registration_number: "MCI/1",
    });
    expect(result).toEqual(body);
  });
});
