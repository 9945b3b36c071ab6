// Shapes mirror the gateway JSON field for field. Nothing here is
// computed client-side; the gateway is the source of truth.

export interface Money {
  amount_minor: number;
  currency: string;
}

export type Role = "policyholder" | "hospital" | "tpa" | "admin";

export interface SessionInfo {
  token: string;
  role: Role;
  display_name: string;
  subject_id: string;
  uid: string | null;
  hospital_id: string | null;
  expires_at: string;
}

export interface ClaimSummary {
  claim_id: string;
  state: string;
  uid: string;
  hospital_id: string;
  estimated_expense: Money;
  submitted_at: string;
}

export interface HistoryEntry {
  from_state: string;
  event: string;
  to_state: string;
  at: string;
  actor: string;
}

export interface ClaimDetail extends ClaimSummary {
  preauth: {
    illness_details: string;
    proposed_treatment: string;
    doctor_name: string;
    doctor_registration_number: string;
  };
  policy: {
    company_id: string;
    policy_type: string;
    eligible_amount: Money;
    status: string;
  } | null;
  scrutiny: {
    decision: string;
    adjuster_id: string;
    notes: string | null;
    decided_at: string;
  } | null;
  authorization: {
    authorized_amount: Money;
    authorized_at: string;
  } | null;
  payment: {
    paid_amount: Money;
    actual_expense: Money;
    payee_hospital_id: string;
    paid_at: string;
  } | null;
  settlement: {
    refund_amount: Money;
    settled_at: string;
  } | null;
  history: HistoryEntry[];
  allowed_events: string[];
}

export interface PreAuthDraft {
  uid: string;
  hospital_id: string;
  illness_details: string;
  proposed_treatment: string;
  estimated_expense: Money;
  doctor_name: string;
  doctor_registration_number: string;
}

export interface PreAuthResult {
  claim_id: string;
  state: string;
  message: string | null;
}

export interface ScrutinyResult {
  claim_id: string;
  state: string;
  hospital_in_network: boolean;
  estimate_within_eligible: boolean;
}

export interface AuthorizeResult {
  claim_id: string;
  authorized_amount: Money;
  authorized_at: string;
}

export interface PaymentResult {
  claim_id: string;
  paid_amount: Money;
  actual_expense: Money;
  paid_at: string;
}

export interface SettleResult {
  claim_id: string;
  refund_amount: Money;
  settled_at: string;
}

export interface Hospital {
  hospital_id: string;
  name: string;
  tpa_networks: string[];
}

export interface ServiceHealth {
  consecutive_failures: number;
  consecutive_successes: number;
  last_probe_at: string | null;
}

export interface ServiceEntry {
  service_id: string;
  name: string;
  version: string;
  endpoint: string;
  state: "bound" | "unbound";
  health: ServiceHealth;
}

export interface ServiceMetrics {
  service_id: string;
  name: string;
  endpoint: string;
  state: string;
  availability: number;
  p50_ms: number | null;
  p95_ms: number | null;
  probes_total: number;
  failures_total: number;
}

export interface MetricsSnapshot {
  generated_at: string;
  window_seconds: number;
  schema_violations_total: number;
  services: ServiceMetrics[];
}

export const CLAIM_STATES = [
  "SUBMITTED",
  "ID_REJECTED",
  "VERIFIED",
  "UNDER_SCRUTINY",
  "SCRUTINY_DENIED",
  "SCRUTINY_APPROVED",
  "CASH_AUTHORIZED",
  "PAID",
  "SETTLED",
] as const;
