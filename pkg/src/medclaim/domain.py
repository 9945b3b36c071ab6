"""Core domain types and the money arithmetic used across the claim
workflow.

Money is integral minor units (paise for INR) so every authorization,
payment, and refund computation is exact; nothing in the platform ever
touches floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Optional


class CurrencyMismatch(ValueError):
    pass


class NonPositiveAmount(ValueError):
    pass


@dataclass(frozen=True)
class Money:
    amount: int
    currency: str = "INR"

    def __post_init__(self):
        if isinstance(self.amount, bool) or not isinstance(self.amount, int):
            raise TypeError("money amount must be an int of minor units")

    def same_currency(self, other: "Money") -> None:
        if self.currency != other.currency:
            raise CurrencyMismatch(f"{self.currency} vs {other.currency}")


def compute_authorized_amount(estimated: Money, eligible: Money) -> Money:
    """Cash authorization cap: the estimate, limited by what the policy
    provisions make eligible."""
    estimated.same_currency(eligible)
    if estimated.amount <= 0 or eligible.amount <= 0:
        raise NonPositiveAmount("estimated and eligible amounts must be positive")
    return Money(min(estimated.amount, eligible.amount), estimated.currency)


def compute_hospital_payment(actual: Money, authorized: Money) -> Money:
    """What the TPA wires to the hospital: actual expense, capped by the
    authorized amount."""
    actual.same_currency(authorized)
    if actual.amount <= 0:
        raise NonPositiveAmount("actual expense must be positive")
    return Money(min(actual.amount, authorized.amount), actual.currency)


def compute_refund(actual: Money, eligible: Money) -> Money:
    """Difference returned to the insured when the actual expense comes
    in strictly under the eligible amount; zero otherwise."""
    actual.same_currency(eligible)
    if actual.amount <= 0 or eligible.amount <= 0:
        raise NonPositiveAmount("actual and eligible amounts must be positive")
    if actual.amount < eligible.amount:
        return Money(eligible.amount - actual.amount, actual.currency)
    return Money(0, actual.currency)


# ---------------------------------------------------------------------------
# Claim workflow vocabulary
# ---------------------------------------------------------------------------


class ClaimState(str, Enum):
    SUBMITTED = "SUBMITTED"
    ID_REJECTED = "ID_REJECTED"
    VERIFIED = "VERIFIED"
    UNDER_SCRUTINY = "UNDER_SCRUTINY"
    SCRUTINY_DENIED = "SCRUTINY_DENIED"
    SCRUTINY_APPROVED = "SCRUTINY_APPROVED"
    CASH_AUTHORIZED = "CASH_AUTHORIZED"
    PAID = "PAID"
    SETTLED = "SETTLED"


TERMINAL_STATES = frozenset({
    ClaimState.ID_REJECTED,
    ClaimState.SCRUTINY_DENIED,
    ClaimState.SETTLED,
})


class ClaimEvent(str, Enum):
    SUBMIT = "Submit"
    VERIFY_OK = "VerifyOk"
    VERIFY_FAIL = "VerifyFail"
    SCRUTINY_APPROVE = "ScrutinyApprove"
    SCRUTINY_DENY = "ScrutinyDeny"
    AUTHORIZE = "Authorize"
    PAYMENT_DONE = "PaymentDone"
    SETTLE = "Settle"


# ---------------------------------------------------------------------------
# Reference data
# ---------------------------------------------------------------------------


class PolicyStatus(str, Enum):
    ACTIVE = "active"
    LAPSED = "lapsed"


@dataclass(frozen=True)
class PolicyRecord:
    uid: str
    company_id: str
    policy_type: str
    eligible_amount: Money
    status: PolicyStatus


@dataclass(frozen=True)
class Tpa:
    tpa_id: str
    name: str


@dataclass(frozen=True)
class Hospital:
    hospital_id: str
    name: str
    tpa_networks: frozenset[str]

    def in_network_of(self, tpa_id: str) -> bool:
        return tpa_id in self.tpa_networks


class MatchKind(str, Enum):
    MATCHED = "matched"
    NOT_FOUND = "not-found"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class IdentityMatch:
    """Outcome of checking an identification number against every
    company's policy database."""
    kind: MatchKind
    record: Optional[PolicyRecord] = None
    companies: tuple[str, ...] = ()
    detail: str = ""


# ---------------------------------------------------------------------------
# Claims
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Doctor:
    name: str
    registration_number: str


@dataclass(frozen=True)
class PreAuthRequest:
    """The pre-authorization form the insured files before planned
    hospitalization, certified by the treating doctor."""
    uid: str
    hospital_id: str
    illness_details: str
    proposed_treatment: str
    estimated_expense: Money
    certifying_doctor: Doctor
    submitted_at: datetime


@dataclass(frozen=True)
class PolicySnapshot:
    """Policy facts captured at verification time; later workflow steps
    read this snapshot, never the live databases."""
    company_id: str
    policy_type: str
    eligible_amount: Money
    status: PolicyStatus


@dataclass(frozen=True)
class ScrutinyRecord:
    decision: str                 # "approve" | "deny"
    adjuster_id: str
    notes: Optional[str]
    decided_at: datetime


@dataclass(frozen=True)
class AuthorizationRecord:
    authorized_amount: Money
    authorized_at: datetime


@dataclass(frozen=True)
class PaymentRecord:
    paid_amount: Money
    actual_expense: Money
    paid_at: datetime


@dataclass(frozen=True)
class SettlementRecord:
    refund_amount: Money
    settled_at: datetime


@dataclass(frozen=True)
class HistoryEntry:
    from_state: ClaimState
    event: ClaimEvent
    to_state: ClaimState
    at: datetime
    actor: str


@dataclass(frozen=True)
class Claim:
    claim_id: str
    state: ClaimState
    preauth: PreAuthRequest
    policy: Optional[PolicySnapshot] = None
    scrutiny: Optional[ScrutinyRecord] = None
    authorization: Optional[AuthorizationRecord] = None
    payment: Optional[PaymentRecord] = None
    settlement: Optional[SettlementRecord] = None
    history: tuple[HistoryEntry, ...] = ()

    @property
    def uid(self) -> str:
        return self.preauth.uid

    @property
    def hospital_id(self) -> str:
        return self.preauth.hospital_id

    @property
    def submitted_at(self) -> datetime:
        return self.preauth.submitted_at


def check_claim(claim: Claim) -> list[str]:
    """Structural invariants every stored claim must satisfy; returns
    human-readable problems, empty when the claim is sound."""
    problems = []
    for i in range(1, len(claim.history)):
        if claim.history[i].at < claim.history[i - 1].at:
            problems.append("history is not chronologically ordered")
            break
    for i in range(1, len(claim.history)):
        if claim.history[i].from_state != claim.history[i - 1].to_state:
            problems.append("history transitions do not chain")
            break
    if claim.history and claim.history[-1].to_state != claim.state:
        problems.append("state does not match the last history entry")
    if claim.authorization and (claim.scrutiny is None or claim.scrutiny.decision != "approve"):
        problems.append("authorization requires an approving scrutiny record")
    if claim.payment and claim.authorization is None:
        problems.append("payment requires an authorization record")
    if claim.settlement and claim.payment is None:
        problems.append("settlement requires a payment record")
    if claim.payment and claim.authorization:
        if claim.payment.paid_amount.amount > claim.authorization.authorized_amount.amount:
            problems.append("paid amount exceeds the authorized amount")
    if claim.authorization and claim.policy:
        if claim.authorization.authorized_amount.amount > claim.policy.eligible_amount.amount:
            problems.append("authorized amount exceeds the eligible amount")
    return problems
