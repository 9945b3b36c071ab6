"""The six business services: pre-auth intake, identity verification,
TPA scrutiny, cash authorization, hospital payment, and settlement.

Each is a stateless envelope handler; claim state lives in the store
and every mutation goes through the workflow's advance().  Services
re-validate their own requests even though the gateway already checks
roles and payloads, so the envelope boundary stays trustworthy on its
own.
"""

from __future__ import annotations

import logging
from typing import Optional

from . import envelope as ev
from .bus import (
    EnvelopeHandler,
    ServiceBus,
    TransportError,
    WireStats,
    claim_id_for,
    internal_call_ids,
    refuse,
)
from .domain import (
    AuthorizationRecord,
    Claim,
    ClaimEvent,
    ClaimState,
    CurrencyMismatch,
    Doctor,
    Money,
    PaymentRecord,
    PolicySnapshot,
    PolicyStatus,
    PreAuthRequest,
    ScrutinyRecord,
    SettlementRecord,
    compute_authorized_amount,
    compute_hospital_payment,
    compute_refund,
)
from .orchestrator import advance
from .registry import Unresolved
from .store import ClaimNotFound, ClaimStore, InvalidClaim, ReferenceDirectory, VersionConflict

log = logging.getLogger(__name__)

INVALID_ID_MESSAGE = "identification number is invalid"

# All fixture money is rupee minor units; intake rejects anything else
# so downstream arithmetic can never see mixed currencies.
PLATFORM_CURRENCY = "INR"


def _load(store: ClaimStore, claim_id: str) -> Claim:
    try:
        return store.load_claim(claim_id)
    except ClaimNotFound:
        refuse("unknown-claim", f"no claim {claim_id}")


def _require_state(claim: Claim, wanted: ClaimState, operation: str) -> None:
    if claim.state is not wanted:
        refuse("wrong-state",
               f"{operation} requires state {wanted.value}, claim is {claim.state.value}")


def _save(store: ClaimStore, claim: Claim) -> None:
    try:
        store.save_claim(claim)
    except VersionConflict:
        refuse("conflict", "claim was modified concurrently, reload and retry")
    except InvalidClaim as exc:
        log.error("claim %s failed structural checks: %s", claim.claim_id, exc)
        refuse("invalid-request", "claim update failed structural checks")


class VerificationService(EnvelopeHandler):
    """Checks an identification number against every company's policy
    records and reports the matched policy facts."""

    NAME = "Verification"
    OPERATIONS = {"verify": (ev.VerifyRequest, None, "verify")}

    def __init__(self, directory: ReferenceDirectory, stats: Optional[WireStats] = None):
        super().__init__(stats)
        self.directory = directory

    def verify(self, env: ev.Envelope, caller_role: Optional[str]) -> ev.Envelope:
        match = self.directory.lookup_identity(env.body.uid)
        if match.record is None:
            return self._respond(env, ev.VerifyResponse(
                valid=False,
                message=INVALID_ID_MESSAGE,
                detail=match.detail,
            ))
        record = match.record
        return self._respond(env, ev.VerifyResponse(
            valid=True,
            company_id=record.company_id,
            policy_type=record.policy_type,
            eligible_amount=record.eligible_amount,
        ))


class PreAuthService(EnvelopeHandler):
    """Claim intake: persists the pre-authorization form, triggers
    identity verification, and advances the new claim to its first
    resting state."""

    NAME = "PreAuth"
    OPERATIONS = {
        "preauth_submit": (ev.PreAuthSubmitRequest, ("policyholder", "hospital"), "submit"),
    }

    def __init__(self, store: ClaimStore, directory: ReferenceDirectory, bus: ServiceBus,
                 stats: Optional[WireStats] = None):
        super().__init__(stats)
        self.store = store
        self.directory = directory
        self.bus = bus

    def submit(self, env: ev.Envelope, caller_role: Optional[str]) -> ev.Envelope:
        req: ev.PreAuthSubmitRequest = env.body
        if req.estimated_expense.amount <= 0:
            refuse("invalid-request", "estimated expense must be positive")
        if req.estimated_expense.currency != PLATFORM_CURRENCY:
            refuse("invalid-request", f"amounts must be in {PLATFORM_CURRENCY}")

        claim_id = claim_id_for(env.correlation_id)
        existing = self._existing(claim_id)
        if existing is not None:
            # Redelivery of the same request: answer from the stored claim.
            return self._submit_response(env, existing)

        if self.directory.hospital(req.hospital_id) is None:
            refuse("unknown-hospital", f"no network hospital {req.hospital_id}")

        claim = Claim(
            claim_id=claim_id,
            state=ClaimState.SUBMITTED,
            preauth=PreAuthRequest(
                uid=req.uid,
                hospital_id=req.hospital_id,
                illness_details=req.illness_details,
                proposed_treatment=req.proposed_treatment,
                estimated_expense=req.estimated_expense,
                certifying_doctor=Doctor(req.doctor_name, req.doctor_registration_number),
                submitted_at=env.timestamp,
            ),
        )
        verdict = self._call_verify(env, req.uid)
        if verdict.valid:
            snapshot = PolicySnapshot(
                company_id=verdict.company_id,
                policy_type=verdict.policy_type,
                eligible_amount=verdict.eligible_amount,
                status=PolicyStatus.ACTIVE,
            )
            claim, commands = advance(claim, ClaimEvent.VERIFY_OK, env.timestamp,
                                      "service:Verification", policy=snapshot)
            for command in commands:
                claim, more = advance(claim, command, env.timestamp, f"service:{self.NAME}")
                assert not more
        else:
            claim, _ = advance(claim, ClaimEvent.VERIFY_FAIL, env.timestamp,
                               "service:Verification")
        _save(self.store, claim)
        return self._submit_response(env, claim)

    def _existing(self, claim_id: str) -> Optional[Claim]:
        try:
            return self.store.load_claim(claim_id)
        except ClaimNotFound:
            return None

    def _call_verify(self, env: ev.Envelope, uid: str) -> ev.VerifyResponse:
        call = ev.Envelope(
            message_id=internal_call_ids(env.correlation_id, "Verification", "verify"),
            correlation_id=env.correlation_id,
            timestamp=env.timestamp,
            service="Verification",
            operation="verify",
            body=ev.VerifyRequest(uid=uid),
        )
        try:
            response = self.bus.request(call)
        except (Unresolved, TransportError) as exc:
            log.warning("verification unreachable for %s: %s", env.correlation_id, exc)
            refuse("service-unavailable", "identity verification is unavailable, retry later")
        if not isinstance(response.body, ev.VerifyResponse):
            refuse("service-unavailable", "identity verification returned an unusable answer")
        return response.body

    def _submit_response(self, env: ev.Envelope, claim: Claim) -> ev.Envelope:
        message = INVALID_ID_MESSAGE if claim.state is ClaimState.ID_REJECTED else None
        return self._respond(env, ev.PreAuthSubmitResponse(
            claim_id=claim.claim_id,
            state=claim.state.value,
            message=message,
        ))


class ScrutinyService(EnvelopeHandler):
    """Records the TPA adjuster's approve/deny decision and returns the
    rule-assist facts computed for it."""

    NAME = "Scrutiny"
    OPERATIONS = {"scrutinize": (ev.ScrutinyRequest, ("tpa",), "scrutinize")}

    def __init__(self, store: ClaimStore, directory: ReferenceDirectory, tpa_id: str,
                 stats: Optional[WireStats] = None):
        super().__init__(stats)
        self.store = store
        self.directory = directory
        self.tpa_id = tpa_id

    def scrutinize(self, env: ev.Envelope, caller_role: Optional[str]) -> ev.Envelope:
        req: ev.ScrutinyRequest = env.body
        if req.decision == "deny" and not (req.notes or "").strip():
            refuse("invalid-request", "a denial must carry notes")
        claim = _load(self.store, req.claim_id)
        _require_state(claim, ClaimState.UNDER_SCRUTINY, "scrutinize")

        record = ScrutinyRecord(
            decision=req.decision,
            adjuster_id=req.adjuster_id,
            notes=req.notes,
            decided_at=env.timestamp,
        )
        event = (ClaimEvent.SCRUTINY_APPROVE if req.decision == "approve"
                 else ClaimEvent.SCRUTINY_DENY)
        claim, _ = advance(claim, event, env.timestamp, f"tpa:{req.adjuster_id}",
                           scrutiny=record)
        _save(self.store, claim)

        hospital = self.directory.hospital(claim.hospital_id)
        in_network = hospital is not None and hospital.in_network_of(self.tpa_id)
        within = (claim.policy is not None
                  and claim.preauth.estimated_expense.currency
                  == claim.policy.eligible_amount.currency
                  and claim.preauth.estimated_expense.amount
                  <= claim.policy.eligible_amount.amount)
        return self._respond(env, ev.ScrutinyResponse(
            claim_id=claim.claim_id,
            state=claim.state.value,
            hospital_in_network=in_network,
            estimate_within_eligible=within,
        ))


class CashAuthService(EnvelopeHandler):
    """Caps the approved claim at the policy's eligible amount and
    authorizes that sum for payment."""

    NAME = "CashAuth"
    OPERATIONS = {"authorize_cash": (ev.AuthorizeRequest, ("tpa",), "authorize")}

    def __init__(self, store: ClaimStore, stats: Optional[WireStats] = None):
        super().__init__(stats)
        self.store = store

    def authorize(self, env: ev.Envelope, caller_role: Optional[str]) -> ev.Envelope:
        claim = _load(self.store, env.body.claim_id)
        _require_state(claim, ClaimState.SCRUTINY_APPROVED, "authorize_cash")
        try:
            amount = compute_authorized_amount(claim.preauth.estimated_expense,
                                               claim.policy.eligible_amount)
        except CurrencyMismatch:
            refuse("invalid-request", "estimate and eligible amount use different currencies")
        record = AuthorizationRecord(authorized_amount=amount, authorized_at=env.timestamp)
        claim, _ = advance(claim, ClaimEvent.AUTHORIZE, env.timestamp,
                           f"service:{self.NAME}", authorization=record)
        _save(self.store, claim)
        return self._respond(env, ev.AuthorizeResponse(
            claim_id=claim.claim_id,
            authorized_amount=record.authorized_amount,
            authorized_at=record.authorized_at,
        ))


class PaymentService(EnvelopeHandler):
    """Pays the network hospital the actual expense, capped at the
    authorized amount (cashless discharge)."""

    NAME = "Payment"
    OPERATIONS = {"pay_hospital": (ev.PaymentRequest, ("hospital", "tpa"), "pay")}

    def __init__(self, store: ClaimStore, stats: Optional[WireStats] = None):
        super().__init__(stats)
        self.store = store

    def pay(self, env: ev.Envelope, caller_role: Optional[str]) -> ev.Envelope:
        req: ev.PaymentRequest = env.body
        if req.actual_expense.amount <= 0:
            refuse("invalid-request", "actual expense must be positive")
        claim = _load(self.store, req.claim_id)
        _require_state(claim, ClaimState.CASH_AUTHORIZED, "pay_hospital")
        try:
            paid = compute_hospital_payment(req.actual_expense,
                                            claim.authorization.authorized_amount)
        except CurrencyMismatch:
            refuse("invalid-request", "actual expense and authorization use different currencies")
        record = PaymentRecord(paid_amount=paid, actual_expense=req.actual_expense,
                               paid_at=env.timestamp)
        claim, _ = advance(claim, ClaimEvent.PAYMENT_DONE, env.timestamp,
                           f"service:{self.NAME}", payment=record)
        _save(self.store, claim)
        return self._respond(env, ev.PaymentResponse(
            claim_id=claim.claim_id,
            paid_amount=record.paid_amount,
            actual_expense=record.actual_expense,
            paid_at=record.paid_at,
        ))


class SettlementService(EnvelopeHandler):
    """Closes the claim and returns any eligible-minus-actual difference
    owed back to the insured."""

    NAME = "Settlement"
    OPERATIONS = {"settle": (ev.SettleRequest, ("tpa",), "settle")}

    def __init__(self, store: ClaimStore, stats: Optional[WireStats] = None):
        super().__init__(stats)
        self.store = store

    def settle(self, env: ev.Envelope, caller_role: Optional[str]) -> ev.Envelope:
        claim = _load(self.store, env.body.claim_id)
        _require_state(claim, ClaimState.PAID, "settle")
        try:
            refund = compute_refund(claim.payment.actual_expense,
                                    claim.policy.eligible_amount)
        except CurrencyMismatch:
            refuse("invalid-request", "expense and eligible amount use different currencies")
        record = SettlementRecord(refund_amount=refund, settled_at=env.timestamp)
        claim, _ = advance(claim, ClaimEvent.SETTLE, env.timestamp,
                           f"service:{self.NAME}", settlement=record)
        _save(self.store, claim)
        return self._respond(env, ev.SettleResponse(
            claim_id=claim.claim_id,
            refund_amount=record.refund_amount,
            settled_at=record.settled_at,
        ))
