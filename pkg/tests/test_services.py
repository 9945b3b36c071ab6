"""End-to-end behavior of the six envelope services."""

import uuid
from datetime import datetime, timezone

import pytest

from medclaim import envelope as ev
from medclaim.bus import (
    TransportError,
    claim_id_for,
    derive_response_id,
    internal_call_ids,
)
from medclaim.domain import ClaimState, Money
from medclaim.services import INVALID_ID_MESSAGE, _save
from medclaim.store import ClaimNotFound
from medclaim.system import build_system

AT = datetime(2024, 3, 1, tzinfo=timezone.utc)

# A minimal deployment with round-number amounts for settlement math.
SMALL_FIXTURES = """\
company|ACME
tpa|TPA-EAST|EastCare TPA
policy|ACME|INS-T-1|hospitalization|100000|INR|active
hospital|HOSP-T-1|Test General|TPA-EAST
user|tester|tester-secret|tpa|Test Adjuster
"""


@pytest.fixture()
def system():
    return build_system()


def envelope_for(service, operation, body, corr=None, at=AT):
    return ev.Envelope(
        message_id=str(uuid.uuid4()),
        correlation_id=corr or str(uuid.uuid4()),
        timestamp=at,
        service=service,
        operation=operation,
        body=body,
    )


def preauth_body(uid="INS-ACME-0001", hospital="HOSP-001", minor=5_000_000,
                 currency="INR"):
    return ev.PreAuthSubmitRequest(
        uid=uid,
        hospital_id=hospital,
        illness_details="appendicitis",
        proposed_treatment="appendectomy",
        estimated_expense=Money(minor, currency),
        doctor_name="Dr. Rao",
        doctor_registration_number="MCI/1999/1234",
    )


def submit(system, caller_role=None, **kwargs):
    env = envelope_for("PreAuth", "preauth_submit", preauth_body(**kwargs))
    return env, system.bus.request(env, caller_role)


def drive_to(system, state, uid="INS-ACME-0001", hospital="HOSP-001",
             minor=5_000_000, actual=4_000_000):
    """Advance a fresh claim to the requested state through real calls."""
    _, resp = submit(system, uid=uid, hospital=hospital, minor=minor)
    claim_id = resp.body.claim_id
    plan = [
        (ClaimState.SCRUTINY_APPROVED, "Scrutiny", "scrutinize",
         ev.ScrutinyRequest(claim_id=claim_id, decision="approve", adjuster_id="adj-1")),
        (ClaimState.CASH_AUTHORIZED, "CashAuth", "authorize_cash",
         ev.AuthorizeRequest(claim_id=claim_id)),
        (ClaimState.PAID, "Payment", "pay_hospital",
         ev.PaymentRequest(claim_id=claim_id, actual_expense=Money(actual))),
        (ClaimState.SETTLED, "Settlement", "settle",
         ev.SettleRequest(claim_id=claim_id)),
    ]
    reached = ClaimState.UNDER_SCRUTINY
    for target, service, operation, body in plan:
        if reached is state:
            break
        response = system.bus.request(envelope_for(service, operation, body))
        assert not isinstance(response.body, ev.Fault), response.body
        reached = target
    assert reached is state
    return claim_id


class TestVerification:
    def request(self, system, uid):
        env = envelope_for("Verification", "verify", ev.VerifyRequest(uid=uid))
        return system.bus.request(env)

    def test_known_active_uid_matches(self, system):
        body = self.request(system, "INS-ACME-0001").body
        assert body == ev.VerifyResponse(
            valid=True,
            company_id="ACME",
            policy_type="hospitalization",
            eligible_amount=Money(10_000_000),
        )

    def test_unknown_uid_uses_the_exact_rejection_message(self, system):
        body = self.request(system, "INS-NOPE-0001").body
        assert body.valid is False
        assert body.message == "identification number is invalid"
        assert body.company_id is None
        assert body.eligible_amount is None

    def test_lapsed_uid_is_invalid(self, system):
        body = self.request(system, "INS-ACME-0003").body
        assert body.valid is False
        assert body.message == INVALID_ID_MESSAGE
        assert "lapsed" in body.detail

    def test_ambiguous_uid_is_invalid_with_ambiguity_detail(self, system):
        body = self.request(system, "INS-DUP-0001").body
        assert body.valid is False
        assert body.message == INVALID_ID_MESSAGE
        assert "BETA" in body.detail and "CROWN" in body.detail


class TestPreAuthSubmit:
    def test_valid_submit_creates_and_advances_to_scrutiny_queue(self, system):
        env, resp = submit(system)
        body = resp.body
        assert isinstance(body, ev.PreAuthSubmitResponse)
        assert body.claim_id == claim_id_for(env.correlation_id)
        assert body.state == "UNDER_SCRUTINY"
        assert body.message is None

        claim = system.store.load_claim(body.claim_id)
        assert claim.state is ClaimState.UNDER_SCRUTINY
        assert claim.policy.company_id == "ACME"
        assert claim.policy.eligible_amount == Money(10_000_000)
        assert [e.event.value for e in claim.history] == ["VerifyOk", "Submit"]
        assert [e.actor for e in claim.history] == [
            "service:Verification", "service:PreAuth"]
        assert claim.preauth.submitted_at == AT

    def test_unknown_uid_rejects_with_exact_message(self, system):
        env, resp = submit(system, uid="INS-NOPE-0001")
        body = resp.body
        assert body.state == "ID_REJECTED"
        assert body.message == "identification number is invalid"
        claim = system.store.load_claim(body.claim_id)
        assert claim.state is ClaimState.ID_REJECTED
        assert claim.policy is None

    def test_zero_estimate_is_invalid_request(self, system):
        _, resp = submit(system, minor=0)
        assert resp.body == ev.Fault(code="invalid-request",
                                     message="estimated expense must be positive")
        assert system.store.list_claims() == []

    def test_foreign_currency_is_invalid_request(self, system):
        _, resp = submit(system, currency="USD")
        assert resp.body.code == "invalid-request"
        assert system.store.list_claims() == []

    def test_unknown_hospital_faults_without_persisting(self, system):
        _, resp = submit(system, hospital="HOSP-404")
        assert resp.body == ev.Fault(code="unknown-hospital",
                                     message="no network hospital HOSP-404")
        assert system.store.list_claims() == []

    def test_unreachable_verification_faults_without_persisting(self, system):
        for entry in system.registry.list():
            if entry.name == "Verification":
                system.registry.set_state(entry.service_id, "unbound")
        _, resp = submit(system)
        assert resp.body.code == "service-unavailable"
        assert system.store.list_claims() == []

    def test_redelivery_of_the_same_request_is_idempotent(self, system):
        env, first = submit(system)
        raw = ev.serialize(env)
        again = ev.parse(system.bus.deliver(raw))
        assert again == first
        assert len(system.store.list_claims()) == 1

    def test_submissions_differ_by_correlation(self, system):
        _, a = submit(system)
        _, b = submit(system)
        assert a.body.claim_id != b.body.claim_id
        assert len(system.store.list_claims()) == 2


class TestScrutiny:
    def scrutinize(self, system, claim_id, decision="approve", notes=None,
                   caller_role=None, adjuster="adj-7"):
        body = ev.ScrutinyRequest(claim_id=claim_id, decision=decision,
                                  adjuster_id=adjuster, notes=notes)
        return system.bus.request(envelope_for("Scrutiny", "scrutinize", body), caller_role)

    def test_approve_moves_to_scrutiny_approved_with_rule_assist(self, system):
        claim_id = drive_to(system, ClaimState.UNDER_SCRUTINY)
        body = self.scrutinize(system, claim_id).body
        assert body == ev.ScrutinyResponse(
            claim_id=claim_id,
            state="SCRUTINY_APPROVED",
            hospital_in_network=True,
            estimate_within_eligible=True,
        )
        claim = system.store.load_claim(claim_id)
        assert claim.scrutiny.adjuster_id == "adj-7"
        assert claim.history[-1].actor == "tpa:adj-7"

    def test_oversize_estimate_is_flagged(self, system):
        # estimate exceeds the 10M cover of INS-ACME-0001
        claim_id = drive_to(system, ClaimState.UNDER_SCRUTINY, minor=12_000_000)
        body = self.scrutinize(system, claim_id).body
        assert body.estimate_within_eligible is False
        assert body.hospital_in_network is True

    def test_out_of_network_hospital_is_flagged(self, system):
        # HOSP-003 belongs to TPA-WEST; this deployment adjudicates for TPA-EAST
        claim_id = drive_to(system, ClaimState.UNDER_SCRUTINY, hospital="HOSP-003")
        body = self.scrutinize(system, claim_id).body
        assert body.hospital_in_network is False
        assert body.estimate_within_eligible is True

    def test_deny_requires_notes(self, system):
        claim_id = drive_to(system, ClaimState.UNDER_SCRUTINY)
        resp = self.scrutinize(system, claim_id, decision="deny")
        assert resp.body == ev.Fault(code="invalid-request",
                                     message="a denial must carry notes")

    def test_deny_with_notes_terminates_the_claim(self, system):
        claim_id = drive_to(system, ClaimState.UNDER_SCRUTINY)
        body = self.scrutinize(system, claim_id, decision="deny",
                               notes="estimate inconsistent with diagnosis").body
        assert body.state == "SCRUTINY_DENIED"
        claim = system.store.load_claim(claim_id)
        assert claim.state is ClaimState.SCRUTINY_DENIED
        assert claim.scrutiny.notes == "estimate inconsistent with diagnosis"

    def test_wrong_state_faults(self, system):
        claim_id = drive_to(system, ClaimState.SCRUTINY_APPROVED)
        resp = self.scrutinize(system, claim_id)
        assert resp.body.code == "wrong-state"
        assert "UNDER_SCRUTINY" in resp.body.message

    def test_unknown_claim_faults(self, system):
        resp = self.scrutinize(system, str(uuid.uuid4()))
        assert resp.body.code == "unknown-claim"

    def test_only_tpa_role_may_scrutinize(self, system):
        claim_id = drive_to(system, ClaimState.UNDER_SCRUTINY)
        denied = self.scrutinize(system, claim_id, caller_role="hospital")
        assert denied.body.code == "forbidden"
        allowed = self.scrutinize(system, claim_id, caller_role="tpa")
        assert isinstance(allowed.body, ev.ScrutinyResponse)


class TestCashAuth:
    def authorize(self, system, claim_id, caller_role=None):
        body = ev.AuthorizeRequest(claim_id=claim_id)
        return system.bus.request(envelope_for("CashAuth", "authorize_cash", body), caller_role)

    def test_authorizes_the_capped_amount(self, system):
        claim_id = drive_to(system, ClaimState.SCRUTINY_APPROVED, minor=5_000_000)
        body = self.authorize(system, claim_id).body
        assert body.authorized_amount == Money(5_000_000)
        assert body.authorized_at == AT
        claim = system.store.load_claim(claim_id)
        assert claim.state is ClaimState.CASH_AUTHORIZED

    def test_estimate_above_cover_is_capped_at_eligible(self, system):
        claim_id = drive_to(system, ClaimState.SCRUTINY_APPROVED, minor=12_000_000)
        body = self.authorize(system, claim_id).body
        assert body.authorized_amount == Money(10_000_000)

    def test_second_authorization_hits_the_state_guard(self, system):
        claim_id = drive_to(system, ClaimState.SCRUTINY_APPROVED)
        assert isinstance(self.authorize(system, claim_id).body, ev.AuthorizeResponse)
        again = self.authorize(system, claim_id)
        assert again.body.code == "wrong-state"

    def test_unscrutinized_claim_is_wrong_state(self, system):
        claim_id = drive_to(system, ClaimState.UNDER_SCRUTINY)
        assert self.authorize(system, claim_id).body.code == "wrong-state"


class TestPayment:
    def pay(self, system, claim_id, actual, caller_role=None):
        body = ev.PaymentRequest(claim_id=claim_id, actual_expense=Money(actual))
        return system.bus.request(envelope_for("Payment", "pay_hospital", body), caller_role)

    def test_actual_below_authorization_is_paid_in_full(self, system):
        claim_id = drive_to(system, ClaimState.CASH_AUTHORIZED, minor=10_000_000)
        body = self.pay(system, claim_id, 8_000_000).body
        assert body.paid_amount == Money(8_000_000)
        assert body.actual_expense == Money(8_000_000)

    def test_actual_above_authorization_is_capped(self, system):
        claim_id = drive_to(system, ClaimState.CASH_AUTHORIZED, minor=10_000_000)
        body = self.pay(system, claim_id, 12_000_000).body
        assert body.paid_amount == Money(10_000_000)
        claim = system.store.load_claim(claim_id)
        assert claim.payment.actual_expense == Money(12_000_000)

    def test_zero_actual_expense_is_invalid(self, system):
        claim_id = drive_to(system, ClaimState.CASH_AUTHORIZED)
        resp = self.pay(system, claim_id, 0)
        assert resp.body == ev.Fault(code="invalid-request",
                                     message="actual expense must be positive")

    def test_payment_before_authorization_is_wrong_state(self, system):
        claim_id = drive_to(system, ClaimState.UNDER_SCRUTINY)
        assert self.pay(system, claim_id, 100).body.code == "wrong-state"

    def test_hospital_and_tpa_may_pay_but_policyholder_may_not(self, system):
        claim_id = drive_to(system, ClaimState.CASH_AUTHORIZED)
        refused = self.pay(system, claim_id, 100, caller_role="policyholder")
        assert refused.body.code == "forbidden"
        paid = self.pay(system, claim_id, 100, caller_role="hospital")
        assert isinstance(paid.body, ev.PaymentResponse)


class TestSettlement:
    def settle(self, system, claim_id, caller_role=None):
        body = ev.SettleRequest(claim_id=claim_id)
        return system.bus.request(envelope_for("Settlement", "settle", body), caller_role)

    def test_refund_is_eligible_minus_actual(self, system):
        claim_id = drive_to(system, ClaimState.PAID,
                            minor=9_000_000, actual=4_000_000)
        body = self.settle(system, claim_id).body
        # cover is 10_000_000 for INS-ACME-0001
        assert body.refund_amount == Money(6_000_000)
        assert system.store.load_claim(claim_id).state is ClaimState.SETTLED

    def test_actual_at_or_above_eligible_refunds_nothing(self, system):
        claim_id = drive_to(system, ClaimState.PAID,
                            minor=10_000_000, actual=10_000_000)
        assert self.settle(system, claim_id).body.refund_amount == Money(0)

    def test_settling_twice_is_wrong_state(self, system):
        claim_id = drive_to(system, ClaimState.PAID)
        assert isinstance(self.settle(system, claim_id).body, ev.SettleResponse)
        assert self.settle(system, claim_id).body.code == "wrong-state"

    def test_textbook_refund_example(self):
        system = build_system(fixtures_text=SMALL_FIXTURES)
        _, resp = submit(system, uid="INS-T-1", hospital="HOSP-T-1", minor=100_000)
        claim_id = resp.body.claim_id
        for service, operation, body in (
            ("Scrutiny", "scrutinize",
             ev.ScrutinyRequest(claim_id=claim_id, decision="approve", adjuster_id="adj")),
            ("CashAuth", "authorize_cash", ev.AuthorizeRequest(claim_id=claim_id)),
            ("Payment", "pay_hospital",
             ev.PaymentRequest(claim_id=claim_id, actual_expense=Money(80_000))),
        ):
            response = system.bus.request(envelope_for(service, operation, body))
            assert not isinstance(response.body, ev.Fault)
        body = self.settle(system, claim_id).body
        assert body.refund_amount == Money(20_000)
        claim = system.store.load_claim(claim_id)
        paid = claim.payment.paid_amount.amount
        refund = claim.settlement.refund_amount.amount
        assert paid + refund <= claim.policy.eligible_amount.amount


class TestEnvelopePlumbing:
    def test_responses_correlate_and_derive_ids_deterministically(self, system):
        env, resp = submit(system)
        assert resp.correlation_id == env.correlation_id
        assert resp.message_id == derive_response_id(env.message_id)
        assert resp.timestamp == env.timestamp
        assert resp.service == "PreAuth"

    def test_fault_responses_correlate_too(self, system):
        env = envelope_for("Settlement", "settle",
                           ev.SettleRequest(claim_id=str(uuid.uuid4())))
        resp = system.bus.request(env)
        assert isinstance(resp.body, ev.Fault)
        assert resp.correlation_id == env.correlation_id
        assert resp.message_id == derive_response_id(env.message_id)

    def test_every_service_answers_ping_with_pong(self, system):
        for name in system.services:
            env = envelope_for(name, "ping", ev.Ping())
            resp = system.bus.request(env)
            assert resp.body == ev.Pong()
            assert resp.operation == "pong"
            assert resp.correlation_id == env.correlation_id

    def test_mismatched_payload_is_invalid_request(self, system):
        env = envelope_for("Settlement", "settle",
                           ev.AuthorizeRequest(claim_id=str(uuid.uuid4())))
        resp = system.bus.request(env)
        assert resp.body.code == "invalid-request"
        assert "SettleRequest" in resp.body.message

    def test_operation_not_served_is_invalid_request(self, system):
        env = envelope_for("Settlement", "verify",
                           ev.VerifyRequest(uid="INS-ACME-0001"))
        resp = system.bus.request(env)
        assert resp.body.code == "invalid-request"

    def test_undecodable_bytes_count_as_schema_violations(self, system):
        endpoint = system.endpoints["Verification"]
        before = system.stats.schema_violations_total
        corr = str(uuid.uuid4())
        garbled = (
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            "<Envelope xmlns=\"urn:medclaim:envelope:1.0\">\n"
            "  <Header>\n"
            f"    <CorrelationId>{corr}</CorrelationId>\n"
            "  </Header>\n"
            "</Envelope>\n").encode()
        raw = system.transport.send(endpoint, garbled)
        assert system.stats.schema_violations_total == before + 1
        fault = ev.parse(raw)
        assert fault.body.code == "schema-violation"
        assert fault.correlation_id == corr

    def test_internal_verify_traffic_reuses_the_request_correlation(self, system):
        seen = []
        original = system.transport.send

        def spy(endpoint, doc, caller_role=None):
            seen.append((endpoint, doc))
            return original(endpoint, doc, caller_role)

        system.transport.send = spy
        env, _ = submit(system)
        verify_docs = [doc for ep, doc in seen if ep == system.endpoints["Verification"]]
        assert len(verify_docs) == 1
        call = ev.parse(verify_docs[0])
        assert call.correlation_id == env.correlation_id
        assert call.message_id == internal_call_ids(
            env.correlation_id, "Verification", "verify")
        assert call.timestamp == env.timestamp

    def test_stale_write_surfaces_as_conflict(self, system):
        claim_id = drive_to(system, ClaimState.UNDER_SCRUTINY)
        stale = system.store.load_claim(claim_id)

        body = ev.ScrutinyRequest(claim_id=claim_id, decision="approve",
                                  adjuster_id="adj-1")
        system.bus.request(envelope_for("Scrutiny", "scrutinize", body))

        with pytest.raises(Exception) as err:
            _save(system.store, stale)
        assert getattr(err.value, "code", None) == "conflict"

    def test_correlation_mismatch_from_a_rogue_endpoint_is_detected(self, system):
        def rogue(doc, caller_role=None):
            env = ev.parse(doc)
            return ev.serialize(ev.Envelope(
                message_id=str(uuid.uuid4()),
                correlation_id=str(uuid.uuid4()),
                timestamp=env.timestamp,
                service=env.service,
                operation="pong",
                body=ev.Pong(),
            ))

        system.transport.bind_endpoint("inproc://rogue", rogue)
        system.registry.register("Payment", "1.0.0", "inproc://rogue")
        env = envelope_for("Payment", "ping", ev.Ping())
        assert system.bus.request(env).body == ev.Pong()
        # round-robin now lands on the rogue replica
        with pytest.raises(TransportError):
            system.bus.request(env)
