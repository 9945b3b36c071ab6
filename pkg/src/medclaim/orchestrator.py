"""Claim workflow state machine, the shared-service topology harness,
and the scripted scenario runner.

The transition table is the single normative definition of the claim
lifecycle; every service mutates claims only through advance().
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional

from . import envelope as ev
from .domain import (
    AuthorizationRecord,
    Claim,
    ClaimEvent,
    ClaimState,
    HistoryEntry,
    Money,
    PaymentRecord,
    PolicySnapshot,
    ScrutinyRecord,
    SettlementRecord,
    TERMINAL_STATES,
)
from .registry import Registry

# The one internal step: a freshly verified claim is queued for TPA
# scrutiny without further input, so (VERIFIED, Submit) is machine-fired
# rather than caller-fired.
TRANSITIONS: dict[tuple[ClaimState, ClaimEvent], ClaimState] = {
    (ClaimState.SUBMITTED, ClaimEvent.VERIFY_OK): ClaimState.VERIFIED,
    (ClaimState.SUBMITTED, ClaimEvent.VERIFY_FAIL): ClaimState.ID_REJECTED,
    (ClaimState.VERIFIED, ClaimEvent.SUBMIT): ClaimState.UNDER_SCRUTINY,
    (ClaimState.UNDER_SCRUTINY, ClaimEvent.SCRUTINY_APPROVE): ClaimState.SCRUTINY_APPROVED,
    (ClaimState.UNDER_SCRUTINY, ClaimEvent.SCRUTINY_DENY): ClaimState.SCRUTINY_DENIED,
    (ClaimState.SCRUTINY_APPROVED, ClaimEvent.AUTHORIZE): ClaimState.CASH_AUTHORIZED,
    (ClaimState.CASH_AUTHORIZED, ClaimEvent.PAYMENT_DONE): ClaimState.PAID,
    (ClaimState.PAID, ClaimEvent.SETTLE): ClaimState.SETTLED,
}

INTERNAL_EVENTS = frozenset({ClaimEvent.SUBMIT})


class IllegalTransition(Exception):
    def __init__(self, state: ClaimState, event: ClaimEvent):
        super().__init__(f"event {event.value} is not allowed in state {state.value}")
        self.state = state
        self.event = event


def allowed_events(state: ClaimState) -> frozenset[ClaimEvent]:
    return frozenset(e for (s, e) in TRANSITIONS if s == state)


def advance(claim: Claim, event: ClaimEvent, at: datetime, actor: str, *,
            policy: Optional[PolicySnapshot] = None,
            scrutiny: Optional[ScrutinyRecord] = None,
            authorization: Optional[AuthorizationRecord] = None,
            payment: Optional[PaymentRecord] = None,
            settlement: Optional[SettlementRecord] = None,
            ) -> tuple[Claim, list[ClaimEvent]]:
    """Apply one event; returns the new claim plus any machine-fired
    follow-up events the caller must apply immediately.

    Pure: same claim and event always yield the same successor.
    """
    to_state = TRANSITIONS.get((claim.state, event))
    if to_state is None:
        raise IllegalTransition(claim.state, event)
    entry = HistoryEntry(claim.state, event, to_state, at, actor)
    successor = Claim(
        claim_id=claim.claim_id,
        state=to_state,
        preauth=claim.preauth,
        policy=policy if policy is not None else claim.policy,
        scrutiny=scrutiny if scrutiny is not None else claim.scrutiny,
        authorization=authorization if authorization is not None else claim.authorization,
        payment=payment if payment is not None else claim.payment,
        settlement=settlement if settlement is not None else claim.settlement,
        history=claim.history + (entry,),
    )
    commands = [ClaimEvent.SUBMIT] if event == ClaimEvent.VERIFY_OK else []
    return successor, commands


# ---------------------------------------------------------------------------
# Topology comparison: shared services vs one silo per policy type
# ---------------------------------------------------------------------------

SHARED_SERVICES = ("PreAuth", "Scrutiny", "CashAuth")


class InvalidArgument(ValueError):
    pass


@dataclass(frozen=True)
class TopologyReport:
    mode: str                          # "soa" | "baseline"
    policy_type_count: int
    instance_counts: dict[str, int]
    total_shared_instances: int


def _count_instances(registry: Registry) -> dict[str, int]:
    counts: dict[str, int] = {}
    for entry in registry.list():
        counts[entry.name] = counts.get(entry.name, 0) + 1
    return counts


def compare_topologies(n_policy_types: int) -> tuple[TopologyReport, TopologyReport]:
    """Build both registry topologies for n policy types and count live
    registrations: one shared instance per service versus one dedicated
    instance per policy type."""
    if not isinstance(n_policy_types, int) or n_policy_types < 1:
        raise InvalidArgument("policy type count must be a positive integer")

    soa = Registry()
    for name in SHARED_SERVICES:
        soa.register(name, "1.0.0", f"inproc://{name.lower()}-shared")

    baseline = Registry()
    for name in SHARED_SERVICES:
        for i in range(1, n_policy_types + 1):
            baseline.register(name, "1.0.0", f"inproc://{name.lower()}-type{i}")

    soa_counts = _count_instances(soa)
    base_counts = _count_instances(baseline)
    return (
        TopologyReport("soa", n_policy_types, soa_counts, sum(soa_counts.values())),
        TopologyReport("baseline", n_policy_types, base_counts, sum(base_counts.values())),
    )


# ---------------------------------------------------------------------------
# Scenario runner
# ---------------------------------------------------------------------------

NS_SCENARIO = uuid.UUID("6f1c9f2e-0d6b-4c78-9b7e-0a4d2f0e8a04")
_SCENARIO_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)

_EVENT_SERVICES = {
    ClaimEvent.SCRUTINY_APPROVE: ("Scrutiny", "scrutinize"),
    ClaimEvent.SCRUTINY_DENY: ("Scrutiny", "scrutinize"),
    ClaimEvent.AUTHORIZE: ("CashAuth", "authorize_cash"),
    ClaimEvent.PAYMENT_DONE: ("Payment", "pay_hospital"),
    ClaimEvent.SETTLE: ("Settlement", "settle"),
}


class ScenarioParseError(ValueError):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"line {line_no}: {detail}")
        self.line_no = line_no
        self.detail = detail


@dataclass(frozen=True)
class ScenarioStep:
    line_no: int
    ref: str
    action: str                       # "submit" | "event"
    uid: str = ""
    hospital_id: str = ""
    estimated_minor: int = 0
    event: Optional[ClaimEvent] = None
    actual_minor: int = 0
    notes: Optional[str] = None


@dataclass(frozen=True)
class TraceStep:
    line_no: int
    ref: str
    request: bytes                    # exact envelope delivered
    response: ev.Envelope
    fault: Optional[ev.Fault]


@dataclass
class Trace:
    steps: list[TraceStep] = field(default_factory=list)
    claim_ids: dict[str, str] = field(default_factory=dict)

    @property
    def requests(self) -> list[bytes]:
        return [s.request for s in self.steps]

    def final_states(self, store) -> dict[str, str]:
        out = {}
        for ref, claim_id in self.claim_ids.items():
            out[ref] = store.load_claim(claim_id).state.value
        return out


def parse_scenario(text: str) -> list[ScenarioStep]:
    """Scenario grammar: `claim REF submit UID HOSPITAL ESTIMATED-MINOR`
    creates a claim; `claim REF event NAME [args]` applies a caller
    event (ScrutinyApprove [notes], ScrutinyDeny NOTES,
    Authorize, PaymentDone ACTUAL-MINOR, Settle)."""
    steps: list[ScenarioStep] = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        words = line.split()
        if words[0] != "claim" or len(words) < 3:
            raise ScenarioParseError(line_no, "expected 'claim REF submit|event ...'")
        ref, action = words[1], words[2]
        args = words[3:]
        if action == "submit":
            if len(args) != 3:
                raise ScenarioParseError(line_no, "submit needs UID HOSPITAL ESTIMATED-MINOR")
            try:
                estimated = int(args[2])
            except ValueError:
                raise ScenarioParseError(line_no, f"bad amount '{args[2]}'") from None
            steps.append(ScenarioStep(line_no, ref, "submit", uid=args[0],
                                      hospital_id=args[1], estimated_minor=estimated))
        elif action == "event":
            if not args:
                raise ScenarioParseError(line_no, "event needs a name")
            name = args[0]
            try:
                event = ClaimEvent(name)
            except ValueError:
                raise ScenarioParseError(line_no, f"unknown event '{name}'") from None
            if event not in _EVENT_SERVICES:
                raise ScenarioParseError(
                    line_no, f"event '{name}' is internal and cannot be scripted")
            notes: Optional[str] = None
            actual = 0
            rest = args[1:]
            if event == ClaimEvent.PAYMENT_DONE:
                if len(rest) != 1:
                    raise ScenarioParseError(line_no, "PaymentDone needs ACTUAL-MINOR")
                try:
                    actual = int(rest[0])
                except ValueError:
                    raise ScenarioParseError(line_no, f"bad amount '{rest[0]}'") from None
            elif event in (ClaimEvent.SCRUTINY_APPROVE, ClaimEvent.SCRUTINY_DENY):
                notes = " ".join(rest) if rest else None
                if event == ClaimEvent.SCRUTINY_DENY and not notes:
                    raise ScenarioParseError(line_no, "ScrutinyDeny needs NOTES")
            elif rest:
                raise ScenarioParseError(line_no, f"{name} takes no arguments")
            steps.append(ScenarioStep(line_no, ref, "event", event=event,
                                      actual_minor=actual, notes=notes))
        else:
            raise ScenarioParseError(line_no, f"unknown action '{action}'")
    return steps


def _step_envelope(k: int, step: ScenarioStep, claim_ids: dict[str, str]) -> ev.Envelope:
    correlation_id = str(uuid.uuid5(NS_SCENARIO, f"corr:{k}"))
    message_id = str(uuid.uuid5(NS_SCENARIO, f"msg:{k}"))
    at = _SCENARIO_EPOCH + timedelta(seconds=k)
    if step.action == "submit":
        body = ev.PreAuthSubmitRequest(
            uid=step.uid,
            hospital_id=step.hospital_id,
            illness_details="scenario illness",
            proposed_treatment="scenario treatment",
            estimated_expense=Money(step.estimated_minor, "INR"),
            doctor_name="Dr. Scenario",
            doctor_registration_number="MCI/0000/0001",
        )
        service, operation = "PreAuth", "preauth_submit"
    else:
        claim_id = claim_ids[step.ref]
        service, operation = _EVENT_SERVICES[step.event]
        if step.event in (ClaimEvent.SCRUTINY_APPROVE, ClaimEvent.SCRUTINY_DENY):
            body = ev.ScrutinyRequest(
                claim_id=claim_id,
                decision="approve" if step.event == ClaimEvent.SCRUTINY_APPROVE else "deny",
                adjuster_id="scenario-adjuster",
                notes=step.notes)
        elif step.event == ClaimEvent.AUTHORIZE:
            body = ev.AuthorizeRequest(claim_id=claim_id)
        elif step.event == ClaimEvent.PAYMENT_DONE:
            body = ev.PaymentRequest(claim_id=claim_id,
                                     actual_expense=Money(step.actual_minor, "INR"))
        else:
            body = ev.SettleRequest(claim_id=claim_id)
    return ev.Envelope(
        message_id=message_id,
        correlation_id=correlation_id,
        timestamp=at,
        service=service,
        operation=operation,
        body=body,
    )


def run_scenario(text: str, bus) -> Trace:
    """Drive a scripted scenario through the full service path.

    Every step becomes one request envelope delivered via the bus (and
    recorded in the trace); ids and timestamps derive from the step
    index, so the same script always produces the same envelopes.
    """
    steps = parse_scenario(text)
    trace = Trace()
    for k, step in enumerate(steps):
        if step.action == "event" and step.ref not in trace.claim_ids:
            raise ScenarioParseError(step.line_no, f"claim ref '{step.ref}' never submitted")
        env = _step_envelope(k, step, trace.claim_ids)
        raw = ev.serialize(env)
        response = ev.parse(bus.deliver(raw))
        fault = response.body if isinstance(response.body, ev.Fault) else None
        if step.action == "submit" and isinstance(response.body, ev.PreAuthSubmitResponse):
            trace.claim_ids[step.ref] = response.body.claim_id
        trace.steps.append(TraceStep(step.line_no, step.ref, raw, response, fault))
    return trace


def replay_trace(requests: list[bytes], bus) -> None:
    """Re-deliver recorded request envelopes against a fresh system."""
    for raw in requests:
        bus.deliver(raw)
