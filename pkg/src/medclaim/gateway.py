"""HTTP access layer: JSON API with bearer-token sessions and
role-based access, translating each external request into envelope
calls resolved through the registry.

The JSON surface is for browsers; between services the XML envelope
remains the contract.  Route handlers never import a service class:
every mutation travels through the bus.
"""

from __future__ import annotations

import hmac
import logging
import re
import secrets
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, Header, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import envelope as ev
from .bus import TransportError
from .config import AppConfig
from .domain import Claim, ClaimState, Money
from .monitor import MetricsSnapshot, Monitor, MonitorDaemon
from .orchestrator import allowed_events
from .registry import ServiceDescriptor, Unresolved, UnknownService
from .store import ClaimNotFound, GatewayUser
from .system import System, build_system

log = logging.getLogger(__name__)

# Route groups and the roles allowed on them; everything else is denied.
ROLE_MATRIX: dict[str, tuple[str, ...]] = {
    "preauth:submit": ("policyholder", "hospital"),
    "claims:list": ("policyholder", "hospital", "tpa"),
    "claims:view": ("policyholder", "hospital", "tpa"),
    "claims:scrutiny": ("tpa",),
    "claims:authorize": ("tpa",),
    "claims:payment": ("hospital", "tpa"),
    "claims:settle": ("tpa",),
    "hospitals:list": ("policyholder", "hospital"),
    "admin": ("admin",),
}

FAULT_STATUS = {
    "invalid-request": 400,
    "forbidden": 403,
    "unknown-hospital": 404,
    "unknown-claim": 404,
    "wrong-state": 409,
    "conflict": 409,
    "service-unavailable": 503,
    "schema-violation": 502,
}

_CURRENCY_RE = re.compile(r"^[A-Z]{3}$")


def authorize(role: str, group: str) -> bool:
    return role in ROLE_MATRIX.get(group, ())


@dataclass(frozen=True)
class Principal:
    subject_id: str
    role: str
    display_name: str
    uid: Optional[str] = None
    hospital_id: Optional[str] = None


@dataclass(frozen=True)
class Session:
    token: str
    principal: Principal
    issued_at: datetime
    expires_at: datetime


class SessionStore:
    """In-memory bearer-token sessions with a fixed TTL."""

    def __init__(self, ttl_minutes: int, clock=ev.utc_second):
        self.ttl = timedelta(minutes=ttl_minutes)
        self.clock = clock
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}

    def login(self, users: dict[str, GatewayUser], username: str, secret: str
              ) -> Optional[Session]:
        """Constant-time credential check: unknown user and wrong secret
        cost the same and yield the same None."""
        user = users.get(username)
        expected = user.secret if user is not None else "missing-user-placeholder"
        ok = hmac.compare_digest(expected.encode(), secret.encode())
        if user is None or not ok:
            return None
        now = self.clock()
        session = Session(
            token=secrets.token_urlsafe(32),
            principal=Principal(
                subject_id=user.username,
                role=user.role,
                display_name=user.display_name,
                uid=user.uid,
                hospital_id=user.hospital_id,
            ),
            issued_at=now,
            expires_at=now + self.ttl,
        )
        with self._lock:
            self._sessions[session.token] = session
        return session

    def lookup(self, token: str) -> Optional[Session]:
        with self._lock:
            session = self._sessions.get(token)
            if session is None:
                return None
            if session.expires_at <= self.clock():
                del self._sessions[token]
                return None
            return session


# ---------------------------------------------------------------------------
# JSON rendering
# ---------------------------------------------------------------------------


def money_json(value: Money) -> dict:
    return {"amount_minor": value.amount, "currency": value.currency}


def _stamp(value: datetime) -> str:
    return ev.format_instant(value)


def claim_summary_json(claim: Claim) -> dict:
    return {
        "claim_id": claim.claim_id,
        "state": claim.state.value,
        "uid": claim.uid,
        "hospital_id": claim.hospital_id,
        "estimated_expense": money_json(claim.preauth.estimated_expense),
        "submitted_at": _stamp(claim.submitted_at),
    }


def claim_detail_json(claim: Claim) -> dict:
    detail = claim_summary_json(claim)
    detail["preauth"] = {
        "illness_details": claim.preauth.illness_details,
        "proposed_treatment": claim.preauth.proposed_treatment,
        "doctor_name": claim.preauth.certifying_doctor.name,
        "doctor_registration_number": claim.preauth.certifying_doctor.registration_number,
    }
    detail["policy"] = None if claim.policy is None else {
        "company_id": claim.policy.company_id,
        "policy_type": claim.policy.policy_type,
        "eligible_amount": money_json(claim.policy.eligible_amount),
        "status": claim.policy.status.value,
    }
    detail["scrutiny"] = None if claim.scrutiny is None else {
        "decision": claim.scrutiny.decision,
        "adjuster_id": claim.scrutiny.adjuster_id,
        "notes": claim.scrutiny.notes,
        "decided_at": _stamp(claim.scrutiny.decided_at),
    }
    detail["authorization"] = None if claim.authorization is None else {
        "authorized_amount": money_json(claim.authorization.authorized_amount),
        "authorized_at": _stamp(claim.authorization.authorized_at),
    }
    detail["payment"] = None if claim.payment is None else {
        "paid_amount": money_json(claim.payment.paid_amount),
        "actual_expense": money_json(claim.payment.actual_expense),
        "payee_hospital_id": claim.hospital_id,
        "paid_at": _stamp(claim.payment.paid_at),
    }
    detail["settlement"] = None if claim.settlement is None else {
        "refund_amount": money_json(claim.settlement.refund_amount),
        "settled_at": _stamp(claim.settlement.settled_at),
    }
    detail["history"] = [
        {
            "from_state": entry.from_state.value,
            "event": entry.event.value,
            "to_state": entry.to_state.value,
            "at": _stamp(entry.at),
            "actor": entry.actor,
        }
        for entry in claim.history
    ]
    detail["allowed_events"] = sorted(e.value for e in allowed_events(claim.state))
    return detail


def descriptor_json(entry: ServiceDescriptor) -> dict:
    return {
        "service_id": entry.service_id,
        "name": entry.name,
        "version": entry.version,
        "endpoint": entry.endpoint,
        "state": entry.state.value,
        "health": {
            "consecutive_failures": entry.health.consecutive_failures,
            "consecutive_successes": entry.health.consecutive_successes,
            "last_probe_at": None if entry.health.last_probe_at is None
            else _stamp(entry.health.last_probe_at),
        },
    }


def metrics_json(snapshot: MetricsSnapshot) -> dict:
    return {
        "generated_at": _stamp(snapshot.generated_at),
        "window_seconds": snapshot.window_seconds,
        "schema_violations_total": snapshot.schema_violations_total,
        "services": [
            {
                "service_id": m.service_id,
                "name": m.name,
                "endpoint": m.endpoint,
                "state": m.state,
                "availability": m.availability,
                "p50_ms": m.p50_ms,
                "p95_ms": m.p95_ms,
                "probes_total": m.probes_total,
                "failures_total": m.failures_total,
            }
            for m in snapshot.services
        ],
    }


# ---------------------------------------------------------------------------
# Request validation helpers
# ---------------------------------------------------------------------------


def _bad_request(message: str) -> HTTPException:
    return HTTPException(400, {"code": "invalid-request", "message": message})


def _forbidden(message: str = "role may not perform this action") -> HTTPException:
    return HTTPException(403, {"code": "forbidden", "message": message})


def _need_str(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str) or not value.strip():
        raise _bad_request(f"field '{key}' must be a non-empty string")
    return value


def _need_money(payload: dict, key: str) -> Money:
    obj = payload.get(key)
    if not isinstance(obj, dict):
        raise _bad_request(f"field '{key}' must be {{amount_minor, currency}}")
    amount = obj.get("amount_minor")
    currency = obj.get("currency", "INR")
    if isinstance(amount, bool) or not isinstance(amount, int):
        raise _bad_request(f"{key}.amount_minor must be an integer")
    if not isinstance(currency, str) or not _CURRENCY_RE.match(currency):
        raise _bad_request(f"{key}.currency must be a three-letter code")
    if amount < 0:
        raise _bad_request(f"{key}.amount_minor must not be negative")
    return Money(amount, currency)


def _need_uuid(value: str, what: str) -> str:
    try:
        parsed = uuid.UUID(value)
    except ValueError:
        raise _bad_request(f"{what} must be a UUID") from None
    return str(parsed)


# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------


@dataclass
class GatewayRuntime:
    config: AppConfig
    system: System
    sessions: SessionStore
    monitor: Monitor
    daemon: MonitorDaemon


def _default_ui_dist() -> Optional[Path]:
    checkout = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return checkout if checkout.is_dir() else None


def create_app(config: Optional[AppConfig] = None,
               system: Optional[System] = None,
               start_daemon: bool = True) -> FastAPI:
    config = config or AppConfig()
    if system is None:
        fixtures_text = None
        if config.fixtures_path:
            fixtures_text = Path(config.fixtures_path).read_text("utf-8")
        system = build_system(fixtures_text=fixtures_text,
                              journal_path=config.store_path,
                              tpa_id=config.tpa_id)
    sessions = SessionStore(config.session_ttl_minutes)
    monitor = Monitor(
        system.registry, system.transport, system.stats,
        timeout_ms=config.monitor_timeout_ms,
        unbind_after=config.monitor_unbind_after,
        rebind_after=config.monitor_rebind_after,
    )
    daemon = MonitorDaemon(monitor, interval_ms=config.monitor_interval_ms)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if start_daemon:
            daemon.start()
        try:
            yield
        finally:
            if start_daemon:
                daemon.stop()

    app = FastAPI(title="medclaim gateway", lifespan=lifespan)
    app.state.runtime = GatewayRuntime(config, system, sessions, monitor, daemon)

    store = system.store
    directory = system.directory
    registry = system.registry
    bus = system.bus

    @app.exception_handler(RequestValidationError)
    async def handle_unparseable(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"detail": {"code": "invalid-request",
                                "message": "malformed request body"}})

    # -- auth plumbing ---------------------------------------------------------

    def require_session(authorization: Optional[str]) -> Session:
        if not authorization or not authorization.startswith("Bearer "):
            raise HTTPException(401, {"code": "auth-required",
                                      "message": "missing bearer token"})
        session = sessions.lookup(authorization[len("Bearer "):])
        if session is None:
            raise HTTPException(401, {"code": "auth-required",
                                      "message": "session is invalid or expired"})
        return session

    def require_role(authorization: Optional[str], group: str) -> Principal:
        principal = require_session(authorization).principal
        if not authorize(principal.role, group):
            raise _forbidden(f"role {principal.role} may not access {group}")
        return principal

    # -- envelope plumbing -----------------------------------------------------

    def call_service(service: str, operation: str, body, role: str):
        env = ev.Envelope(
            message_id=str(uuid.uuid4()),
            correlation_id=str(uuid.uuid4()),
            timestamp=ev.utc_second(),
            service=service,
            operation=operation,
            body=body,
        )
        try:
            response = bus.request(env, caller_role=role)
        except Unresolved as exc:
            raise HTTPException(503, {"code": "service-unavailable",
                                      "message": str(exc)}) from None
        except TransportError as exc:
            log.error("transport failure calling %s.%s: %s", service, operation, exc)
            raise HTTPException(502, {"code": "bad-gateway",
                                      "message": "internal transport failure"}) from None
        if isinstance(response.body, ev.Fault):
            fault = response.body
            status = FAULT_STATUS.get(fault.code, 500)
            raise HTTPException(status, {"code": fault.code, "message": fault.message})
        return response.body

    def load_claim_or_404(claim_id: str) -> Claim:
        try:
            return store.load_claim(claim_id)
        except ClaimNotFound:
            raise HTTPException(404, {"code": "unknown-claim",
                                      "message": f"no claim {claim_id}"}) from None

    def visible_claim(claim_id: str, principal: Principal) -> Claim:
        """Ownership scope for reads: cross-tenant ids look nonexistent."""
        claim = load_claim_or_404(_need_uuid(claim_id, "claim id"))
        if principal.role == "policyholder" and claim.uid != principal.uid:
            raise HTTPException(404, {"code": "unknown-claim",
                                      "message": f"no claim {claim_id}"})
        if principal.role == "hospital" and claim.hospital_id != principal.hospital_id:
            raise HTTPException(404, {"code": "unknown-claim",
                                      "message": f"no claim {claim_id}"})
        return claim

    # -- routes ------------------------------------------------------------------

    @app.post("/login")
    def login(payload: dict = Body(...)):
        username = _need_str(payload, "username")
        secret = _need_str(payload, "secret")
        session = sessions.login(directory.users, username, secret)
        if session is None:
            raise HTTPException(401, {"code": "auth-failed",
                                      "message": "invalid credentials"})
        principal = session.principal
        return {
            "token": session.token,
            "role": principal.role,
            "display_name": principal.display_name,
            "subject_id": principal.subject_id,
            "uid": principal.uid,
            "hospital_id": principal.hospital_id,
            "expires_at": _stamp(session.expires_at),
        }

    @app.post("/preauth", status_code=201)
    def submit_preauth(payload: dict = Body(...),
                       authorization: Optional[str] = Header(None)):
        principal = require_role(authorization, "preauth:submit")
        uid = _need_str(payload, "uid")
        hospital_id = _need_str(payload, "hospital_id")
        if principal.role == "policyholder" and uid != principal.uid:
            raise _forbidden("policyholders may file only for their own policy")
        if principal.role == "hospital" and hospital_id != principal.hospital_id:
            raise _forbidden("hospital desks may file only for their own hospital")
        body = ev.PreAuthSubmitRequest(
            uid=uid,
            hospital_id=hospital_id,
            illness_details=_need_str(payload, "illness_details"),
            proposed_treatment=_need_str(payload, "proposed_treatment"),
            estimated_expense=_need_money(payload, "estimated_expense"),
            doctor_name=_need_str(payload, "doctor_name"),
            doctor_registration_number=_need_str(payload, "doctor_registration_number"),
        )
        result = call_service("PreAuth", "preauth_submit", body, principal.role)
        return {
            "claim_id": result.claim_id,
            "state": result.state,
            "message": result.message,
        }

    @app.get("/claims")
    def list_claims(state: Optional[str] = Query(None),
                    authorization: Optional[str] = Header(None)):
        principal = require_role(authorization, "claims:list")
        state_filter = None
        if state is not None:
            try:
                state_filter = ClaimState(state)
            except ValueError:
                raise _bad_request(f"unknown state '{state}'") from None
        if principal.role == "policyholder":
            claims = store.list_claims(state=state_filter, uid=principal.uid)
        elif principal.role == "hospital":
            claims = store.list_claims(state=state_filter,
                                       hospital_id=principal.hospital_id)
        else:
            claims = store.list_claims(state=state_filter)
        return {"claims": [claim_summary_json(c) for c in claims]}

    @app.get("/claims/{claim_id}")
    def view_claim(claim_id: str, authorization: Optional[str] = Header(None)):
        principal = require_role(authorization, "claims:view")
        return claim_detail_json(visible_claim(claim_id, principal))

    @app.post("/claims/{claim_id}/scrutiny")
    def scrutinize_claim(claim_id: str, payload: dict = Body(...),
                         authorization: Optional[str] = Header(None)):
        principal = require_role(authorization, "claims:scrutiny")
        decision = _need_str(payload, "decision")
        if decision not in ("approve", "deny"):
            raise _bad_request("decision must be 'approve' or 'deny'")
        notes = payload.get("notes")
        if notes is not None and (not isinstance(notes, str) or not notes.strip()):
            raise _bad_request("notes must be a non-empty string when present")
        body = ev.ScrutinyRequest(
            claim_id=_need_uuid(claim_id, "claim id"),
            decision=decision,
            adjuster_id=principal.subject_id,
            notes=notes,
        )
        result = call_service("Scrutiny", "scrutinize", body, principal.role)
        return {
            "claim_id": result.claim_id,
            "state": result.state,
            "hospital_in_network": result.hospital_in_network,
            "estimate_within_eligible": result.estimate_within_eligible,
        }

    @app.post("/claims/{claim_id}/authorize")
    def authorize_claim(claim_id: str, authorization: Optional[str] = Header(None)):
        principal = require_role(authorization, "claims:authorize")
        body = ev.AuthorizeRequest(claim_id=_need_uuid(claim_id, "claim id"))
        result = call_service("CashAuth", "authorize_cash", body, principal.role)
        return {
            "claim_id": result.claim_id,
            "authorized_amount": money_json(result.authorized_amount),
            "authorized_at": _stamp(result.authorized_at),
        }

    @app.post("/claims/{claim_id}/payment")
    def pay_claim(claim_id: str, payload: dict = Body(...),
                  authorization: Optional[str] = Header(None)):
        principal = require_role(authorization, "claims:payment")
        claim_id = _need_uuid(claim_id, "claim id")
        if principal.role == "hospital":
            claim = load_claim_or_404(claim_id)
            if claim.hospital_id != principal.hospital_id:
                raise _forbidden("hospital desks may report only their own claims")
        body = ev.PaymentRequest(
            claim_id=claim_id,
            actual_expense=_need_money(payload, "actual_expense"),
        )
        result = call_service("Payment", "pay_hospital", body, principal.role)
        return {
            "claim_id": result.claim_id,
            "paid_amount": money_json(result.paid_amount),
            "actual_expense": money_json(result.actual_expense),
            "paid_at": _stamp(result.paid_at),
        }

    @app.post("/claims/{claim_id}/settle")
    def settle_claim(claim_id: str, authorization: Optional[str] = Header(None)):
        principal = require_role(authorization, "claims:settle")
        body = ev.SettleRequest(claim_id=_need_uuid(claim_id, "claim id"))
        result = call_service("Settlement", "settle", body, principal.role)
        return {
            "claim_id": result.claim_id,
            "refund_amount": money_json(result.refund_amount),
            "settled_at": _stamp(result.settled_at),
        }

    @app.get("/hospitals")
    def list_hospitals(tpa: Optional[str] = Query(None),
                       authorization: Optional[str] = Header(None)):
        require_role(authorization, "hospitals:list")
        if tpa is not None:
            hospitals = directory.network_hospitals(tpa)
        else:
            hospitals = sorted(directory.hospitals.values(),
                               key=lambda h: h.hospital_id)
        return {"hospitals": [
            {
                "hospital_id": h.hospital_id,
                "name": h.name,
                "tpa_networks": sorted(h.tpa_networks),
            }
            for h in hospitals
        ]}

    @app.get("/registry/services")
    def list_services(authorization: Optional[str] = Header(None)):
        require_role(authorization, "admin")
        return {"services": [descriptor_json(d) for d in registry.list()]}

    @app.post("/registry/services/{service_id}/state")
    def set_service_state(service_id: str, payload: dict = Body(...),
                          authorization: Optional[str] = Header(None)):
        require_role(authorization, "admin")
        state = payload.get("state")
        if state not in ("bound", "unbound"):
            raise _bad_request("state must be 'bound' or 'unbound'")
        try:
            registry.set_state(service_id, state)
        except UnknownService:
            raise HTTPException(404, {"code": "unknown-service",
                                      "message": f"no service {service_id}"}) from None
        return descriptor_json(registry.get(service_id))

    @app.get("/monitor/metrics")
    def monitor_metrics(authorization: Optional[str] = Header(None)):
        require_role(authorization, "admin")
        return metrics_json(monitor.metrics())

    # -- static UI ----------------------------------------------------------------

    dist = Path(config.ui_dist) if config.ui_dist else _default_ui_dist()
    if dist is not None and dist.is_dir():
        app.mount("/ui", StaticFiles(directory=str(dist), html=True), name="ui")
    else:
        @app.get("/ui")
        @app.get("/ui/{rest:path}")
        def ui_not_built(rest: str = ""):
            raise HTTPException(404, {
                "code": "ui-not-built",
                "message": "the browser app is not built; run npm install && "
                           "npm run build under frontend/ and restart",
            })

    return app
