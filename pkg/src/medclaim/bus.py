"""Service integration plumbing: the in-process transport, the service
bus that resolves names through the registry, and the envelope-handler
scaffold every service builds on.

Every inter-service call is bytes-in/bytes-out envelope traffic through
an endpoint, even though all services live in one process; swapping the
transport for a networked one would not change any service.
"""

from __future__ import annotations

import logging
import re
import threading
import uuid
from typing import Callable, NoReturn, Optional, Protocol

from . import envelope as ev
from .registry import Registry, Unresolved

log = logging.getLogger(__name__)

# Deterministic derivation namespaces: ids of responses and internal
# calls are functions of the ids of the request that caused them, which
# is what makes envelope traces replayable bit-for-bit.
NS_RESPONSE = uuid.UUID("6f1c9f2e-0d6b-4c78-9b7e-0a4d2f0e8a01")
NS_INTERNAL = uuid.UUID("6f1c9f2e-0d6b-4c78-9b7e-0a4d2f0e8a02")
NS_CLAIM = uuid.UUID("6f1c9f2e-0d6b-4c78-9b7e-0a4d2f0e8a03")

Handler = Callable[[bytes, Optional[str]], bytes]


class TransportError(RuntimeError):
    pass


class Transport(Protocol):
    def send(self, endpoint: str, doc: bytes, caller_role: Optional[str] = None) -> bytes:
        ...


class InProcTransport:
    """Endpoint table for a single-process deployment."""

    def __init__(self):
        self._routes: dict[str, Handler] = {}
        self._lock = threading.Lock()

    def bind_endpoint(self, endpoint: str, handler: Handler) -> None:
        with self._lock:
            if endpoint in self._routes:
                raise TransportError(f"endpoint {endpoint} already bound")
            self._routes[endpoint] = handler

    def send(self, endpoint: str, doc: bytes, caller_role: Optional[str] = None) -> bytes:
        with self._lock:
            handler = self._routes.get(endpoint)
        if handler is None:
            raise TransportError(f"no handler at {endpoint}")
        return handler(doc, caller_role)


class WireStats:
    """Counters the monitor reports; schema failures anywhere on the
    wire are treated as security-relevant events."""

    def __init__(self):
        self._lock = threading.Lock()
        self._schema_violations = 0

    def count_schema_violation(self) -> None:
        with self._lock:
            self._schema_violations += 1

    @property
    def schema_violations_total(self) -> int:
        with self._lock:
            return self._schema_violations


class ServiceBus:
    """Resolves a service name through the registry and carries one
    request envelope to it, returning the correlated response."""

    def __init__(self, registry: Registry, transport: Transport, stats: WireStats):
        self.registry = registry
        self.transport = transport
        self.stats = stats

    def request(self, env: ev.Envelope, caller_role: Optional[str] = None) -> ev.Envelope:
        """Send and await; raises Unresolved when no instance of the
        target service is bound (callers map this to service-unavailable).
        """
        endpoint = self.registry.resolve(env.service)
        raw = self.transport.send(endpoint, ev.serialize(env), caller_role)
        response = ev.parse(raw)
        if response.correlation_id != env.correlation_id:
            raise TransportError(
                f"response correlation {response.correlation_id} does not match request")
        return response

    def deliver(self, doc: bytes, caller_role: Optional[str] = None) -> bytes:
        """Entry point for raw envelope bytes (trace replay): routes by
        the Service header through the same resolve path."""
        env = ev.parse(doc)
        endpoint = self.registry.resolve(env.service)
        return self.transport.send(endpoint, doc, caller_role)


# ---------------------------------------------------------------------------
# Envelope-handler scaffold
# ---------------------------------------------------------------------------

_CORR_RE = re.compile(
    rb"<CorrelationId>([0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12})"
    rb"</CorrelationId>")
_OP_RE = re.compile(rb"<Operation>([a-z_]+)</Operation>")
_NIL_UUID = "00000000-0000-4000-8000-000000000000"


def derive_response_id(request_message_id: str) -> str:
    return str(uuid.uuid5(NS_RESPONSE, request_message_id))


def internal_call_ids(correlation_id: str, service: str, operation: str) -> str:
    """Message id for a nested service call, derived so replays of the
    same top-level request regenerate identical internal traffic."""
    return str(uuid.uuid5(NS_INTERNAL, f"{correlation_id}|{service}|{operation}"))


def claim_id_for(correlation_id: str) -> str:
    return str(uuid.uuid5(NS_CLAIM, f"claim:{correlation_id}"))


class EnvelopeHandler:
    """Common service behavior: parse, dispatch by operation, answer
    pings, turn schema failures and domain refusals into Fault
    envelopes with the request's correlation id.

    Subclasses declare NAME plus OPERATIONS: a map from operation name
    to (payload class, allowed roles or None for unrestricted, method
    name). A caller_role of None marks trusted internal traffic and
    bypasses role checks; the gateway always passes the session role.
    """

    NAME: str = ""
    VERSION: str = "1.0.0"
    OPERATIONS: dict[str, tuple[type, Optional[tuple[str, ...]], str]] = {}

    def __init__(self, stats: Optional[WireStats] = None):
        self.stats = stats or WireStats()

    # -- plumbing ------------------------------------------------------------

    def handle(self, doc: bytes, caller_role: Optional[str] = None) -> bytes:
        try:
            env = ev.parse(doc)
        except ev.EnvelopeError as exc:
            self.stats.count_schema_violation()
            log.warning("%s rejected an undecodable envelope: %s", self.NAME, exc)
            return self._undecodable_fault(doc, str(exc))
        try:
            response = self.dispatch(env, caller_role)
        except _Refusal as refusal:
            response = self._fault(env, refusal.code, refusal.message)
        return ev.serialize(response)

    def dispatch(self, env: ev.Envelope, caller_role: Optional[str]) -> ev.Envelope:
        if env.operation == "ping":
            if not isinstance(env.body, ev.Ping):
                raise _Refusal("invalid-request", "ping carries a Ping payload")
            return self._respond(env, ev.Pong(), operation="pong")
        spec = self.OPERATIONS.get(env.operation)
        if spec is None:
            raise _Refusal("invalid-request",
                           f"operation {env.operation} is not served by {self.NAME}")
        payload_cls, roles, method = spec
        if not isinstance(env.body, payload_cls):
            raise _Refusal("invalid-request",
                           f"{env.operation} expects a {payload_cls.TAG} payload")
        if roles is not None and caller_role is not None and caller_role not in roles:
            raise _Refusal("forbidden",
                           f"role {caller_role} may not invoke {env.operation}")
        return getattr(self, method)(env, caller_role)

    def _respond(self, env: ev.Envelope, body, operation: Optional[str] = None) -> ev.Envelope:
        return ev.Envelope(
            message_id=derive_response_id(env.message_id),
            correlation_id=env.correlation_id,
            timestamp=env.timestamp,
            service=self.NAME,
            operation=operation or env.operation,
            body=body,
        )

    def _fault(self, env: ev.Envelope, code: str, message: str) -> ev.Envelope:
        return self._respond(env, ev.Fault(code=code, message=message))

    def _undecodable_fault(self, doc: bytes, detail: str) -> bytes:
        corr = _CORR_RE.search(doc)
        op = _OP_RE.search(doc)
        operation = op.group(1).decode() if op else ""
        if operation not in self.OPERATIONS and operation != "ping":
            operation = next(iter(self.OPERATIONS), "ping")
        env = ev.Envelope(
            message_id=str(uuid.uuid4()),
            correlation_id=corr.group(1).decode() if corr else _NIL_UUID,
            timestamp=ev.utc_second(),
            service=self.NAME,
            operation=operation,
            body=ev.Fault(code="schema-violation", message=detail),
        )
        return ev.serialize(env)

    def endpoint_handler(self) -> Handler:
        return self.handle


class _Refusal(Exception):
    """Internal signal: turn into a Fault response envelope."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def refuse(code: str, message: str) -> NoReturn:
    raise _Refusal(code, message)
