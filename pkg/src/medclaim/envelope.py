"""Strict XML envelope spoken by every service in the platform.

All inter-service traffic is a single message shape: a header carrying
identity and routing tokens, and a body carrying exactly one operation
payload. The accepted wire form is canonical and closed:

    <?xml version="1.0" encoding="UTF-8"?>
    <Envelope xmlns="urn:medclaim:envelope:1.0">
      <Header>
        <MessageId>UUID</MessageId>
        <CorrelationId>UUID</CorrelationId>
        <Timestamp>RFC3339-UTC</Timestamp>
        <Service>NAME</Service>
        <Operation>NAME</Operation>
      </Header>
      <Body>
        ...exactly one payload element...
      </Body>
    </Envelope>

Canonical form rules (the only form `parse` accepts, and the only form
`serialize` emits):

* element order fixed, two-space indentation, newline after every tag,
  no trailing whitespace, document ends with a newline;
* UTF-8, no BOM, no comments, no processing instructions, no CDATA;
* the only attribute besides the root ``xmlns`` is ``currency`` on
  ``<Amount>`` elements;
* text content escapes exactly ``& < >`` and the control characters
  tab/newline/carriage-return (as ``&#9; &#10; &#13;``); no other
  entities exist;
* UUIDs are lowercase hex, timestamps are whole-second UTC with a ``Z``
  suffix, money amounts are base-10 integers without leading zeroes.

Because the grammar is this small, the parser is a hand-written
line-oriented scanner rather than a general XML stack: anything outside
the restricted lexical grammar is `MalformedXml`, anything lexically
fine but structurally wrong is `SchemaViolation` with a per-element
violation report. `serialize(parse(doc)) == doc` holds for every
accepted document, which makes the wire form injective and byte-testable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields as dc_fields
from datetime import datetime, timezone
from enum import Enum
from typing import ClassVar, Optional, Union

from .domain import Money

ENVELOPE_NS = "urn:medclaim:envelope:1.0"
PROLOG = '<?xml version="1.0" encoding="UTF-8"?>'

SERVICE_NAMES = (
    "PreAuth",
    "Verification",
    "Scrutiny",
    "CashAuth",
    "Payment",
    "Settlement",
)

OPERATION_NAMES = (
    "preauth_submit",
    "verify",
    "scrutinize",
    "authorize_cash",
    "pay_hospital",
    "settle",
    "ping",
    "pong",
)

# Closed fault vocabulary; the gateway maps these onto HTTP statuses.
FAULT_CODES = (
    "invalid-request",
    "unknown-hospital",
    "unknown-claim",
    "wrong-state",
    "forbidden",
    "service-unavailable",
    "conflict",
    "schema-violation",
)

# Wire names of claim workflow states (kept in lockstep with the
# workflow enum; asserted by tests).
CLAIM_STATE_NAMES = (
    "SUBMITTED",
    "ID_REJECTED",
    "VERIFIED",
    "UNDER_SCRUTINY",
    "SCRUTINY_DENIED",
    "SCRUTINY_APPROVED",
    "CASH_AUTHORIZED",
    "PAID",
    "SETTLED",
)

SCRUTINY_DECISIONS = ("approve", "deny")

_UUID_RE = re.compile(r"^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$")
_STAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")
_CURRENCY_RE = re.compile(r"^[A-Z]{3}$")
_INT_RE = re.compile(r"^(0|[1-9][0-9]*)$")


# ---------------------------------------------------------------------------
# Errors and validation report
# ---------------------------------------------------------------------------


class EnvelopeError(ValueError):
    """Base class for all envelope codec errors."""


class MalformedXml(EnvelopeError):
    """Input is not even lexically an envelope document."""

    def __init__(self, detail: str, line: int = 0):
        super().__init__(f"line {line}: {detail}" if line else detail)
        self.detail = detail
        self.line = line


@dataclass(frozen=True)
class Violation:
    path: str
    rule: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: tuple[Violation, ...]


class SchemaViolation(EnvelopeError):
    """Lexically fine document that breaks the envelope schema."""

    def __init__(self, report: ValidationReport):
        first = report.violations[0]
        super().__init__(f"{first.path}: {first.rule}: {first.detail}")
        self.report = report


class UnknownOperation(SchemaViolation):
    """Body payload element is not in the operation vocabulary."""


class InvalidEnvelope(EnvelopeError):
    """Envelope value violates an invariant and cannot be serialized."""

    def __init__(self, field_name: str, detail: str):
        super().__init__(f"{field_name}: {detail}")
        self.field = field_name
        self.detail = detail


# ---------------------------------------------------------------------------
# Timestamp helpers (whole-second UTC is the canonical wire precision)
# ---------------------------------------------------------------------------


def format_instant(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_instant(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def utc_second(dt: Optional[datetime] = None) -> datetime:
    """Current (or given) instant truncated to canonical wire precision."""
    dt = dt or datetime.now(timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


# ---------------------------------------------------------------------------
# Payload field schema
# ---------------------------------------------------------------------------


class Kind(Enum):
    TEXT = "text"
    BOOL = "bool"
    UUID = "uuid"
    STAMP = "stamp"
    MONEY = "money"
    ENUM = "enum"


@dataclass(frozen=True)
class FieldSpec:
    tag: str                 # wire element name
    attr: str                # python attribute name
    kind: Kind
    optional: bool = False
    values: tuple[str, ...] = ()   # for Kind.ENUM


def _spec(tag: str, attr: str, kind: Kind, optional: bool = False,
          values: tuple[str, ...] = ()) -> FieldSpec:
    return FieldSpec(tag, attr, kind, optional, values)


@dataclass(frozen=True)
class PreAuthSubmitRequest:
    uid: str
    hospital_id: str
    illness_details: str
    proposed_treatment: str
    estimated_expense: Money
    doctor_name: str
    doctor_registration_number: str

    TAG: ClassVar[str] = "PreAuthSubmitRequest"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("Uid", "uid", Kind.TEXT),
        _spec("HospitalId", "hospital_id", Kind.TEXT),
        _spec("IllnessDetails", "illness_details", Kind.TEXT),
        _spec("ProposedTreatment", "proposed_treatment", Kind.TEXT),
        _spec("EstimatedExpense", "estimated_expense", Kind.MONEY),
        _spec("DoctorName", "doctor_name", Kind.TEXT),
        _spec("DoctorRegistrationNumber", "doctor_registration_number", Kind.TEXT),
    )


@dataclass(frozen=True)
class PreAuthSubmitResponse:
    claim_id: str
    state: str
    message: Optional[str] = None

    TAG: ClassVar[str] = "PreAuthSubmitResponse"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("ClaimId", "claim_id", Kind.UUID),
        _spec("State", "state", Kind.ENUM, values=CLAIM_STATE_NAMES),
        _spec("Message", "message", Kind.TEXT, optional=True),
    )


@dataclass(frozen=True)
class VerifyRequest:
    uid: str

    TAG: ClassVar[str] = "VerifyRequest"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("Uid", "uid", Kind.TEXT),
    )


@dataclass(frozen=True)
class VerifyResponse:
    valid: bool
    company_id: Optional[str] = None
    policy_type: Optional[str] = None
    eligible_amount: Optional[Money] = None
    message: Optional[str] = None
    detail: Optional[str] = None

    TAG: ClassVar[str] = "VerifyResponse"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("Valid", "valid", Kind.BOOL),
        _spec("CompanyId", "company_id", Kind.TEXT, optional=True),
        _spec("PolicyType", "policy_type", Kind.TEXT, optional=True),
        _spec("EligibleAmount", "eligible_amount", Kind.MONEY, optional=True),
        _spec("Message", "message", Kind.TEXT, optional=True),
        _spec("Detail", "detail", Kind.TEXT, optional=True),
    )


@dataclass(frozen=True)
class ScrutinyRequest:
    claim_id: str
    decision: str
    adjuster_id: str
    notes: Optional[str] = None

    TAG: ClassVar[str] = "ScrutinyRequest"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("ClaimId", "claim_id", Kind.UUID),
        _spec("Decision", "decision", Kind.ENUM, values=SCRUTINY_DECISIONS),
        _spec("AdjusterId", "adjuster_id", Kind.TEXT),
        _spec("Notes", "notes", Kind.TEXT, optional=True),
    )


@dataclass(frozen=True)
class ScrutinyResponse:
    claim_id: str
    state: str
    hospital_in_network: bool
    estimate_within_eligible: bool

    TAG: ClassVar[str] = "ScrutinyResponse"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("ClaimId", "claim_id", Kind.UUID),
        _spec("State", "state", Kind.ENUM, values=CLAIM_STATE_NAMES),
        _spec("HospitalInNetwork", "hospital_in_network", Kind.BOOL),
        _spec("EstimateWithinEligible", "estimate_within_eligible", Kind.BOOL),
    )


@dataclass(frozen=True)
class AuthorizeRequest:
    claim_id: str

    TAG: ClassVar[str] = "AuthorizeRequest"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("ClaimId", "claim_id", Kind.UUID),
    )


@dataclass(frozen=True)
class AuthorizeResponse:
    claim_id: str
    authorized_amount: Money
    authorized_at: datetime

    TAG: ClassVar[str] = "AuthorizeResponse"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("ClaimId", "claim_id", Kind.UUID),
        _spec("AuthorizedAmount", "authorized_amount", Kind.MONEY),
        _spec("AuthorizedAt", "authorized_at", Kind.STAMP),
    )


@dataclass(frozen=True)
class PaymentRequest:
    claim_id: str
    actual_expense: Money

    TAG: ClassVar[str] = "PaymentRequest"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("ClaimId", "claim_id", Kind.UUID),
        _spec("ActualExpense", "actual_expense", Kind.MONEY),
    )


@dataclass(frozen=True)
class PaymentResponse:
    claim_id: str
    paid_amount: Money
    actual_expense: Money
    paid_at: datetime

    TAG: ClassVar[str] = "PaymentResponse"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("ClaimId", "claim_id", Kind.UUID),
        _spec("PaidAmount", "paid_amount", Kind.MONEY),
        _spec("ActualExpense", "actual_expense", Kind.MONEY),
        _spec("PaidAt", "paid_at", Kind.STAMP),
    )


@dataclass(frozen=True)
class SettleRequest:
    claim_id: str

    TAG: ClassVar[str] = "SettleRequest"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("ClaimId", "claim_id", Kind.UUID),
    )


@dataclass(frozen=True)
class SettleResponse:
    claim_id: str
    refund_amount: Money
    settled_at: datetime

    TAG: ClassVar[str] = "SettleResponse"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("ClaimId", "claim_id", Kind.UUID),
        _spec("RefundAmount", "refund_amount", Kind.MONEY),
        _spec("SettledAt", "settled_at", Kind.STAMP),
    )


@dataclass(frozen=True)
class Fault:
    code: str
    message: str

    TAG: ClassVar[str] = "Fault"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = (
        _spec("Code", "code", Kind.ENUM, values=FAULT_CODES),
        _spec("Message", "message", Kind.TEXT),
    )


@dataclass(frozen=True)
class Ping:
    TAG: ClassVar[str] = "Ping"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = ()


@dataclass(frozen=True)
class Pong:
    TAG: ClassVar[str] = "Pong"
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = ()


PAYLOAD_CLASSES = (
    PreAuthSubmitRequest, PreAuthSubmitResponse,
    VerifyRequest, VerifyResponse,
    ScrutinyRequest, ScrutinyResponse,
    AuthorizeRequest, AuthorizeResponse,
    PaymentRequest, PaymentResponse,
    SettleRequest, SettleResponse,
    Fault, Ping, Pong,
)

PAYLOADS = {cls.TAG: cls for cls in PAYLOAD_CLASSES}

BodyPayload = Union[
    PreAuthSubmitRequest, PreAuthSubmitResponse,
    VerifyRequest, VerifyResponse,
    ScrutinyRequest, ScrutinyResponse,
    AuthorizeRequest, AuthorizeResponse,
    PaymentRequest, PaymentResponse,
    SettleRequest, SettleResponse,
    Fault, Ping, Pong,
]


@dataclass(frozen=True)
class Envelope:
    message_id: str
    correlation_id: str
    timestamp: datetime
    service: str
    operation: str
    body: BodyPayload


# ---------------------------------------------------------------------------
# Text escaping
# ---------------------------------------------------------------------------

_ESCAPES = (
    ("&", "&amp;"),
    ("<", "&lt;"),
    (">", "&gt;"),
    ("\t", "&#9;"),
    ("\n", "&#10;"),
    ("\r", "&#13;"),
)

_ENTITIES = {"amp": "&", "lt": "<", "gt": ">", "#9": "\t", "#10": "\n", "#13": "\r"}

_ENTITY_RE = re.compile(r"&([a-z#0-9]{1,4});")


def escape_text(value: str) -> str:
    for raw, rep in _ESCAPES:
        value = value.replace(raw, rep)
    return value


def unescape_text(raw: str, line: int) -> str:
    """Strict inverse of escape_text; rejects anything else."""
    out = []
    i = 0
    n = len(raw)
    while i < n:
        ch = raw[i]
        if ch == "&":
            m = _ENTITY_RE.match(raw, i)
            if not m or m.group(1) not in _ENTITIES:
                raise MalformedXml("unknown or unterminated entity reference", line)
            out.append(_ENTITIES[m.group(1)])
            i = m.end()
            continue
        if ch in "<>":
            raise MalformedXml("unescaped markup character in text", line)
        if ord(ch) < 0x20:
            raise MalformedXml("raw control character in text", line)
        out.append(ch)
        i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------


def _check_text_value(value: str) -> Optional[str]:
    if not isinstance(value, str):
        return "must be a string"
    if value == "":
        return "must be non-empty"
    for ch in value:
        if ord(ch) < 0x20 and ch not in "\t\n\r":
            return "contains an unrepresentable control character"
    return None


def _check_instant(value: datetime) -> Optional[str]:
    if not isinstance(value, datetime):
        return "must be a datetime"
    if value.tzinfo is None or value.utcoffset() != timezone.utc.utcoffset(None):
        return "must carry a UTC offset"
    if value.microsecond != 0:
        return "must be whole-second precision"
    return None


def _check_money(value: Money) -> Optional[str]:
    if not isinstance(value, Money):
        return "must be a Money value"
    if not isinstance(value.amount, int) or isinstance(value.amount, bool) or value.amount < 0:
        return "amount must be a non-negative integer"
    if not _CURRENCY_RE.match(value.currency or ""):
        return "currency must be a 3-letter uppercase code"
    return None


def _check_field(spec: FieldSpec, value) -> Optional[str]:
    if value is None:
        return None if spec.optional else "is required"
    if spec.kind is Kind.TEXT:
        return _check_text_value(value)
    if spec.kind is Kind.BOOL:
        return None if isinstance(value, bool) else "must be a bool"
    if spec.kind is Kind.UUID:
        if not isinstance(value, str) or not _UUID_RE.match(value):
            return "must be a lowercase UUID"
        return None
    if spec.kind is Kind.STAMP:
        return _check_instant(value)
    if spec.kind is Kind.MONEY:
        return _check_money(value)
    if spec.kind is Kind.ENUM:
        return None if value in spec.values else f"must be one of {', '.join(spec.values)}"
    return "unknown field kind"


def check_envelope(env: Envelope) -> list[tuple[str, str]]:
    """Return (field, problem) pairs for every invariant violation."""
    problems: list[tuple[str, str]] = []
    for name in ("message_id", "correlation_id"):
        value = getattr(env, name)
        if not isinstance(value, str) or not _UUID_RE.match(value):
            problems.append((name, "must be a lowercase UUID"))
    err = _check_instant(env.timestamp)
    if err:
        problems.append(("timestamp", err))
    if env.service not in SERVICE_NAMES:
        problems.append(("service", "not in the service vocabulary"))
    if env.operation not in OPERATION_NAMES:
        problems.append(("operation", "not in the operation vocabulary"))
    cls = type(env.body)
    if cls not in PAYLOAD_CLASSES:
        problems.append(("body", "not a known payload type"))
        return problems
    for spec in cls.FIELDS:
        err = _check_field(spec, getattr(env.body, spec.attr))
        if err:
            problems.append((f"body.{spec.attr}", err))
    return problems


def _render_field(lines: list[str], indent: int, spec: FieldSpec, value) -> None:
    pad = " " * indent
    if spec.kind is Kind.MONEY:
        lines.append(f"{pad}<{spec.tag}>")
        lines.append(f'{pad}  <Amount currency="{value.currency}">{value.amount}</Amount>')
        lines.append(f"{pad}</{spec.tag}>")
        return
    if spec.kind is Kind.BOOL:
        text = "true" if value else "false"
    elif spec.kind is Kind.STAMP:
        text = format_instant(value)
    else:
        text = escape_text(value)
    lines.append(f"{pad}<{spec.tag}>{text}</{spec.tag}>")


def serialize(env: Envelope) -> bytes:
    """Render the canonical UTF-8 document for a valid envelope.

    Deterministic: equal envelopes produce byte-identical output.
    Raises InvalidEnvelope naming the first offending field otherwise.
    """
    problems = check_envelope(env)
    if problems:
        raise InvalidEnvelope(problems[0][0], problems[0][1])
    body = env.body
    lines = [
        PROLOG,
        f'<Envelope xmlns="{ENVELOPE_NS}">',
        "  <Header>",
        f"    <MessageId>{env.message_id}</MessageId>",
        f"    <CorrelationId>{env.correlation_id}</CorrelationId>",
        f"    <Timestamp>{format_instant(env.timestamp)}</Timestamp>",
        f"    <Service>{env.service}</Service>",
        f"    <Operation>{env.operation}</Operation>",
        "  </Header>",
        "  <Body>",
    ]
    if not body.FIELDS:
        lines.append(f"    <{body.TAG}></{body.TAG}>")
    else:
        lines.append(f"    <{body.TAG}>")
        for spec in body.FIELDS:
            value = getattr(body, spec.attr)
            if value is None:
                continue
            _render_field(lines, 6, spec, value)
        lines.append(f"    </{body.TAG}>")
    lines.append("  </Body>")
    lines.append("</Envelope>")
    return ("\n".join(lines) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# Scanner: bytes -> element tree under the restricted lexical grammar
# ---------------------------------------------------------------------------

_NAME = r"[A-Za-z][A-Za-z0-9]*"
_ATTRS = r"(?:\s+[A-Za-z][A-Za-z0-9]*=\"[^\"<>&]*\")*"
_LEAF_RE = re.compile(rf"^( *)<({_NAME})({_ATTRS})>([^<>]*)</({_NAME})>( *)$")
_OPEN_RE = re.compile(rf"^( *)<({_NAME})({_ATTRS})>( *)$")
_CLOSE_RE = re.compile(rf"^( *)</({_NAME})>( *)$")
_ATTR_RE = re.compile(r"\s+([A-Za-z][A-Za-z0-9]*)=\"([^\"<>&]*)\"")
_BLANK_RE = re.compile(r"^ *$")
_PROLOG_LOOSE_RE = re.compile(r"^\s*<\?xml[^?]*\?>\s*$")


@dataclass
class _Node:
    name: str
    attrs: list[tuple[str, str]]
    line: int
    text: Optional[str] = None          # leaf text (unescaped); None for containers
    children: list["_Node"] = field(default_factory=list)


def _parse_attrs(raw: str, line: int) -> list[tuple[str, str]]:
    attrs = []
    pos = 0
    for m in _ATTR_RE.finditer(raw):
        if m.start() != pos:
            raise MalformedXml("bad attribute syntax", line)
        attrs.append((m.group(1), m.group(2)))
        pos = m.end()
    if pos != len(raw):
        raise MalformedXml("bad attribute syntax", line)
    # canonical form separates attributes with exactly one space
    for m in _ATTR_RE.finditer(raw):
        if not m.group(0).startswith(" ") or m.group(0).startswith("  "):
            raise MalformedXml("bad attribute spacing", line)
    return attrs


class _Scanner:
    """Turn canonical-form bytes into a root node plus layout violations.

    Lexical failures raise MalformedXml immediately; layout deviations
    (indentation, blank lines, trailing spaces, prolog drift) are
    collected as violations so the structural pass can keep going.
    """

    def __init__(self, data: bytes):
        self.data = data
        self.violations: list[Violation] = []

    def _path(self, stack: list[_Node], extra: Optional[str] = None) -> str:
        parts = [n.name for n in stack]
        if extra:
            parts.append(extra)
        return "/" + "/".join(parts) if parts else "/"

    def scan(self) -> _Node:
        try:
            text = self.data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedXml(f"not valid UTF-8: {exc.reason}") from None
        if text == "":
            raise MalformedXml("empty document")
        lines = text.split("\n")
        if lines[-1] == "":
            lines.pop()
        else:
            self.violations.append(Violation(
                "/Envelope", "non-canonical-layout", "missing final newline"))

        idx = 0
        if lines and lines[0] == PROLOG:
            idx = 1
        elif lines and _PROLOG_LOOSE_RE.match(lines[0]):
            self.violations.append(Violation(
                "/", "non-canonical-layout", "non-canonical XML prolog"))
            idx = 1
        elif lines and lines[0].lstrip().startswith("<?"):
            raise MalformedXml("unparseable XML prolog", 1)
        else:
            self.violations.append(Violation(
                "/", "non-canonical-layout", "missing XML prolog"))

        root: Optional[_Node] = None
        stack: list[_Node] = []
        for lineno0 in range(idx, len(lines)):
            line = lines[lineno0]
            lineno = lineno0 + 1
            if root is not None and not stack:
                if _BLANK_RE.match(line):
                    self.violations.append(Violation(
                        "/", "non-canonical-layout", "blank line after document element"))
                    continue
                raise MalformedXml("content after document element", lineno)
            if _BLANK_RE.match(line):
                self.violations.append(Violation(
                    self._path(stack), "non-canonical-layout", f"blank line {lineno}"))
                continue

            m = _CLOSE_RE.match(line)
            if m:
                indent, name, trail = m.group(1), m.group(2), m.group(3)
                if not stack:
                    raise MalformedXml(f"closing tag </{name}> with no open element", lineno)
                if name != stack[-1].name:
                    raise MalformedXml(
                        f"closing tag </{name}> does not match <{stack[-1].name}>", lineno)
                self._check_layout(indent, len(stack) - 1, trail, self._path(stack), lineno)
                stack.pop()
                continue

            m = _LEAF_RE.match(line)
            if m:
                indent, name, attrs_raw, text_raw, close_name, trail = m.groups()
                if close_name != name:
                    raise MalformedXml(
                        f"closing tag </{close_name}> does not match <{name}>", lineno)
                node = _Node(name, _parse_attrs(attrs_raw, lineno), lineno,
                             text=unescape_text(text_raw, lineno))
                self._attach(node, stack, root, lineno)
                if root is None and not stack:
                    root = node
                self._check_layout(indent, len(stack), trail, self._path(stack, name), lineno)
                continue

            m = _OPEN_RE.match(line)
            if m:
                indent, name, attrs_raw, trail = m.groups()
                node = _Node(name, _parse_attrs(attrs_raw, lineno), lineno)
                self._attach(node, stack, root, lineno)
                self._check_layout(indent, len(stack), trail, self._path(stack, name), lineno)
                if not stack:
                    root = node
                stack.append(node)
                continue

            raise MalformedXml("line is not a well-formed tag line", lineno)

        if stack:
            raise MalformedXml(f"unclosed element <{stack[-1].name}>", len(lines))
        if root is None:
            raise MalformedXml("no document element")
        return root

    def _attach(self, node: _Node, stack: list[_Node], root: Optional[_Node], lineno: int) -> None:
        if stack:
            stack[-1].children.append(node)
        elif root is not None:
            raise MalformedXml("second document element", lineno)

    def _check_layout(self, indent: str, depth: int, trail: str, path: str, lineno: int) -> None:
        if len(indent) != 2 * depth:
            self.violations.append(Violation(
                path, "non-canonical-layout",
                f"line {lineno}: expected indent {2 * depth}, found {len(indent)}"))
        if trail:
            self.violations.append(Violation(
                path, "non-canonical-layout", f"line {lineno}: trailing whitespace"))


# ---------------------------------------------------------------------------
# Structural validation and envelope construction
# ---------------------------------------------------------------------------

_HEADER_SPECS = (
    _spec("MessageId", "message_id", Kind.UUID),
    _spec("CorrelationId", "correlation_id", Kind.UUID),
    _spec("Timestamp", "timestamp", Kind.STAMP),
    _spec("Service", "service", Kind.ENUM, values=SERVICE_NAMES),
    _spec("Operation", "operation", Kind.ENUM, values=OPERATION_NAMES),
)


class _Validator:
    def __init__(self):
        self.violations: list[Violation] = []

    def bad(self, path: str, rule: str, detail: str) -> None:
        self.violations.append(Violation(path, rule, detail))

    # -- per-kind value checks on tree nodes --------------------------------

    def _check_leaf_kind(self, node: _Node, path: str, spec: FieldSpec) -> None:
        if node.text is None:
            self.bad(path, "invalid-value", "expected text content, found child elements")
            return
        if node.attrs:
            self.bad(path, "unexpected-attribute", f"attribute '{node.attrs[0][0]}' not allowed")
        text = node.text
        if spec.kind is Kind.TEXT:
            if text == "":
                self.bad(path, "invalid-value", "must be non-empty")
        elif spec.kind is Kind.BOOL:
            if text not in ("true", "false"):
                self.bad(path, "invalid-value", "must be 'true' or 'false'")
        elif spec.kind is Kind.UUID:
            if not _UUID_RE.match(text):
                self.bad(path, "invalid-value", "must be a lowercase UUID")
        elif spec.kind is Kind.STAMP:
            if not _STAMP_RE.match(text):
                self.bad(path, "invalid-value", "must be an RFC 3339 UTC instant (whole seconds, Z suffix)")
            else:
                try:
                    parse_instant(text)
                except ValueError:
                    self.bad(path, "invalid-value", "not a real calendar instant")
        elif spec.kind is Kind.ENUM:
            if text not in spec.values:
                self.bad(path, "invalid-value", f"must be one of: {', '.join(spec.values)}")

    def _check_money(self, node: _Node, path: str) -> None:
        if node.text is not None:
            self.bad(path, "invalid-value", "expected an <Amount> child element")
            return
        if node.attrs:
            self.bad(path, "unexpected-attribute", f"attribute '{node.attrs[0][0]}' not allowed")
        names = [c.name for c in node.children]
        if names != ["Amount"]:
            if "Amount" not in names:
                self.bad(path + "/Amount", "required-element-missing", "money value needs one <Amount>")
            for child in node.children:
                if child.name != "Amount":
                    self.bad(f"{path}/{child.name}", "unknown-element", "not part of a money value")
            if names.count("Amount") > 1:
                self.bad(path + "/Amount", "duplicate-element", "money value has one <Amount>")
            return
        amount = node.children[0]
        apath = path + "/Amount"
        if amount.text is None:
            self.bad(apath, "invalid-value", "expected integer text content")
            return
        attr_names = [k for k, _ in amount.attrs]
        if "currency" not in attr_names:
            self.bad(apath, "missing-attribute", "currency attribute is required")
        for k, v in amount.attrs:
            if k != "currency":
                self.bad(apath, "unexpected-attribute", f"attribute '{k}' not allowed")
            elif not _CURRENCY_RE.match(v):
                self.bad(apath, "invalid-value", "currency must be a 3-letter uppercase code")
        if not _INT_RE.match(amount.text):
            self.bad(apath, "invalid-value", "amount must be a canonical base-10 integer")

    # -- container matching --------------------------------------------------

    def check_children(self, node: _Node, path: str, specs: tuple[FieldSpec, ...]) -> dict[str, _Node]:
        """Match a container's children against ordered field specs.

        Reports missing/unknown/duplicate/misordered elements, then value
        checks, and returns first occurrences keyed by tag.
        """
        if node.text is not None and node.text != "":
            self.bad(path, "invalid-value", "expected child elements, found text")
        by_tag = {s.tag: s for s in specs}
        names = [c.name for c in node.children]
        found: dict[str, _Node] = {}

        for child in node.children:
            if child.name not in by_tag:
                self.bad(f"{path}/{child.name}", "unknown-element", "not part of the schema")
            elif child.name in found:
                self.bad(f"{path}/{child.name}", "duplicate-element", "element appears more than once")
            else:
                found[child.name] = child

        for spec_ in specs:
            if not spec_.optional and spec_.tag not in found:
                self.bad(f"{path}/{spec_.tag}", "required-element-missing",
                         "required element is absent")

        known = [n for n in names if n in by_tag]
        deduped = list(dict.fromkeys(known))
        expected_order = [s.tag for s in specs if s.tag in found]
        if deduped != expected_order and len(known) == len(deduped):
            for actual, expected in zip(deduped, expected_order):
                if actual != expected:
                    self.bad(f"{path}/{actual}", "element-order",
                             f"expected <{expected}> at this position")
                    break

        for tag, child in found.items():
            spec_ = by_tag[tag]
            cpath = f"{path}/{tag}"
            if spec_.kind is Kind.MONEY:
                self._check_money(child, cpath)
            else:
                self._check_leaf_kind(child, cpath, spec_)
        return found

    def validate_tree(self, root: _Node) -> Optional[tuple[dict[str, _Node], Optional[str], dict[str, _Node]]]:
        """Validate the whole document tree; return matched nodes when usable."""
        if root.name != "Envelope":
            self.bad(f"/{root.name}", "unknown-element", "document element must be <Envelope>")
            return None
        if root.attrs != [("xmlns", ENVELOPE_NS)]:
            self.bad("/Envelope", "invalid-value",
                     f'root must carry exactly xmlns="{ENVELOPE_NS}"')
        if root.text is not None:
            self.bad("/Envelope", "invalid-value", "expected child elements, found text")
            return None

        section_specs = (
            _spec("Header", "_header", Kind.TEXT),
            _spec("Body", "_body", Kind.TEXT),
        )
        by_name: dict[str, _Node] = {}
        names = [c.name for c in root.children]
        for child in root.children:
            if child.name not in ("Header", "Body"):
                self.bad(f"/Envelope/{child.name}", "unknown-element", "not part of the schema")
            elif child.name in by_name:
                self.bad(f"/Envelope/{child.name}", "duplicate-element", "element appears more than once")
            else:
                by_name[child.name] = child
        for tag in ("Header", "Body"):
            if tag not in by_name:
                self.bad(f"/Envelope/{tag}", "required-element-missing", "required element is absent")
        known = [n for n in names if n in ("Header", "Body")]
        deduped = list(dict.fromkeys(known))
        if deduped == ["Body", "Header"]:
            self.bad("/Envelope/Body", "element-order", "expected <Header> at this position")

        header_nodes: dict[str, _Node] = {}
        if "Header" in by_name:
            header_nodes = self.check_children(by_name["Header"], "/Envelope/Header", _HEADER_SPECS)

        payload_tag: Optional[str] = None
        payload_nodes: dict[str, _Node] = {}
        if "Body" in by_name:
            body = by_name["Body"]
            if body.text is not None and body.text != "":
                self.bad("/Envelope/Body", "invalid-value", "expected one payload element, found text")
            elif len(body.children) != 1:
                self.bad("/Envelope/Body", "body-cardinality",
                         f"body must contain exactly one payload element, found {len(body.children)}")
            else:
                payload = body.children[0]
                if payload.name not in PAYLOADS:
                    self.bad(f"/Envelope/Body/{payload.name}", "unknown-operation",
                             "payload element is not in the operation vocabulary")
                else:
                    payload_tag = payload.name
                    cls = PAYLOADS[payload.name]
                    ppath = f"/Envelope/Body/{payload.name}"
                    if not cls.FIELDS:
                        # empty payloads are written as an empty leaf
                        if payload.children:
                            for child in payload.children:
                                self.bad(f"{ppath}/{child.name}", "unknown-element",
                                         "payload carries no fields")
                        elif payload.text:
                            self.bad(ppath, "invalid-value", "payload carries no fields")
                    else:
                        payload_nodes = self.check_children(payload, ppath, cls.FIELDS)
        return header_nodes, payload_tag, payload_nodes


def _field_value(spec: FieldSpec, node: _Node):
    text = node.text or ""
    if spec.kind is Kind.BOOL:
        return text == "true"
    if spec.kind is Kind.STAMP:
        return parse_instant(text)
    if spec.kind is Kind.MONEY:
        amount = node.children[0]
        currency = dict(amount.attrs)["currency"]
        return Money(int(amount.text or "0"), currency)
    return text


def _analyze(doc: bytes) -> tuple[list[Violation], Optional[Envelope]]:
    scanner = _Scanner(doc)
    root = scanner.scan()
    validator = _Validator()
    matched = validator.validate_tree(root)
    violations = scanner.violations + validator.violations
    if violations or matched is None:
        return violations, None

    header_nodes, payload_tag, payload_nodes = matched
    header = {spec.attr: _field_value(spec, header_nodes[spec.tag]) for spec in _HEADER_SPECS}
    cls = PAYLOADS[payload_tag]
    kwargs = {}
    for spec in cls.FIELDS:
        node = payload_nodes.get(spec.tag)
        kwargs[spec.attr] = None if node is None else _field_value(spec, node)
    env = Envelope(body=cls(**kwargs), **header)
    return [], env


def parse(doc: bytes) -> Envelope:
    """Parse canonical envelope bytes; total on arbitrary input.

    Raises MalformedXml, SchemaViolation, or UnknownOperation; never
    anything else, no matter the bytes.
    """
    violations, env = _analyze(doc)
    if env is not None:
        return env
    report = ValidationReport(False, tuple(violations))
    if any(v.rule == "unknown-operation" for v in violations):
        raise UnknownOperation(report)
    raise SchemaViolation(report)


def validate(doc: bytes) -> ValidationReport:
    """Report every schema violation; valid iff parse(doc) would succeed."""
    try:
        violations, env = _analyze(doc)
    except MalformedXml as exc:
        return ValidationReport(False, (Violation("/", "malformed-xml", str(exc)),))
    return ValidationReport(env is not None, tuple(violations))


# ---------------------------------------------------------------------------
# Single-line XML fragments (journal records reuse the envelope's
# escaping and strictness rules, packed onto one line per record)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fragment:
    name: str
    text: Optional[str] = None
    attrs: tuple[tuple[str, str], ...] = ()
    children: tuple["Fragment", ...] = ()


def leaf(name: str, text: str) -> Fragment:
    return Fragment(name, text=text)


def money_fragment(name: str, value: Money) -> Fragment:
    return Fragment(name, children=(
        Fragment("Amount", text=str(value.amount), attrs=(("currency", value.currency),)),))


def fragment_money(frag: Fragment) -> Money:
    amount = frag.children[0]
    return Money(int(amount.text or "0"), dict(amount.attrs)["currency"])


def render_fragment(frag: Fragment) -> str:
    attrs = "".join(f' {k}="{v}"' for k, v in frag.attrs)
    if frag.children:
        inner = "".join(render_fragment(c) for c in frag.children)
    else:
        inner = escape_text(frag.text or "")
    return f"<{frag.name}{attrs}>{inner}</{frag.name}>"


_FRAG_OPEN_RE = re.compile(rf"<({_NAME})({_ATTRS})>")


def parse_fragment(line: str) -> Fragment:
    frag, pos = _parse_fragment_at(line, 0)
    if pos != len(line):
        raise MalformedXml("trailing data after fragment")
    return frag


def _parse_fragment_at(line: str, pos: int) -> tuple[Fragment, int]:
    m = _FRAG_OPEN_RE.match(line, pos)
    if not m:
        raise MalformedXml(f"expected an opening tag at offset {pos}")
    name = m.group(1)
    attrs = tuple(_parse_attrs(m.group(2), 0))
    pos = m.end()
    children: list[Fragment] = []
    text: Optional[str] = None
    if line.startswith("<", pos) and not line.startswith("</", pos):
        while line.startswith("<", pos) and not line.startswith("</", pos):
            child, pos = _parse_fragment_at(line, pos)
            children.append(child)
    else:
        end = line.find("<", pos)
        if end < 0:
            raise MalformedXml("unterminated fragment text")
        text = unescape_text(line[pos:end], 0)
        pos = end
    close = f"</{name}>"
    if not line.startswith(close, pos):
        raise MalformedXml(f"expected {close} at offset {pos}")
    return Fragment(name, text=text, attrs=attrs, children=tuple(children)), pos + len(close)
