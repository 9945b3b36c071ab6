"""Independent canonical-form oracle for the envelope wire format.

Everything here is written straight from the wire-format contract with
plain string templates: no imports from the package's codec. The corpus
built from these templates is the ground truth the codec is tested
against, and the mutation tables predict exactly which violation a
broken document must produce.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional, Union

NS = "urn:medclaim:envelope:1.0"
PROLOG = '<?xml version="1.0" encoding="UTF-8"?>'

FieldValue = Union[str, tuple[str, int]]   # leaf text, or (currency, amount)


def oracle_escape(value: str) -> str:
    out = []
    for ch in value:
        if ch == "&":
            out.append("&amp;")
        elif ch == "<":
            out.append("&lt;")
        elif ch == ">":
            out.append("&gt;")
        elif ch == "\t":
            out.append("&#9;")
        elif ch == "\n":
            out.append("&#10;")
        elif ch == "\r":
            out.append("&#13;")
        else:
            out.append(ch)
    return "".join(out)


def render_lines(message_id: str, correlation_id: str, timestamp: str,
                 service: str, operation: str, payload_tag: str,
                 fields: list[tuple[str, FieldValue]]) -> list[str]:
    lines = [
        PROLOG,
        f'<Envelope xmlns="{NS}">',
        "  <Header>",
        f"    <MessageId>{message_id}</MessageId>",
        f"    <CorrelationId>{correlation_id}</CorrelationId>",
        f"    <Timestamp>{timestamp}</Timestamp>",
        f"    <Service>{service}</Service>",
        f"    <Operation>{operation}</Operation>",
        "  </Header>",
        "  <Body>",
    ]
    if not fields:
        lines.append(f"    <{payload_tag}></{payload_tag}>")
    else:
        lines.append(f"    <{payload_tag}>")
        for tag, value in fields:
            if isinstance(value, tuple):
                currency, amount = value
                lines.append(f"      <{tag}>")
                lines.append(f'        <Amount currency="{currency}">{amount}</Amount>')
                lines.append(f"      </{tag}>")
            else:
                lines.append(f"      <{tag}>{oracle_escape(value)}</{tag}>")
        lines.append(f"    </{payload_tag}>")
    lines.append("  </Body>")
    lines.append("</Envelope>")
    return lines


def render_doc(*args, **kwargs) -> bytes:
    return ("\n".join(render_lines(*args, **kwargs)) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# Corpus of 50 valid documents spanning every payload type
# ---------------------------------------------------------------------------

_UUIDS = [
    "0b9e2b36-9a73-4cb3-8f6a-0c2a5d1e9f00",
    "1c2d3e4f-5a6b-4c7d-8e9f-a0b1c2d3e4f5",
    "7f000001-0000-4000-8000-000000000abc",
    "9d8c7b6a-5f4e-4d3c-8b2a-190817161514",
    "aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeffff",
    "3e6a1f0c-2d4b-4a59-9c87-6512fedcba98",
]

_TEXTS = [
    "INS-ACME-0001",
    "acute appendicitis, onset 3 days",
    "laparoscopic appendectomy",
    "Dr. R. Nair",
    "MCI/2009/41523",
    "ward 4 <east wing> & ICU",
    "notes with\ttab and\nnewline",
    "बीमा दावा 12345",
    "approved after document review",
]

_STAMPS = [
    "2024-01-01T00:00:00Z",
    "2024-02-29T23:59:59Z",
    "2031-12-31T06:30:15Z",
]

_MONEYS = [("INR", 0), ("INR", 1), ("INR", 8000000), ("INR", 10000000), ("USD", 123456789012345)]

_STATES = [
    "SUBMITTED", "ID_REJECTED", "VERIFIED", "UNDER_SCRUTINY", "SCRUTINY_DENIED",
    "SCRUTINY_APPROVED", "CASH_AUTHORIZED", "PAID", "SETTLED",
]

_FAULT_CODES = [
    "invalid-request", "unknown-hospital", "unknown-claim", "wrong-state",
    "forbidden", "service-unavailable", "conflict", "schema-violation",
]


@dataclass(frozen=True)
class CorpusDoc:
    doc: bytes
    lines: list[str]
    payload_tag: str
    payload_fields: list[tuple[str, FieldValue]]
    # expected parse results, built by hand here
    message_id: str
    correlation_id: str
    timestamp: str
    service: str
    operation: str


def _payload_plan(rng: random.Random, n: int) -> tuple[str, str, str, list[tuple[str, FieldValue]]]:
    """Return (service, operation, payload_tag, fields) for corpus entry n."""
    t = rng.choice(_TEXTS)
    money = rng.choice(_MONEYS)
    uuid = rng.choice(_UUIDS)
    stamp = rng.choice(_STAMPS)
    shapes = [
        ("PreAuth", "preauth_submit", "PreAuthSubmitRequest", [
            ("Uid", rng.choice(_TEXTS)),
            ("HospitalId", "HOSP-001"),
            ("IllnessDetails", t),
            ("ProposedTreatment", rng.choice(_TEXTS)),
            ("EstimatedExpense", money),
            ("DoctorName", "Dr. A & B <surgeons>"),
            ("DoctorRegistrationNumber", "MCI/2010/0042"),
        ]),
        ("PreAuth", "preauth_submit", "PreAuthSubmitResponse",
         [("ClaimId", uuid), ("State", rng.choice(_STATES))]
         + ([("Message", t)] if n % 2 else [])),
        ("Verification", "verify", "VerifyRequest", [("Uid", t)]),
        ("Verification", "verify", "VerifyResponse",
         [("Valid", "true"), ("CompanyId", "ACME"), ("PolicyType", "hospitalization"),
          ("EligibleAmount", money)] if n % 3 else [("Valid", "false"), ("Message", t)]),
        ("Scrutiny", "scrutinize", "ScrutinyRequest",
         [("ClaimId", uuid), ("Decision", rng.choice(["approve", "deny"])),
          ("AdjusterId", "adj-meera")] + ([("Notes", t)] if n % 2 else [])),
        ("Scrutiny", "scrutinize", "ScrutinyResponse",
         [("ClaimId", uuid), ("State", rng.choice(_STATES)),
          ("HospitalInNetwork", rng.choice(["true", "false"])),
          ("EstimateWithinEligible", rng.choice(["true", "false"]))]),
        ("CashAuth", "authorize_cash", "AuthorizeRequest", [("ClaimId", uuid)]),
        ("CashAuth", "authorize_cash", "AuthorizeResponse",
         [("ClaimId", uuid), ("AuthorizedAmount", money), ("AuthorizedAt", stamp)]),
        ("Payment", "pay_hospital", "PaymentRequest",
         [("ClaimId", uuid), ("ActualExpense", money)]),
        ("Payment", "pay_hospital", "PaymentResponse",
         [("ClaimId", uuid), ("PaidAmount", money), ("ActualExpense", rng.choice(_MONEYS)),
          ("PaidAt", stamp)]),
        ("Settlement", "settle", "SettleRequest", [("ClaimId", uuid)]),
        ("Settlement", "settle", "SettleResponse",
         [("ClaimId", uuid), ("RefundAmount", money), ("SettledAt", stamp)]),
        ("Verification", "verify", "Fault",
         [("Code", rng.choice(_FAULT_CODES)), ("Message", t)]),
        ("Payment", "ping", "Ping", []),
        ("Payment", "pong", "Pong", []),
    ]
    return shapes[n % len(shapes)]


def build_corpus(size: int = 50) -> list[CorpusDoc]:
    rng = random.Random(20240101)
    docs = []
    for n in range(size):
        service, operation, tag, fields = _payload_plan(rng, n)
        message_id = rng.choice(_UUIDS)
        correlation_id = rng.choice(_UUIDS)
        timestamp = rng.choice(_STAMPS)
        lines = render_lines(message_id, correlation_id, timestamp,
                             service, operation, tag, fields)
        docs.append(CorpusDoc(
            doc=("\n".join(lines) + "\n").encode("utf-8"),
            lines=lines,
            payload_tag=tag,
            payload_fields=fields,
            message_id=message_id,
            correlation_id=correlation_id,
            timestamp=timestamp,
            service=service,
            operation=operation,
        ))
    return docs


# ---------------------------------------------------------------------------
# Mutation oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mutation:
    doc: bytes
    kind: str
    path: str        # violation path the validator must report first
    rule: str        # violation rule it must report


def _leaf_field_indices(entry: CorpusDoc) -> list[int]:
    """Indices into entry.payload_fields whose wire form is one line."""
    return [i for i, (_, v) in enumerate(entry.payload_fields) if not isinstance(v, tuple)]


def _payload_line_span(entry: CorpusDoc) -> tuple[int, int]:
    """(first, last) line index of the payload's field lines."""
    first = entry.lines.index(f"    <{entry.payload_tag}>") + 1
    last = entry.lines.index(f"    </{entry.payload_tag}>") - 1
    return first, last


def _field_line(entry: CorpusDoc, idx: int) -> int:
    """Line index of the idx-th payload field (single-line leaves only)."""
    tag = entry.payload_fields[idx][0]
    first, last = _payload_line_span(entry)
    for ln in range(first, last + 1):
        if entry.lines[ln].lstrip().startswith(f"<{tag}>"):
            return ln
    raise AssertionError(f"field line not found: {tag}")


def mutate(entry: CorpusDoc, n: int) -> Mutation:
    """Derive one broken document plus the violation it must produce.

    Mutation classes rotate with n: drop a required element, reorder two
    sibling elements, inject an unknown element, corrupt the timestamp.
    """
    lines = list(entry.lines)
    ppath = f"/Envelope/Body/{entry.payload_tag}"
    leaves = _leaf_field_indices(entry)
    klass = n % 4

    if klass == 0:
        # drop a required header element (always present, always required)
        tag = ["MessageId", "CorrelationId", "Timestamp", "Service", "Operation"][n % 5]
        lines = [ln for ln in lines if f"<{tag}>" not in ln]
        return Mutation(_join(lines), "missing-element",
                        f"/Envelope/Header/{tag}", "required-element-missing")

    if klass == 1:
        if len(leaves) >= 2:
            # swap two adjacent single-line payload fields
            a, b = leaves[0], leaves[1]
            la, lb = _field_line(entry, a), _field_line(entry, b)
            lines[la], lines[lb] = lines[lb], lines[la]
            second_tag = entry.payload_fields[b][0]
            return Mutation(_join(lines), "reordered-element",
                            f"{ppath}/{second_tag}", "element-order")
        # payloads with <2 single-line fields: reorder header instead
        i = lines.index("    <MessageId>" + entry.message_id + "</MessageId>")
        lines[i], lines[i + 1] = lines[i + 1], lines[i]
        return Mutation(_join(lines), "reordered-element",
                        "/Envelope/Header/CorrelationId", "element-order")

    if klass == 2:
        # inject an element the closed schema has never heard of
        i = lines.index("  <Header>") + 1
        lines.insert(i, "    <Priority>high</Priority>")
        return Mutation(_join(lines), "unknown-element",
                        "/Envelope/Header/Priority", "unknown-element")

    # klass == 3: corrupt the timestamp value
    bad = ["2024-13-41T25:61:61Z", "yesterday", "2024-01-01 00:00:00",
           "2024-01-01T00:00:00+05:30"][n % 4]
    i = next(k for k, ln in enumerate(lines) if "<Timestamp>" in ln)
    lines[i] = f"    <Timestamp>{bad}</Timestamp>"
    return Mutation(_join(lines), "bad-timestamp",
                    "/Envelope/Header/Timestamp", "invalid-value")


def _join(lines: list[str]) -> bytes:
    return ("\n".join(lines) + "\n").encode("utf-8")


def build_mutation_corpus(size: int = 50) -> list[Mutation]:
    docs = build_corpus(size)
    return [mutate(entry, n) for n, entry in enumerate(docs)]
