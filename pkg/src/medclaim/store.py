"""Resource layer: company policy databases, the TPA hospital network
directory, gateway user credentials, and the journaled claim store.

Claims persist through an append-only journal of single-line XML
records. Folding the journal from empty reproduces the exact store
state, which is what makes end-to-end replay byte-testable.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import envelope as ev
from .domain import (
    AuthorizationRecord,
    Claim,
    ClaimEvent,
    ClaimState,
    Doctor,
    HistoryEntry,
    Hospital,
    IdentityMatch,
    MatchKind,
    Money,
    PaymentRecord,
    PolicyRecord,
    PolicySnapshot,
    PolicyStatus,
    PreAuthRequest,
    ScrutinyRecord,
    SettlementRecord,
    Tpa,
    check_claim,
)

GATEWAY_ROLES = ("policyholder", "hospital", "tpa", "admin")


class FixtureParseError(ValueError):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"line {line_no}: {detail}")
        self.line_no = line_no
        self.detail = detail


class ClaimNotFound(KeyError):
    pass


class VersionConflict(RuntimeError):
    pass


class InvalidClaim(ValueError):
    pass


@dataclass(frozen=True)
class FixtureSummary:
    companies: int
    policies: int
    hospitals: int
    tpas: int
    users: int = 0


@dataclass(frozen=True)
class GatewayUser:
    """Login credential record; an extension record type in the fixture
    format so demo deployments are self-contained."""
    username: str
    secret: str
    role: str
    display_name: str
    uid: Optional[str] = None          # policyholder identity
    hospital_id: Optional[str] = None  # hospital-desk identity


@dataclass
class CompanyDatabase:
    company_id: str
    records: dict[str, PolicyRecord] = field(default_factory=dict)


@dataclass(frozen=True)
class FixtureBundle:
    companies: dict[str, CompanyDatabase]
    tpas: dict[str, Tpa]
    hospitals: dict[str, Hospital]
    users: dict[str, GatewayUser]

    def summary(self) -> FixtureSummary:
        return FixtureSummary(
            companies=len(self.companies),
            policies=sum(len(db.records) for db in self.companies.values()),
            hospitals=len(self.hospitals),
            tpas=len(self.tpas),
            users=len(self.users),
        )


def parse_fixtures(text: str) -> FixtureBundle:
    """Parse the line-oriented fixture format.

    Record kinds: company|ID, policy|COMPANY|UID|TYPE|MINOR|CCY|STATUS,
    tpa|ID|NAME, hospital|ID|NAME|TPA[,TPA...], and the credential
    extension user|NAME|SECRET|ROLE|DISPLAY[|UID][|HOSPITAL].
    '#' starts a comment. Two passes so record order never matters.
    """
    rows: list[tuple[int, list[str]]] = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((line_no, [fld.strip() for fld in line.split("|")]))

    companies: dict[str, CompanyDatabase] = {}
    tpas: dict[str, Tpa] = {}
    hospitals: dict[str, Hospital] = {}
    users: dict[str, GatewayUser] = {}

    def need(line_no, fields, n, kind):
        if len(fields) != n:
            raise FixtureParseError(line_no, f"{kind} record needs {n} fields, got {len(fields)}")

    for line_no, fields in rows:
        kind = fields[0]
        if kind == "company":
            need(line_no, fields, 2, "company")
            if fields[1] in companies:
                raise FixtureParseError(line_no, f"duplicate company {fields[1]}")
            if not fields[1]:
                raise FixtureParseError(line_no, "empty company id")
            companies[fields[1]] = CompanyDatabase(fields[1])
        elif kind == "tpa":
            need(line_no, fields, 3, "tpa")
            if fields[1] in tpas:
                raise FixtureParseError(line_no, f"duplicate tpa {fields[1]}")
            tpas[fields[1]] = Tpa(fields[1], fields[2])
        elif kind not in ("policy", "hospital", "user"):
            raise FixtureParseError(line_no, f"unknown record kind '{kind}'")

    for line_no, fields in rows:
        kind = fields[0]
        if kind == "policy":
            need(line_no, fields, 7, "policy")
            _, company_id, uid, policy_type, minor, currency, status = fields
            if company_id not in companies:
                raise FixtureParseError(line_no, f"unknown company {company_id}")
            if not uid:
                raise FixtureParseError(line_no, "empty uid")
            if uid in companies[company_id].records:
                raise FixtureParseError(line_no, f"duplicate uid {uid} in company {company_id}")
            try:
                amount = int(minor)
            except ValueError:
                raise FixtureParseError(line_no, f"bad amount '{minor}'") from None
            if amount <= 0:
                raise FixtureParseError(line_no, "eligible amount must be positive")
            try:
                parsed_status = PolicyStatus(status)
            except ValueError:
                raise FixtureParseError(line_no, f"bad status '{status}'") from None
            companies[company_id].records[uid] = PolicyRecord(
                uid=uid, company_id=company_id, policy_type=policy_type,
                eligible_amount=Money(amount, currency), status=parsed_status)
        elif kind == "hospital":
            need(line_no, fields, 4, "hospital")
            _, hospital_id, name, tpa_list = fields
            if hospital_id in hospitals:
                raise FixtureParseError(line_no, f"duplicate hospital {hospital_id}")
            networks = tuple(t.strip() for t in tpa_list.split(",") if t.strip())
            for tpa_id in networks:
                if tpa_id not in tpas:
                    raise FixtureParseError(line_no, f"unknown tpa {tpa_id}")
            if not networks:
                raise FixtureParseError(line_no, "hospital must join at least one tpa")
            hospitals[hospital_id] = Hospital(hospital_id, name, frozenset(networks))
        elif kind == "user":
            if len(fields) not in (5, 6, 7):
                raise FixtureParseError(line_no, "user record needs 5 to 7 fields")
            username, secret, role, display = fields[1:5]
            uid = fields[5] if len(fields) > 5 and fields[5] else None
            hospital_id = fields[6] if len(fields) > 6 and fields[6] else None
            if role not in GATEWAY_ROLES:
                raise FixtureParseError(line_no, f"unknown role '{role}'")
            if username in users:
                raise FixtureParseError(line_no, f"duplicate user {username}")
            users[username] = GatewayUser(username, secret, role, display, uid, hospital_id)

    return FixtureBundle(companies, tpas, hospitals, users)


class ReferenceDirectory:
    """Seeded reference data: who insures whom, which hospitals belong
    to which TPA networks, and who may log in."""

    def __init__(self):
        self._bundle = FixtureBundle({}, {}, {}, {})

    def seed(self, text: str) -> FixtureSummary:
        """Load fixtures, replacing previous reference data; seeding the
        same text twice is a no-op."""
        self._bundle = parse_fixtures(text)
        return self._bundle.summary()

    @property
    def tpas(self) -> dict[str, Tpa]:
        return self._bundle.tpas

    @property
    def hospitals(self) -> dict[str, Hospital]:
        return self._bundle.hospitals

    @property
    def users(self) -> dict[str, GatewayUser]:
        return self._bundle.users

    def hospital(self, hospital_id: str) -> Optional[Hospital]:
        return self._bundle.hospitals.get(hospital_id)

    def network_hospitals(self, tpa_id: str) -> list[Hospital]:
        return sorted(
            (h for h in self._bundle.hospitals.values() if h.in_network_of(tpa_id)),
            key=lambda h: h.hospital_id)

    def lookup_identity(self, uid: str) -> IdentityMatch:
        """Check the uid against every company database, in lexicographic
        company order. Exactly one active record matches; zero (or only
        lapsed ones) is NotFound; several active ones is Ambiguous.
        """
        active: list[PolicyRecord] = []
        lapsed: list[PolicyRecord] = []
        for company_id in sorted(self._bundle.companies):
            record = self._bundle.companies[company_id].records.get(uid)
            if record is None:
                continue
            (active if record.status == PolicyStatus.ACTIVE else lapsed).append(record)
        if len(active) == 1:
            return IdentityMatch(MatchKind.MATCHED, record=active[0])
        if len(active) > 1:
            owners = tuple(r.company_id for r in active)
            return IdentityMatch(
                MatchKind.AMBIGUOUS, companies=owners,
                detail="identification number claimed by several companies: "
                       + ", ".join(owners))
        if lapsed:
            return IdentityMatch(
                MatchKind.NOT_FOUND,
                detail="policy lapsed in " + ", ".join(r.company_id for r in lapsed))
        return IdentityMatch(MatchKind.NOT_FOUND, detail="no company database holds this uid")


# ---------------------------------------------------------------------------
# Journal records
# ---------------------------------------------------------------------------

_STATE = {s.value: s for s in ClaimState}
_EVENT = {e.value: e for e in ClaimEvent}


def _created_record(claim: Claim) -> str:
    p = claim.preauth
    return ev.render_fragment(ev.Fragment("ClaimCreated", children=(
        ev.leaf("ClaimId", claim.claim_id),
        ev.leaf("Uid", p.uid),
        ev.leaf("HospitalId", p.hospital_id),
        ev.leaf("IllnessDetails", p.illness_details),
        ev.leaf("ProposedTreatment", p.proposed_treatment),
        ev.money_fragment("EstimatedExpense", p.estimated_expense),
        ev.leaf("DoctorName", p.certifying_doctor.name),
        ev.leaf("DoctorRegistrationNumber", p.certifying_doctor.registration_number),
        ev.leaf("SubmittedAt", ev.format_instant(p.submitted_at)),
    )))


def _transition_record(claim: Claim, entry: HistoryEntry) -> str:
    children = [
        ev.leaf("ClaimId", claim.claim_id),
        ev.leaf("FromState", entry.from_state.value),
        ev.leaf("Event", entry.event.value),
        ev.leaf("ToState", entry.to_state.value),
        ev.leaf("At", ev.format_instant(entry.at)),
        ev.leaf("Actor", entry.actor),
    ]
    if entry.event == ClaimEvent.VERIFY_OK:
        snap = claim.policy
        children += [
            ev.leaf("CompanyId", snap.company_id),
            ev.leaf("PolicyType", snap.policy_type),
            ev.money_fragment("EligibleAmount", snap.eligible_amount),
            ev.leaf("PolicyStatus", snap.status.value),
        ]
    elif entry.event in (ClaimEvent.SCRUTINY_APPROVE, ClaimEvent.SCRUTINY_DENY):
        rec = claim.scrutiny
        children += [ev.leaf("Decision", rec.decision), ev.leaf("AdjusterId", rec.adjuster_id)]
        if rec.notes is not None:
            children.append(ev.leaf("Notes", rec.notes))
    elif entry.event == ClaimEvent.AUTHORIZE:
        children.append(ev.money_fragment("AuthorizedAmount",
                                          claim.authorization.authorized_amount))
    elif entry.event == ClaimEvent.PAYMENT_DONE:
        children += [
            ev.money_fragment("PaidAmount", claim.payment.paid_amount),
            ev.money_fragment("ActualExpense", claim.payment.actual_expense),
        ]
    elif entry.event == ClaimEvent.SETTLE:
        children.append(ev.money_fragment("RefundAmount", claim.settlement.refund_amount))
    return ev.render_fragment(ev.Fragment("Transition", children=tuple(children)))


def _fold_record(claims: dict[str, Claim], line: str) -> None:
    frag = ev.parse_fragment(line)
    fields = {c.name: c for c in frag.children}

    def text(name: str) -> str:
        return fields[name].text or ""

    if frag.name == "ClaimCreated":
        preauth = PreAuthRequest(
            uid=text("Uid"),
            hospital_id=text("HospitalId"),
            illness_details=text("IllnessDetails"),
            proposed_treatment=text("ProposedTreatment"),
            estimated_expense=ev.fragment_money(fields["EstimatedExpense"]),
            certifying_doctor=Doctor(text("DoctorName"), text("DoctorRegistrationNumber")),
            submitted_at=ev.parse_instant(text("SubmittedAt")),
        )
        claim_id = text("ClaimId")
        claims[claim_id] = Claim(claim_id=claim_id, state=ClaimState.SUBMITTED, preauth=preauth)
        return

    if frag.name != "Transition":
        raise InvalidClaim(f"unknown journal record <{frag.name}>")
    claim = claims[text("ClaimId")]
    event = _EVENT[text("Event")]
    at = ev.parse_instant(text("At"))
    entry = HistoryEntry(
        from_state=_STATE[text("FromState")],
        event=event,
        to_state=_STATE[text("ToState")],
        at=at,
        actor=text("Actor"),
    )
    changes: dict = {}
    if event == ClaimEvent.VERIFY_OK:
        changes["policy"] = PolicySnapshot(
            company_id=text("CompanyId"),
            policy_type=text("PolicyType"),
            eligible_amount=ev.fragment_money(fields["EligibleAmount"]),
            status=PolicyStatus(text("PolicyStatus")),
        )
    elif event in (ClaimEvent.SCRUTINY_APPROVE, ClaimEvent.SCRUTINY_DENY):
        changes["scrutiny"] = ScrutinyRecord(
            decision=text("Decision"), adjuster_id=text("AdjusterId"),
            notes=text("Notes") if "Notes" in fields else None, decided_at=at)
    elif event == ClaimEvent.AUTHORIZE:
        changes["authorization"] = AuthorizationRecord(
            authorized_amount=ev.fragment_money(fields["AuthorizedAmount"]), authorized_at=at)
    elif event == ClaimEvent.PAYMENT_DONE:
        changes["payment"] = PaymentRecord(
            paid_amount=ev.fragment_money(fields["PaidAmount"]),
            actual_expense=ev.fragment_money(fields["ActualExpense"]), paid_at=at)
    elif event == ClaimEvent.SETTLE:
        changes["settlement"] = SettlementRecord(
            refund_amount=ev.fragment_money(fields["RefundAmount"]), settled_at=at)

    claims[claim.claim_id] = Claim(
        claim_id=claim.claim_id,
        state=entry.to_state,
        preauth=claim.preauth,
        policy=changes.get("policy", claim.policy),
        scrutiny=changes.get("scrutiny", claim.scrutiny),
        authorization=changes.get("authorization", claim.authorization),
        payment=changes.get("payment", claim.payment),
        settlement=changes.get("settlement", claim.settlement),
        history=claim.history + (entry,),
    )


def fold_journal(lines: Iterable[str]) -> dict[str, Claim]:
    claims: dict[str, Claim] = {}
    for line in lines:
        if line:
            _fold_record(claims, line)
    return claims


# ---------------------------------------------------------------------------
# Claim store
# ---------------------------------------------------------------------------


class ClaimStore:
    """Claims keyed by id, persisted as an append-only journal.

    Optimistic concurrency: a save must carry the stored history as a
    prefix of its own; anything else is a VersionConflict. Safe for
    concurrent readers and writers.
    """

    def __init__(self, journal_path: Optional[str] = None):
        self._lock = threading.RLock()
        self._claims: dict[str, Claim] = {}
        self._journal: list[str] = []
        self._path = Path(journal_path) if journal_path else None
        if self._path and self._path.exists():
            text = self._path.read_text(encoding="utf-8")
            self._journal = [ln for ln in text.split("\n") if ln]
            self._claims = fold_journal(self._journal)

    def save_claim(self, claim: Claim) -> None:
        problems = check_claim(claim)
        if problems:
            raise InvalidClaim("; ".join(problems))
        with self._lock:
            stored = self._claims.get(claim.claim_id)
            new_lines: list[str] = []
            if stored is None:
                new_lines.append(_created_record(claim))
                base: tuple[HistoryEntry, ...] = ()
            else:
                if stored.preauth != claim.preauth:
                    raise InvalidClaim("pre-authorization data is immutable")
                base = stored.history
                if len(claim.history) < len(base) or claim.history[:len(base)] != base:
                    raise VersionConflict(
                        f"claim {claim.claim_id}: stored history is not a prefix of the save")
            for entry in claim.history[len(base):]:
                new_lines.append(_transition_record(claim, entry))
            self._journal.extend(new_lines)
            if self._path and new_lines:
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write("".join(line + "\n" for line in new_lines))
            self._claims[claim.claim_id] = claim

    def load_claim(self, claim_id: str) -> Claim:
        with self._lock:
            claim = self._claims.get(claim_id)
        if claim is None:
            raise ClaimNotFound(claim_id)
        return claim

    def list_claims(self, state: Optional[ClaimState] = None,
                    uid: Optional[str] = None,
                    hospital_id: Optional[str] = None) -> list[Claim]:
        with self._lock:
            claims = list(self._claims.values())
        out = [c for c in claims
               if (state is None or c.state == state)
               and (uid is None or c.uid == uid)
               and (hospital_id is None or c.hospital_id == hospital_id)]
        out.sort(key=lambda c: (c.submitted_at, c.claim_id))
        return out

    def journal_bytes(self) -> bytes:
        with self._lock:
            lines = list(self._journal)
        return "".join(line + "\n" for line in lines).encode("utf-8")

    def snapshot_bytes(self) -> bytes:
        """Canonical dump of every stored claim; byte-equal across
        stores holding identical state."""
        with self._lock:
            ids = sorted(self._claims)
            lines = []
            for claim_id in ids:
                claim = self._claims[claim_id]
                lines.append(_created_record(claim))
                for entry in claim.history:
                    lines.append(_transition_record(claim, entry))
        return "".join(line + "\n" for line in lines).encode("utf-8")
