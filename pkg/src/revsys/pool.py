"""The data pool: every record, plus the append-only audit log that feeds it.

All state changes are committed as audit events first and applied through a
single fold (`_apply`), so replaying the log from empty reproduces the pool
exactly. One logical writer: mutations serialize through a lock, which is
what makes `seq` gap-free and code redemption atomic.

On-disk artifacts (when opened with a directory):
  events.log     — UTF-8, one JSON record per line, keys in fixed order
                   (seq, at, actor, kind, payload); payload is a flat
                   string-to-string map, append-only, never pruned.
  snapshot.json  — checkpointed state dump with a schema version header.
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import threading
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping

from .domain import (
    BusinessRecord,
    CodeStatus,
    Kobo,
    MonthlyFinancials,
    Receipt,
    ReferenceCode,
    RevsysError,
    Role,
    TaxpayerRecord,
    TaxpayerStatus,
    Tier,
    TransactionRecord,
    TxnOutcome,
    UserAccount,
    iso,
    mint_tin,
    parse_iso,
    render_code,
    transition_code_status,
    utcnow,
)

SCHEMA_VERSION = 1

SYSTEM_ACTOR = "SYSTEM"
AGENT_ACTOR = "BIRGENT"


class PoolClosed(RevsysError):
    code = "PoolClosed"


class IntegrityViolation(RevsysError):
    code = "IntegrityViolation"


class DuplicateTin(RevsysError):
    code = "DuplicateTin"


class DuplicateUsername(RevsysError):
    code = "DuplicateUsername"


class DuplicateCode(RevsysError):
    code = "DuplicateCode"


class AlreadyIssued(RevsysError):
    code = "AlreadyIssued"


class NotFound(RevsysError):
    code = "NotFound"


class AlreadyRedeemed(RevsysError):
    code = "AlreadyRedeemed"


class ExpiredOrVoided(RevsysError):
    code = "ExpiredOrVoided"


class CorruptLog(RevsysError):
    code = "CorruptLog"


class EventKind(str, Enum):
    STAFF_CREATED = "StaffCreated"
    TAXPAYER_CAPTURED = "TaxpayerCaptured"
    TIN_ISSUED = "TinIssued"
    PASSWORD_CHANGED = "PasswordChanged"
    MINING_RUN = "MiningRun"
    TIER_ASSIGNED = "TierAssigned"
    CODE_ISSUED = "CodeIssued"
    CODE_LOOKUP = "CodeLookup"
    PAYMENT_RECORDED = "PaymentRecorded"
    FRAUD_ALERT = "FraudAlert"
    LOGIN_OK = "LoginOk"
    LOGIN_FAIL = "LoginFail"
    ALTERATION_BLOCKED = "AlterationBlocked"


@dataclass(frozen=True)
class AuditEvent:
    """One immutable, sequence-numbered entry of the audit log."""

    seq: int
    at: str  # ISO-8601 UTC
    actor: str  # username, "BIRGENT", or "SYSTEM"
    kind: EventKind
    payload: Mapping[str, str]

    def to_line(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "at": self.at,
                "actor": self.actor,
                "kind": self.kind.value,
                "payload": dict(self.payload),
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_line(cls, line: str) -> "AuditEvent":
        try:
            raw = json.loads(line)
            return cls(
                seq=int(raw["seq"]),
                at=str(raw["at"]),
                actor=str(raw["actor"]),
                kind=EventKind(raw["kind"]),
                payload=MappingProxyType({str(k): str(v) for k, v in raw["payload"].items()}),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise CorruptLog(f"unreadable event line: {exc}") from exc


def _check_payload(payload: Mapping[str, str]) -> dict[str, str]:
    """Payloads are flat string maps; anything else would poison the log."""
    out = {}
    for k, v in payload.items():
        if not isinstance(k, str) or not isinstance(v, str):
            raise ValueError(f"event payload must map str->str, got {k!r}={v!r}")
        out[k] = v
    return out


class Tap:
    """Ordered, exactly-once stream of audit events from one subscription point."""

    def __init__(self) -> None:
        self._queue: queue.SimpleQueue[AuditEvent] = queue.SimpleQueue()

    def _push(self, event: AuditEvent) -> None:
        self._queue.put(event)

    def get(self, timeout: float | None = None) -> AuditEvent:
        return self._queue.get(timeout=timeout)

    def drain(self) -> list[AuditEvent]:
        out = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except queue.Empty:
                return out

    def __iter__(self) -> Iterator[AuditEvent]:
        while True:
            try:
                yield self._queue.get_nowait()
            except queue.Empty:
                return


class DataPool:
    """Keyed collections for every record plus the audit log they hang off."""

    def __init__(self, directory: str | Path | None = None):
        self._lock = threading.RLock()
        self._closed = False
        self._taps: list[Tap] = []
        self._events: list[AuditEvent] = []
        self._seq = 0

        self._taxpayers: dict[str, TaxpayerRecord] = {}
        self._tin_index: dict[str, str] = {}
        self._businesses: dict[str, BusinessRecord] = {}
        self._users: dict[str, UserAccount] = {}
        self._codes: dict[str, ReferenceCode] = {}
        self._transactions: dict[str, TransactionRecord] = {}
        self._receipts: dict[str, Receipt] = {}
        self._receipt_by_code: dict[str, str] = {}
        self._lookup_counts: Counter[str] = Counter()
        self._login_stats: dict[str, list[int]] = {}  # principal -> [ok, fail]

        self._taxpayer_counter = 0
        self._business_counter = 0
        self._txn_counter = 0
        self._receipt_counter = 0
        self._run_counter = 0
        self._tin_counter = 0

        self._dir: Path | None = None
        self._log_handle = None
        if directory is not None:
            self._dir = Path(directory)
            self._dir.mkdir(parents=True, exist_ok=True)
            self._load_from_disk()
            self._log_handle = open(self._log_path, "a", encoding="utf-8")

    # -- lifecycle ----------------------------------------------------------

    @property
    def _log_path(self) -> Path:
        assert self._dir is not None
        return self._dir / "events.log"

    @property
    def _snapshot_path(self) -> Path:
        assert self._dir is not None
        return self._dir / "snapshot.json"

    def close(self) -> None:
        with self._lock:
            if self._log_handle is not None:
                self._log_handle.flush()
                self._log_handle.close()
                self._log_handle = None
            self._closed = True

    def __enter__(self) -> "DataPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _require_open(self) -> None:
        if self._closed:
            raise PoolClosed("pool is closed")

    def _load_from_disk(self) -> None:
        as_of = 0
        if self._snapshot_path.exists():
            snap = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
            if snap.get("schema_version") != SCHEMA_VERSION:
                raise CorruptLog(f"snapshot schema {snap.get('schema_version')} unsupported")
            as_of = int(snap["as_of_seq"])
            self._load_state(snap["state"])
            self._seq = as_of
        if self._log_path.exists():
            prev = 0
            with open(self._log_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    event = AuditEvent.from_line(line)
                    if prev and event.seq != prev + 1:
                        raise CorruptLog(f"seq gap in log: {prev} -> {event.seq}")
                    prev = event.seq
                    self._events.append(event)
                    if event.seq > as_of:
                        self._apply(event)
                        self._seq = event.seq

    # -- the commit path ----------------------------------------------------

    def append_event(self, actor: str, kind: EventKind, payload: Mapping[str, str],
                     at: str | None = None) -> AuditEvent:
        """Append one audit event; it is applied, persisted, and fanned out."""
        clean = _check_payload(payload)
        with self._lock:
            self._require_open()
            self._seq += 1
            event = AuditEvent(
                seq=self._seq,
                at=at or iso(utcnow()),
                actor=actor,
                kind=kind,
                payload=MappingProxyType(clean),
            )
            self._apply(event)
            self._events.append(event)
            if self._log_handle is not None:
                self._log_handle.write(event.to_line() + "\n")
                self._log_handle.flush()
            for tap in self._taps:
                tap._push(event)
            return event

    def subscribe_tap(self) -> Tap:
        with self._lock:
            self._require_open()
            tap = Tap()
            self._taps.append(tap)
            return tap

    def unsubscribe(self, tap: Tap) -> None:
        with self._lock:
            if tap in self._taps:
                self._taps.remove(tap)

    def events(self) -> tuple[AuditEvent, ...]:
        with self._lock:
            return tuple(self._events)

    @property
    def last_seq(self) -> int:
        return self._seq

    # -- event fold ---------------------------------------------------------

    def _apply(self, e: AuditEvent) -> None:
        """Fold one event into state. Total for any event this pool emitted."""
        p = e.payload
        kind = e.kind
        if kind is EventKind.STAFF_CREATED:
            self._users[p["username"]] = UserAccount(
                username=p["username"],
                password_hash=p["password_hash"],
                role=Role(p["role"]),
            )
        elif kind is EventKind.TAXPAYER_CAPTURED:
            record = p.get("record", "taxpayer")
            if record == "taxpayer":
                tp = TaxpayerRecord(
                    taxpayer_id=p["taxpayer_id"],
                    full_name=p["full_name"],
                    email=p["email"],
                    phone=p["phone"],
                    tin=p.get("tin") or None,
                )
                self._taxpayers[tp.taxpayer_id] = tp
                if tp.tin:
                    self._tin_index[tp.tin] = tp.taxpayer_id
                self._bump_counter("_taxpayer_counter", tp.taxpayer_id, "TP")
            elif record == "business":
                biz = BusinessRecord(
                    business_id=p["business_id"],
                    owner_id=p["owner_id"],
                    business_name=p["business_name"],
                    location=p["location"],
                    sector=p["sector"],
                )
                self._businesses[biz.business_id] = biz
                self._bump_counter("_business_counter", biz.business_id, "BUS")
            else:  # financials
                fin = MonthlyFinancials(
                    period=p["period"],
                    revenue_kobo=int(p["revenue_kobo"]),
                    expenses_kobo=int(p["expenses_kobo"]),
                    captured_at=parse_iso(p["captured_at"]),
                )
                biz = self._businesses[p["business_id"]]
                biz.financials = [f for f in biz.financials if f.period != fin.period]
                biz.financials.append(fin)
                biz.financials.sort(key=lambda f: f.period)
        elif kind is EventKind.TIN_ISSUED:
            tp = self._taxpayers[p["taxpayer_id"]]
            tp.tin = p["tin"]
            tp.password_hash = p["password_hash"]
            tp.must_change_password = True
            tp.status = TaxpayerStatus.PROVISIONAL
            self._tin_index[tp.tin] = tp.taxpayer_id
            self._tin_counter = max(self._tin_counter, int(p["tin_counter"]) + 1)
        elif kind is EventKind.PASSWORD_CHANGED:
            tp = self._taxpayers[p["taxpayer_id"]]
            tp.password_hash = p["password_hash"]
            tp.must_change_password = False
            tp.status = TaxpayerStatus.ACTIVE
        elif kind is EventKind.MINING_RUN:
            self._bump_counter("_run_counter", p["run_id"], "RUN")
        elif kind is EventKind.TIER_ASSIGNED:
            biz = self._businesses[p["business_id"]]
            biz.tier = Tier.from_label(p["tier"])
            biz.assessed_tax_kobo = int(p["tax_kobo"])
            biz.assessed_period = p["period"]
        elif kind is EventKind.CODE_ISSUED:
            rec = ReferenceCode(
                code=p["code"],
                owner_tin=p["owner_tin"],
                assessed_kobo=int(p["assessed_kobo"]),
                issued_at=parse_iso(p["issued_at"]),
                expires_at=parse_iso(p["expires_at"]),
            )
            self._codes[rec.code] = rec
        elif kind is EventKind.CODE_LOOKUP:
            self._lookup_counts[p["code"]] += 1
            if p.get("expired_transition") == "true":
                rec = self._codes.get(p["code"])
                if rec is not None and rec.status is CodeStatus.ISSUED:
                    rec.status = transition_code_status(rec.status, CodeStatus.EXPIRED)
        elif kind is EventKind.PAYMENT_RECORDED:
            rec = self._codes[p["code"]]
            rec.status = transition_code_status(rec.status, CodeStatus.REDEEMED)
            txn = TransactionRecord(
                txn_id=p["txn_id"],
                code=p["code"],
                payer_tin=p["payer_tin"],
                amount_paid_kobo=int(p["amount_paid_kobo"]),
                teller=p["teller"],
                at=parse_iso(p["at"]),
                outcome=TxnOutcome(p["outcome"]),
            )
            self._transactions[txn.txn_id] = txn
            receipt = Receipt(
                receipt_no=p["receipt_no"],
                business_name=p["business_name"],
                amount_paid_kobo=int(p["amount_paid_kobo"]),
                date=parse_iso(p["at"]),
                reference_code=render_code(p["code"]),
                tin=p["payer_tin"],
            )
            self._receipts[receipt.receipt_no] = receipt
            self._receipt_by_code[p["code"]] = receipt.receipt_no
            self._bump_counter("_txn_counter", txn.txn_id, "TXN")
            self._bump_counter("_receipt_counter", receipt.receipt_no, "RCT")
        elif kind is EventKind.FRAUD_ALERT:
            if p.get("voided") == "true":
                rec = self._codes.get(p.get("code", ""))
                if rec is not None and rec.status is CodeStatus.ISSUED:
                    rec.status = transition_code_status(rec.status, CodeStatus.VOIDED)
        elif kind is EventKind.LOGIN_OK:
            stats = self._login_stats.setdefault(p["principal"], [0, 0])
            stats[0] += 1
        elif kind is EventKind.LOGIN_FAIL:
            stats = self._login_stats.setdefault(p["principal"], [0, 0])
            stats[1] += 1
        # AlterationBlocked is observational: no entity state changes.

    def _bump_counter(self, name: str, ident: str, prefix: str) -> None:
        if ident.startswith(prefix):
            try:
                n = int(ident[len(prefix):])
            except ValueError:
                return
            setattr(self, name, max(getattr(self, name), n + 1))

    # -- writes -------------------------------------------------------------

    def put_record(self, record, actor: str = SYSTEM_ACTOR) -> str:
        """Store one domain record; returns its id. Emits the audit event."""
        with self._lock:
            self._require_open()
            if isinstance(record, TaxpayerRecord):
                if record.tin:
                    if record.tin in self._tin_index:
                        raise DuplicateTin(f"TIN already in pool: {record.tin}")
                tid = record.taxpayer_id or f"TP{self._taxpayer_counter:06d}"
                if tid in self._taxpayers:
                    raise IntegrityViolation(f"taxpayer id exists: {tid}")
                if not (record.email or record.phone):
                    raise IntegrityViolation("taxpayer needs an email or phone for TIN delivery")
                payload = {
                    "record": "taxpayer",
                    "taxpayer_id": tid,
                    "full_name": record.full_name,
                    "email": record.email,
                    "phone": record.phone,
                }
                if record.tin:
                    payload["tin"] = record.tin
                self.append_event(actor, EventKind.TAXPAYER_CAPTURED, payload)
                return tid
            if isinstance(record, BusinessRecord):
                if record.owner_id not in self._taxpayers:
                    raise IntegrityViolation(f"business owner unknown: {record.owner_id}")
                if not record.business_name.strip():
                    raise IntegrityViolation("business name empty")
                bid = record.business_id or f"BUS{self._business_counter:06d}"
                if bid in self._businesses:
                    raise IntegrityViolation(f"business id exists: {bid}")
                self.append_event(actor, EventKind.TAXPAYER_CAPTURED, {
                    "record": "business",
                    "business_id": bid,
                    "owner_id": record.owner_id,
                    "business_name": record.business_name,
                    "location": record.location,
                    "sector": record.sector,
                })
                for fin in record.financials:
                    self.attach_financials(bid, fin, actor=actor)
                return bid
            if isinstance(record, UserAccount):
                if record.username in self._users:
                    raise DuplicateUsername(f"username exists: {record.username}")
                self.append_event(actor, EventKind.STAFF_CREATED, {
                    "username": record.username,
                    "role": record.role.value,
                    "password_hash": record.password_hash,
                })
                return record.username
            raise TypeError(f"cannot store record of type {type(record).__name__}")

    def attach_financials(self, business_id: str, fin: MonthlyFinancials,
                          actor: str = SYSTEM_ACTOR) -> None:
        with self._lock:
            self._require_open()
            if business_id not in self._businesses:
                raise IntegrityViolation(f"business unknown: {business_id}")
            self.append_event(actor, EventKind.TAXPAYER_CAPTURED, {
                "record": "financials",
                "business_id": business_id,
                "period": fin.period,
                "revenue_kobo": str(fin.revenue_kobo),
                "expenses_kobo": str(fin.expenses_kobo),
                "captured_at": iso(fin.captured_at),
            })

    def issue_tin_for(self, taxpayer_id: str, password_hash: str,
                      actor: str = SYSTEM_ACTOR) -> str:
        """Mint the next TIN for a captured taxpayer; returns the TIN."""
        with self._lock:
            self._require_open()
            tp = self._taxpayers.get(taxpayer_id)
            if tp is None:
                raise NotFound(f"taxpayer unknown: {taxpayer_id}")
            if tp.tin:
                raise AlreadyIssued(f"taxpayer {taxpayer_id} already has TIN {tp.tin}")
            counter = self._tin_counter
            tin = mint_tin(counter)
            while tin in self._tin_index:  # counter is authoritative; skip collisions
                counter += 1
                tin = mint_tin(counter)
            self.append_event(actor, EventKind.TIN_ISSUED, {
                "taxpayer_id": taxpayer_id,
                "tin": tin,
                "tin_counter": str(counter),
                "password_hash": password_hash,
            })
            return tin

    def change_password(self, taxpayer_id: str, new_hash: str,
                        actor: str = SYSTEM_ACTOR) -> None:
        with self._lock:
            self._require_open()
            if taxpayer_id not in self._taxpayers:
                raise NotFound(f"taxpayer unknown: {taxpayer_id}")
            self.append_event(actor, EventKind.PASSWORD_CHANGED, {
                "taxpayer_id": taxpayer_id,
                "password_hash": new_hash,
            })

    def issue_code(self, rec: ReferenceCode, actor: str = AGENT_ACTOR) -> None:
        with self._lock:
            self._require_open()
            if rec.owner_tin not in self._tin_index:
                raise IntegrityViolation(f"code owner TIN unknown: {rec.owner_tin}")
            if rec.code in self._codes:
                raise DuplicateCode(f"code already in pool: {rec.code}")
            self.append_event(actor, EventKind.CODE_ISSUED, {
                "code": rec.code,
                "owner_tin": rec.owner_tin,
                "assessed_kobo": str(rec.assessed_kobo),
                "issued_at": iso(rec.issued_at),
                "expires_at": iso(rec.expires_at),
            })

    def redeem_code(self, code: str, payer_tin: str | None = None,
                    amount_paid_kobo: Kobo | None = None, teller: str = SYSTEM_ACTOR,
                    at=None, business_name: str | None = None,
                    actor: str | None = None) -> tuple[ReferenceCode, TransactionRecord, Receipt]:
        """Atomically redeem an Issued code, committing the payment it backs.

        Exactly one caller can ever succeed per code; the check-and-transition
        happens under the pool lock and lands as one PaymentRecorded event.
        """
        with self._lock:
            self._require_open()
            rec = self._codes.get(code)
            if rec is None:
                raise NotFound("reference code not in pool")
            if rec.status is CodeStatus.REDEEMED:
                raise AlreadyRedeemed("code already redeemed")
            if rec.status in (CodeStatus.EXPIRED, CodeStatus.VOIDED):
                raise ExpiredOrVoided(f"code is {rec.status.value}")
            when = at or utcnow()
            if when > rec.expires_at:
                raise ExpiredOrVoided("code expired")
            txn_id = f"TXN{self._txn_counter:08d}"
            receipt_no = f"RCT{self._receipt_counter:08d}"
            if business_name is None:
                business_name = self.business_names_for_tin(rec.owner_tin)
            self.append_event(actor or teller, EventKind.PAYMENT_RECORDED, {
                "code": code,
                "txn_id": txn_id,
                "receipt_no": receipt_no,
                "payer_tin": payer_tin or rec.owner_tin,
                "amount_paid_kobo": str(amount_paid_kobo if amount_paid_kobo is not None
                                        else rec.assessed_kobo),
                "teller": teller,
                "at": iso(when),
                "outcome": TxnOutcome.SUCCESS.value,
                "business_name": business_name,
            })
            return rec, self._transactions[txn_id], self._receipts[receipt_no]

    def set_business_assessment(self, business_id: str, tier: Tier, tax_kobo: Kobo,
                                period: str, run_id: str, actor: str = SYSTEM_ACTOR) -> None:
        with self._lock:
            self._require_open()
            if business_id not in self._businesses:
                raise IntegrityViolation(f"business unknown: {business_id}")
            self.append_event(actor, EventKind.TIER_ASSIGNED, {
                "business_id": business_id,
                "tier": tier.label,
                "tax_kobo": str(tax_kobo),
                "period": period,
                "run_id": run_id,
            })

    def begin_mining_run(self, actor: str = SYSTEM_ACTOR) -> str:
        """Claim the next run id; the MiningRun event makes the claim durable."""
        with self._lock:
            self._require_open()
            run_id = f"RUN{self._run_counter:06d}"
            self.append_event(actor, EventKind.MINING_RUN, {"run_id": run_id, "status": "started"})
            return run_id

    def record_login(self, principal: str, ok: bool, actor: str | None = None) -> None:
        self.append_event(
            actor or principal,
            EventKind.LOGIN_OK if ok else EventKind.LOGIN_FAIL,
            {"principal": principal},
        )

    # -- reads --------------------------------------------------------------

    def get_record(self, ident: str):
        """Fetch any stored record by its id (or a taxpayer by TIN)."""
        with self._lock:
            for coll in (self._taxpayers, self._businesses, self._users,
                         self._codes, self._transactions, self._receipts):
                if ident in coll:
                    return coll[ident]
            if ident in self._tin_index:
                return self._taxpayers[self._tin_index[ident]]
            raise NotFound(f"no record with id {ident}")

    def taxpayer(self, taxpayer_id: str) -> TaxpayerRecord | None:
        return self._taxpayers.get(taxpayer_id)

    def taxpayer_by_tin(self, tin: str) -> TaxpayerRecord | None:
        tid = self._tin_index.get(tin)
        return self._taxpayers.get(tid) if tid else None

    def taxpayers(self) -> list[TaxpayerRecord]:
        with self._lock:
            return list(self._taxpayers.values())

    def business(self, business_id: str) -> BusinessRecord | None:
        return self._businesses.get(business_id)

    def businesses(self) -> list[BusinessRecord]:
        with self._lock:
            return list(self._businesses.values())

    def businesses_of(self, owner_id: str) -> list[BusinessRecord]:
        with self._lock:
            return [b for b in self._businesses.values() if b.owner_id == owner_id]

    def business_names_for_tin(self, tin: str) -> str:
        tp = self.taxpayer_by_tin(tin)
        if tp is None:
            return ""
        names = [b.business_name for b in self.businesses_of(tp.taxpayer_id)]
        return ", ".join(names)

    def user(self, username: str) -> UserAccount | None:
        return self._users.get(username)

    def code(self, code: str) -> ReferenceCode | None:
        return self._codes.get(code)

    def codes_of(self, tin: str) -> list[ReferenceCode]:
        with self._lock:
            return [c for c in self._codes.values() if c.owner_tin == tin]

    def transactions(self) -> list[TransactionRecord]:
        with self._lock:
            return list(self._transactions.values())

    def receipts(self) -> list[Receipt]:
        with self._lock:
            return list(self._receipts.values())

    def receipt_for_code(self, code: str) -> Receipt | None:
        no = self._receipt_by_code.get(code)
        return self._receipts.get(no) if no else None

    def lookup_count(self, code: str) -> int:
        return self._lookup_counts.get(code, 0)

    def login_stats(self, principal: str) -> tuple[int, int]:
        ok, fail = self._login_stats.get(principal, (0, 0))
        return ok, fail

    # -- snapshot / replay / hashing -----------------------------------------

    def checkpoint(self) -> None:
        """Write the snapshot atomically (tmp + rename)."""
        if self._dir is None:
            return
        with self._lock:
            doc = {
                "schema_version": SCHEMA_VERSION,
                "as_of_seq": self._seq,
                "state": self._state_dict(),
            }
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, self._snapshot_path)

    def _state_dict(self) -> dict:
        return {
            "taxpayers": {
                tid: {
                    "taxpayer_id": tp.taxpayer_id,
                    "full_name": tp.full_name,
                    "email": tp.email,
                    "phone": tp.phone,
                    "tin": tp.tin,
                    "password_hash": tp.password_hash,
                    "must_change_password": tp.must_change_password,
                    "status": tp.status.value,
                }
                for tid, tp in self._taxpayers.items()
            },
            "businesses": {
                bid: {
                    "business_id": b.business_id,
                    "owner_id": b.owner_id,
                    "business_name": b.business_name,
                    "location": b.location,
                    "sector": b.sector,
                    "financials": [
                        {
                            "period": f.period,
                            "revenue_kobo": f.revenue_kobo,
                            "expenses_kobo": f.expenses_kobo,
                            "captured_at": iso(f.captured_at),
                        }
                        for f in b.financials
                    ],
                    "tier": b.tier.label if b.tier is not None else None,
                    "assessed_tax_kobo": b.assessed_tax_kobo,
                    "assessed_period": b.assessed_period,
                }
                for bid, b in self._businesses.items()
            },
            "users": {
                name: {"username": u.username, "password_hash": u.password_hash,
                       "role": u.role.value}
                for name, u in self._users.items()
            },
            "codes": {
                c: {
                    "code": r.code,
                    "owner_tin": r.owner_tin,
                    "assessed_kobo": r.assessed_kobo,
                    "issued_at": iso(r.issued_at),
                    "expires_at": iso(r.expires_at),
                    "status": r.status.value,
                }
                for c, r in self._codes.items()
            },
            "transactions": {
                t: {
                    "txn_id": x.txn_id,
                    "code": x.code,
                    "payer_tin": x.payer_tin,
                    "amount_paid_kobo": x.amount_paid_kobo,
                    "teller": x.teller,
                    "at": iso(x.at),
                    "outcome": x.outcome.value,
                }
                for t, x in self._transactions.items()
            },
            "receipts": {
                n: {
                    "receipt_no": r.receipt_no,
                    "business_name": r.business_name,
                    "amount_paid_kobo": r.amount_paid_kobo,
                    "date": iso(r.date),
                    "reference_code": r.reference_code,
                    "tin": r.tin,
                }
                for n, r in self._receipts.items()
            },
            "lookup_counts": dict(self._lookup_counts),
            "login_stats": {k: list(v) for k, v in self._login_stats.items()},
            "counters": {
                "taxpayer": self._taxpayer_counter,
                "business": self._business_counter,
                "txn": self._txn_counter,
                "receipt": self._receipt_counter,
                "run": self._run_counter,
                "tin": self._tin_counter,
            },
        }

    def _load_state(self, state: dict) -> None:
        for tid, d in state["taxpayers"].items():
            self._taxpayers[tid] = TaxpayerRecord(
                taxpayer_id=d["taxpayer_id"],
                full_name=d["full_name"],
                email=d["email"],
                phone=d["phone"],
                tin=d["tin"],
                password_hash=d["password_hash"],
                must_change_password=d["must_change_password"],
                status=TaxpayerStatus(d["status"]),
            )
            if d["tin"]:
                self._tin_index[d["tin"]] = tid
        for bid, d in state["businesses"].items():
            self._businesses[bid] = BusinessRecord(
                business_id=d["business_id"],
                owner_id=d["owner_id"],
                business_name=d["business_name"],
                location=d["location"],
                sector=d["sector"],
                financials=[
                    MonthlyFinancials(
                        period=f["period"],
                        revenue_kobo=f["revenue_kobo"],
                        expenses_kobo=f["expenses_kobo"],
                        captured_at=parse_iso(f["captured_at"]),
                    )
                    for f in d["financials"]
                ],
                tier=Tier.from_label(d["tier"]) if d["tier"] else None,
                assessed_tax_kobo=d["assessed_tax_kobo"],
                assessed_period=d["assessed_period"],
            )
        for name, d in state["users"].items():
            self._users[name] = UserAccount(
                username=d["username"], password_hash=d["password_hash"], role=Role(d["role"])
            )
        for c, d in state["codes"].items():
            self._codes[c] = ReferenceCode(
                code=d["code"],
                owner_tin=d["owner_tin"],
                assessed_kobo=d["assessed_kobo"],
                issued_at=parse_iso(d["issued_at"]),
                expires_at=parse_iso(d["expires_at"]),
                status=CodeStatus(d["status"]),
            )
        for t, d in state["transactions"].items():
            self._transactions[t] = TransactionRecord(
                txn_id=d["txn_id"],
                code=d["code"],
                payer_tin=d["payer_tin"],
                amount_paid_kobo=d["amount_paid_kobo"],
                teller=d["teller"],
                at=parse_iso(d["at"]),
                outcome=TxnOutcome(d["outcome"]),
            )
        for n, d in state["receipts"].items():
            self._receipts[n] = Receipt(
                receipt_no=d["receipt_no"],
                business_name=d["business_name"],
                amount_paid_kobo=d["amount_paid_kobo"],
                date=parse_iso(d["date"]),
                reference_code=d["reference_code"],
                tin=d["tin"],
            )
            self._receipt_by_code[d["reference_code"].replace("-", "")] = n
        self._lookup_counts = Counter(state["lookup_counts"])
        self._login_stats = {k: list(v) for k, v in state["login_stats"].items()}
        counters = state["counters"]
        self._taxpayer_counter = counters["taxpayer"]
        self._business_counter = counters["business"]
        self._txn_counter = counters["txn"]
        self._receipt_counter = counters["receipt"]
        self._run_counter = counters["run"]
        self._tin_counter = counters["tin"]

    def state_hash(self) -> str:
        """SHA-256 over the canonical JSON dump of all entity state."""
        with self._lock:
            canon = json.dumps(self._state_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    @classmethod
    def replay(cls, events) -> "DataPool":
        """Rebuild a pool purely from an event sequence (the replay oracle)."""
        pool = cls()
        for event in events:
            pool._apply(event)
            pool._events.append(event)
            pool._seq = event.seq
        return pool


def read_log(directory: str | Path) -> list[AuditEvent]:
    """Read every event line from a pool directory's log file."""
    path = Path(directory) / "events.log"
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(AuditEvent.from_line(line))
    return out
