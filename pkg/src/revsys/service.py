"""The role-scoped HTTP workflow service: admin provisioning, staff and
taxpayer login, capture, TIN issuance, assessment viewing, reference-code
requests, bank lookup and payment, receipt reprints, and mining runs.

Every mutation funnels into the pool's serialized commit; handlers are
stateless, so the app is safe under concurrent sessions.
"""

from __future__ import annotations

import csv
import io
import json
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import messages
from .agent import Birgent, UnknownTin, Verdict
from .domain import (
    BusinessRecord,
    Kobo,
    MonthlyFinancials,
    Receipt,
    Role,
    TaxpayerRecord,
    Tier,
    UserAccount,
    CodeStatus,
    display_tin,
    fmt_naira,
    gen_default_password,
    hash_password,
    iso,
    normalize_code,
    normalize_tin,
    utcnow,
    valid_period,
    verify_password,
)
from .miner import TierRateGuide, default_rate_guide, run_extraction, NoEarningsRecords
from .pool import (
    AlreadyIssued,
    AlreadyRedeemed,
    DataPool,
    DuplicateUsername,
    ExpiredOrVoided,
    NotFound,
)

SESSION_TTL_MINUTES = 30

CAPTURE_HEADER = [
    "full_name", "email", "phone", "business_name", "location", "sector",
    "period", "revenue_kobo", "expenses_kobo",
]


class ApiError(Exception):
    """Carries a flat JSON error body to the exception handler."""

    def __init__(self, status: int, error: str, display_message: str | None = None,
                 **extra):
        super().__init__(error)
        self.status = status
        self.body: dict = {"error": error}
        if display_message is not None:
            self.body["display_message"] = display_message
        self.body.update(extra)


# --------------------------------------------------------------------------
# Sessions
# --------------------------------------------------------------------------


@dataclass
class Session:
    token: str
    principal: str  # TIN for taxpayers, username for staff
    role: Role
    display_name: str
    issued_at: datetime
    expires_at: datetime
    taxpayer_id: str | None = None


class SessionStore:
    """Bearer tokens with sliding idle expiry; one principal, many sessions."""

    def __init__(self, clock: Callable[[], datetime], ttl_minutes: int = SESSION_TTL_MINUTES):
        self._clock = clock
        self._ttl = timedelta(minutes=ttl_minutes)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, principal: str, role: Role, display_name: str,
               taxpayer_id: str | None = None) -> Session:
        now = self._clock()
        sess = Session(
            token=secrets.token_urlsafe(32),
            principal=principal,
            role=role,
            display_name=display_name,
            issued_at=now,
            expires_at=now + self._ttl,
            taxpayer_id=taxpayer_id,
        )
        with self._lock:
            self._sessions[sess.token] = sess
        return sess

    def get(self, token: str) -> Session | None:
        now = self._clock()
        with self._lock:
            sess = self._sessions.get(token)
            if sess is None:
                return None
            if now > sess.expires_at:
                del self._sessions[token]
                return None
            sess.expires_at = now + self._ttl  # idle timer slides on use
            return sess

    def drop(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)


# --------------------------------------------------------------------------
# Notifiers (step v: TIN + default password delivery)
# --------------------------------------------------------------------------


class InMemoryNotifier:
    """Test stub: records every message it would have sent."""

    def __init__(self):
        self.messages: list[dict] = []

    def notify(self, to: str, subject: str, body: str) -> None:
        self.messages.append({"to": to, "subject": subject, "body": body})


class FileSpoolNotifier:
    """Deployment stand-in for SMS/email: appends one JSON line per message."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def notify(self, to: str, subject: str, body: str) -> None:
        line = json.dumps({"at": iso(utcnow()), "to": to, "subject": subject,
                           "body": body}, ensure_ascii=False)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")


# --------------------------------------------------------------------------
# Capture ingestion (shared by the API and the seed command)
# --------------------------------------------------------------------------


def _parse_amount_field(raw: str) -> Kobo:
    cleaned = (raw or "").replace(",", "").strip()
    if not cleaned or not (cleaned.isdigit() or (cleaned[0] == "-" and cleaned[1:].isdigit())):
        raise ValueError(f"not an integer kobo amount: {raw!r}")
    value = int(cleaned)
    if value < 0:
        raise ValueError("amounts must be non-negative")
    return value


def ingest_capture_csv(pool: DataPool, text: str, actor: str
                       ) -> tuple[list[dict], list[dict]]:
    """Parse the capture CSV, store valid rows, report rejects per row.

    Rows sharing (full_name, email) reuse the taxpayer; rows sharing the
    business name under one owner reuse the business and add a month.
    """
    stored: list[dict] = []
    rejected: list[dict] = []
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != CAPTURE_HEADER:
        raise ApiError(400, "ValidationFailed",
                       detail=f"capture CSV header must be {','.join(CAPTURE_HEADER)}")

    tp_key: dict[tuple[str, str], str] = {}
    biz_key: dict[tuple[str, str], str] = {}
    for tp in pool.taxpayers():
        tp_key[(tp.full_name, tp.email)] = tp.taxpayer_id
    for biz in pool.businesses():
        biz_key[(biz.owner_id, biz.business_name)] = biz.business_id

    for lineno, row in enumerate(reader, start=2):
        try:
            full_name = (row.get("full_name") or "").strip()
            business_name = (row.get("business_name") or "").strip()
            period = (row.get("period") or "").strip()
            if not full_name:
                raise ValueError("full_name empty")
            if not business_name:
                raise ValueError("business_name empty")
            if not valid_period(period):
                raise ValueError(f"bad period: {period!r}")
            revenue = _parse_amount_field(row.get("revenue_kobo") or "")
            expenses = _parse_amount_field(row.get("expenses_kobo") or "")
            email = (row.get("email") or "").strip()
            phone = (row.get("phone") or "").strip()
            if not (email or phone):
                raise ValueError("need an email or phone for TIN delivery")
        except ValueError as exc:
            rejected.append({"row": lineno, "reason": str(exc)})
            continue

        owner_id = tp_key.get((full_name, email))
        if owner_id is None:
            owner_id = pool.put_record(TaxpayerRecord(
                taxpayer_id="", full_name=full_name, email=email, phone=phone,
            ), actor=actor)
            tp_key[(full_name, email)] = owner_id
        business_id = biz_key.get((owner_id, business_name))
        if business_id is None:
            business_id = pool.put_record(BusinessRecord(
                business_id="", owner_id=owner_id, business_name=business_name,
                location=(row.get("location") or "").strip(),
                sector=(row.get("sector") or "").strip(),
            ), actor=actor)
            biz_key[(owner_id, business_name)] = business_id
        pool.attach_financials(business_id, MonthlyFinancials(
            period=period, revenue_kobo=revenue, expenses_kobo=expenses,
            captured_at=utcnow(),
        ), actor=actor)
        stored.append({"row": lineno, "taxpayer_id": owner_id, "business_id": business_id})
    return stored, rejected


def serialize_receipt(receipt: Receipt) -> dict:
    """Fixed field order so a reprint is byte-identical to the original."""
    return {
        "receipt_no": receipt.receipt_no,
        "business_name": receipt.business_name,
        "amount_paid": fmt_naira(receipt.amount_paid_kobo),
        "amount_paid_kobo": receipt.amount_paid_kobo,
        "date": iso(receipt.date),
        "reference_code": receipt.reference_code,
        "tin": receipt.tin,
    }


# --------------------------------------------------------------------------
# App factory
# --------------------------------------------------------------------------


def create_app(pool: DataPool, agent: Birgent, notifier=None, *,
               guide: TierRateGuide | None = None,
               clock: Callable[[], datetime] = utcnow,
               admin_username: str = "admin",
               admin_password: str | None = None,
               session_ttl_minutes: int = SESSION_TTL_MINUTES,
               static_dir: str | Path | None = None) -> FastAPI:
    """Wire the pool, agent, and notifier into the HTTP workflow service."""
    guide = guide or default_rate_guide()
    notifier = notifier if notifier is not None else InMemoryNotifier()
    sessions = SessionStore(clock, ttl_minutes=session_ttl_minutes)

    if pool.user(admin_username) is None:
        if admin_password is None:
            raise ValueError("admin bootstrap needs a password for a fresh pool")
        pool.put_record(UserAccount(
            username=admin_username,
            password_hash=hash_password(admin_password),
            role=Role.ADMIN,
        ))

    app = FastAPI(title="revenue-service", docs_url=None, redoc_url=None)
    app.state.pool = pool
    app.state.agent = agent
    app.state.notifier = notifier
    app.state.sessions = sessions

    @app.exception_handler(ApiError)
    async def _api_error(_request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body)

    # -- auth plumbing -------------------------------------------------------

    def _session(request: Request) -> Session:
        header = request.headers.get("authorization", "")
        if not header.startswith("Bearer "):
            raise ApiError(401, "Unauthorized")
        sess = sessions.get(header[len("Bearer "):])
        if sess is None:
            raise ApiError(401, "Unauthorized")
        return sess

    def _require_role(request: Request, *roles: Role) -> Session:
        sess = _session(request)
        if sess.role not in roles:
            raise ApiError(403, "Forbidden")
        return sess

    def _taxpayer_ctx(request: Request, allow_provisional: bool = False
                      ) -> tuple[Session, TaxpayerRecord]:
        sess = _require_role(request, Role.TAXPAYER)
        tp = pool.taxpayer(sess.taxpayer_id or "")
        if tp is None:
            raise ApiError(401, "Unauthorized")
        # flag read live: a password change in another session lifts the gate
        if tp.must_change_password and not allow_provisional:
            raise ApiError(403, "MustChangePassword")
        return sess, tp

    async def _json_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "ValidationFailed", detail="body must be JSON")
        if not isinstance(body, dict):
            raise ApiError(400, "ValidationFailed", detail="body must be a JSON object")
        return body

    def _int_field(body: dict, name: str, required: bool = True) -> Kobo | None:
        value = body.get(name)
        if value is None:
            if required:
                raise ApiError(400, "ValidationFailed", detail=f"{name} is required")
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ApiError(400, "ValidationFailed", detail=f"{name} must be an integer")
        return value

    def _str_field(body: dict, name: str, required: bool = True) -> str:
        value = body.get(name)
        if value is None and not required:
            return ""
        if not isinstance(value, str) or (required and not value):
            raise ApiError(400, "ValidationFailed", detail=f"{name} is required")
        return value

    # -- health ---------------------------------------------------------------

    @app.get("/health")
    async def health():
        return {"status": "ok", "seq": pool.last_seq}

    # -- admin: staff accounts -------------------------------------------------

    @app.post("/api/admin/staff")
    async def create_staff(request: Request):
        sess = _require_role(request, Role.ADMIN)
        body = await _json_body(request)
        username = _str_field(body, "username")
        password = _str_field(body, "password")
        role_name = _str_field(body, "role")
        if role_name not in (Role.BIR_STAFF.value, Role.BANK_STAFF.value):
            raise ApiError(400, "ValidationFailed",
                           detail="role must be BirStaff or BankStaff")
        try:
            pool.put_record(UserAccount(
                username=username,
                password_hash=hash_password(password),
                role=Role(role_name),
            ), actor=sess.principal)
        except DuplicateUsername:
            raise ApiError(400, "DuplicateUsername")
        return {"username": username, "role": role_name}

    # -- login / logout ----------------------------------------------------------

    @app.post("/api/auth/staff-login")
    async def staff_login(request: Request):
        body = await _json_body(request)
        username = _str_field(body, "username")
        password = _str_field(body, "password")
        account = pool.user(username)
        ok = account is not None and verify_password(password, account.password_hash)
        pool.record_login(username, ok)
        if not ok:
            # identical body for wrong username and wrong password
            raise ApiError(401, "InvalidCredentials",
                           display_message=messages.INVALID_STAFF_LOGIN)
        sess = sessions.create(username, account.role, username)
        return {
            "display_message": messages.WELCOME,
            "token": sess.token,
            "role": account.role.value,
            "display_name": username,
        }

    @app.post("/api/auth/taxpayer-login")
    async def taxpayer_login(request: Request):
        body = await _json_body(request)
        tin = normalize_tin(_str_field(body, "tin"))
        password = _str_field(body, "password")
        tp = pool.taxpayer_by_tin(tin)
        ok = (tp is not None and tp.password_hash is not None
              and verify_password(password, tp.password_hash))
        pool.record_login(tin, ok)
        if not ok:
            raise ApiError(401, "InvalidCredentials",
                           display_message=messages.INVALID_TIN_LOGIN)
        sess = sessions.create(tin, Role.TAXPAYER, tp.full_name,
                               taxpayer_id=tp.taxpayer_id)
        return {
            "display_message": messages.WELCOME,
            "token": sess.token,
            "role": Role.TAXPAYER.value,
            "display_name": tp.full_name,
            "tin": display_tin(tin),
            "must_change_password": tp.must_change_password,
        }

    @app.post("/api/auth/logout")
    async def logout(request: Request):
        header = request.headers.get("authorization", "")
        if header.startswith("Bearer "):
            sessions.drop(header[len("Bearer "):])
        return {"status": "ok"}  # idempotent by design

    # -- BIR: capture and mining ---------------------------------------------

    @app.post("/api/bir/taxpayers")
    async def register_taxpayers(request: Request):
        sess = _require_role(request, Role.BIR_STAFF)
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("text/csv"):
            text = (await request.body()).decode("utf-8")
            stored, rejected = ingest_capture_csv(pool, text, actor=sess.principal)
            return {"stored": stored, "rejected": rejected,
                    "stored_count": len(stored), "rejected_count": len(rejected)}
        body = await _json_body(request)
        if "csv" in body:
            stored, rejected = ingest_capture_csv(pool, _str_field(body, "csv"),
                                                  actor=sess.principal)
            return {"stored": stored, "rejected": rejected,
                    "stored_count": len(stored), "rejected_count": len(rejected)}
        full_name = _str_field(body, "full_name")
        email = _str_field(body, "email", required=False)
        phone = _str_field(body, "phone", required=False)
        if not (email or phone):
            raise ApiError(400, "ValidationFailed",
                           detail="need an email or phone for TIN delivery")
        fins = body.get("financials", [])
        if not isinstance(fins, list):
            raise ApiError(400, "ValidationFailed", detail="financials must be a list")
        parsed_fins = []
        for fin in fins:
            if not isinstance(fin, dict) or not valid_period(str(fin.get("period", ""))):
                raise ApiError(400, "ValidationFailed", detail="bad financials entry")
            revenue = _int_field(fin, "revenue_kobo")
            expenses = _int_field(fin, "expenses_kobo")
            if revenue < 0 or expenses < 0:
                raise ApiError(400, "ValidationFailed", detail="amounts must be non-negative")
            parsed_fins.append(MonthlyFinancials(
                period=str(fin["period"]), revenue_kobo=revenue,
                expenses_kobo=expenses, captured_at=clock(),
            ))
        owner_id = pool.put_record(TaxpayerRecord(
            taxpayer_id="", full_name=full_name, email=email, phone=phone,
        ), actor=sess.principal)
        business_id = pool.put_record(BusinessRecord(
            business_id="", owner_id=owner_id,
            business_name=_str_field(body, "business_name"),
            location=_str_field(body, "location", required=False),
            sector=_str_field(body, "sector", required=False),
            financials=parsed_fins,
        ), actor=sess.principal)
        return {"taxpayer_id": owner_id, "business_id": business_id}

    @app.post("/api/bir/mine")
    async def mine(request: Request):
        sess = _require_role(request, Role.BIR_STAFF)
        try:
            report = run_extraction(pool, guide, actor=sess.principal)
        except NoEarningsRecords:
            raise ApiError(400, "NoEarningsRecords",
                           display_message=messages.NO_EARNINGS)
        tier_counts = {tier.label: 0 for tier in Tier}
        for entry in report.entries:
            tier_counts[entry.tier.label] += 1
        return {
            "display_message": messages.EXTRACTION_OK,
            "run_id": report.run_id,
            "assessed_count": len(report.entries),
            "total_tax_kobo": report.total_tax_kobo,
            "tier_counts": tier_counts,
        }

    @app.post("/api/bir/assessment/{business_id}")
    async def bir_set_assessment(business_id: str, request: Request):
        sess = _require_role(request, Role.BIR_STAFF)
        body = await _json_body(request)
        tax_kobo = _int_field(body, "tax_kobo")
        biz = pool.business(business_id)
        if biz is None:
            raise ApiError(400, "NotFound", detail=f"no business {business_id}")
        decision = agent.guard_amount_write(sess.role, "assessed_tax_kobo",
                                            tax_kobo, actor=sess.principal)
        if not decision.allowed:
            raise ApiError(403, "AmountWriteBlocked", display_message=decision.message)
        tier = biz.tier
        if body.get("tier") is not None:
            tier = Tier.from_label(str(body["tier"]))
        if tier is None:
            raise ApiError(400, "ValidationFailed",
                           detail="tier required when business has none")
        period = str(body.get("period") or biz.assessed_period or "")
        if not valid_period(period):
            raise ApiError(400, "ValidationFailed", detail="period required (YYYY-MM)")
        pool.set_business_assessment(business_id, tier, tax_kobo, period,
                                     run_id="MANUAL", actor=sess.principal)
        return {"business_id": business_id, "tier": tier.label,
                "tax_kobo": tax_kobo, "tax_amount": fmt_naira(tax_kobo)}

    # -- admin: TIN issuance --------------------------------------------------

    @app.post("/api/admin/tin/{taxpayer_id}")
    async def issue_tin(taxpayer_id: str, request: Request):
        sess = _require_role(request, Role.ADMIN)
        tp = pool.taxpayer(taxpayer_id)
        if tp is None:
            raise ApiError(400, "NotFound", detail=f"no taxpayer {taxpayer_id}")
        default_password = gen_default_password()
        try:
            tin = pool.issue_tin_for(taxpayer_id, hash_password(default_password),
                                     actor=sess.principal)
        except AlreadyIssued:
            raise ApiError(400, "AlreadyIssued")
        notifier.notify(
            to=tp.email or tp.phone,
            subject="Your Taxpayer Identification Number",
            body=(f"Dear {tp.full_name}, your TIN is {display_tin(tin)}. "
                  f"Log on with it and the default password {default_password}; "
                  f"you will be asked to change the password."),
        )
        return {"taxpayer_id": taxpayer_id, "tin": display_tin(tin)}

    # -- taxpayer: password, assessment, code, receipt -------------------------

    @app.post("/api/taxpayer/password")
    async def change_password(request: Request):
        sess, tp = _taxpayer_ctx(request, allow_provisional=True)
        body = await _json_body(request)
        old = _str_field(body, "old")
        new = _str_field(body, "new")
        confirm = _str_field(body, "confirm")
        if not verify_password(old, tp.password_hash or ""):
            raise ApiError(400, "OldPasswordWrong")
        if new != confirm:
            raise ApiError(400, "ConfirmMismatch")
        if new == old:
            raise ApiError(400, "SameAsOld")
        pool.change_password(tp.taxpayer_id, hash_password(new), actor=sess.principal)
        return {"display_message": messages.PASSWORD_CHANGED}

    @app.get("/api/taxpayer/assessment")
    async def view_assessment(request: Request):
        sess, tp = _taxpayer_ctx(request)
        assessed = [b for b in pool.businesses_of(tp.taxpayer_id) if b.tier is not None]
        if not assessed:
            raise ApiError(400, "NoAssessment")
        total = sum(b.assessed_tax_kobo for b in assessed)
        top_tier = max(b.tier for b in assessed)
        return {
            "taxpayer_name": tp.full_name,
            "tin": display_tin(sess.principal),
            "businesses": [{
                "business_id": b.business_id,
                "business_name": b.business_name,
                "tier": b.tier.label,
                "tax_kobo": b.assessed_tax_kobo,
                "tax_amount": fmt_naira(b.assessed_tax_kobo),
                "period": b.assessed_period,
            } for b in assessed],
            "tier": top_tier.label,
            "tax_kobo": total,
            "tax_amount": fmt_naira(total),
            "amount_editable": False,
        }

    @app.post("/api/taxpayer/assessment")
    async def taxpayer_write_assessment(request: Request):
        sess, _tp = _taxpayer_ctx(request)
        body = await _json_body(request)
        attempted = _int_field(body, "tax_kobo")
        decision = agent.guard_amount_write(Role.TAXPAYER, "assessed_tax_kobo",
                                            attempted, actor=sess.principal)
        raise ApiError(403, "AmountWriteBlocked", display_message=decision.message)

    @app.post("/api/taxpayer/reference-code")
    async def request_reference_code(request: Request):
        sess, tp = _taxpayer_ctx(request)
        assessed = [b for b in pool.businesses_of(tp.taxpayer_id) if b.tier is not None]
        if not assessed:
            raise ApiError(400, "NoAssessment")
        total = sum(b.assessed_tax_kobo for b in assessed)
        business_names = ", ".join(sorted(b.business_name for b in assessed))
        now = clock()
        outstanding = None
        for rec in pool.codes_of(sess.principal):
            if rec.status is CodeStatus.ISSUED and now <= rec.expires_at:
                outstanding = rec  # one live code per taxpayer
                break
        rec = outstanding
        if rec is None:
            try:
                rec = agent.issue_reference_code(sess.principal, total, now=now)
            except UnknownTin:
                raise ApiError(401, "Unauthorized")
        return {
            "reference_code": rec.rendered,
            "tax_amount": fmt_naira(rec.assessed_kobo),
            "tax_kobo": rec.assessed_kobo,
            "taxpayer_name": tp.full_name,
            "business_name": business_names,
            "date": iso(rec.issued_at),
            "outstanding": outstanding is not None,
        }

    @app.get("/api/taxpayer/receipt/{code}")
    async def reprint_receipt(code: str, request: Request):
        sess, _tp = _taxpayer_ctx(request)
        raw = normalize_code(code)
        rec = pool.code(raw)
        if rec is None:
            raise ApiError(400, "NotPaid")
        if rec.owner_tin != sess.principal:
            raise ApiError(403, "NotYourCode")
        receipt = pool.receipt_for_code(raw)
        if rec.status is not CodeStatus.REDEEMED or receipt is None:
            raise ApiError(400, "NotPaid")
        return serialize_receipt(receipt)

    # -- bank: lookup and payment ------------------------------------------------

    @app.get("/api/bank/lookup/{code}")
    async def bank_lookup(code: str, request: Request):
        _sess = _require_role(request, Role.BANK_STAFF)
        presenter = request.query_params.get("presenter", "") or None
        if presenter:
            presenter = normalize_tin(presenter)
        result = agent.verify_reference_code(code, presenter_tin=presenter,
                                             now=clock())
        body: dict = {"outcome": result.outcome.value,
                      "found": result.outcome.value != "NotFound"}
        if result.owner_name is not None:
            body["owner_name"] = result.owner_name
        if result.outcome.value == "Valid":
            body.update({
                "business_name": result.business_name,
                "taxpayer_name": result.owner_name,
                "tax_amount": fmt_naira(result.assessed_kobo),
                "tax_kobo": result.assessed_kobo,
                "tin": display_tin(result.tin),
            })
        return body

    @app.post("/api/bank/payment")
    async def record_payment(request: Request):
        sess = _require_role(request, Role.BANK_STAFF)
        body = await _json_body(request)
        code = _str_field(body, "code")
        presenter = normalize_tin(_str_field(body, "presenter_tin"))
        cash = _int_field(body, "cash_amount_kobo")
        claimed = _int_field(body, "claimed_assessed_kobo", required=False)
        now = clock()
        assessment = agent.assess_transaction(code, presenter, cash, now=now,
                                              claimed_assessed_kobo=claimed)
        features = assessment.features.to_list() if assessment.features else None
        if assessment.verdict is Verdict.FRAUD_ALERT:
            raise ApiError(409, "FraudDetected",
                           display_message=assessment.display_message,
                           rule_hits=assessment.rule_labels(),
                           ann_score=assessment.ann_score,
                           features=features)
        raw = normalize_code(code)
        try:
            _rec, txn, receipt = pool.redeem_code(
                raw, payer_tin=presenter, amount_paid_kobo=cash,
                teller=sess.principal, at=now)
        except (AlreadyRedeemed, ExpiredOrVoided, NotFound) as exc:
            raise ApiError(409, type(exc).__name__)
        return {
            "display_message": assessment.display_message,
            "txn_id": txn.txn_id,
            "receipt": serialize_receipt(receipt),
            "ann_score": assessment.ann_score,
            "features": features,
        }

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
