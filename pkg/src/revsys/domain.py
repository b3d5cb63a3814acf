"""Core vocabulary of the revenue system: money, TINs, tiers, codes, records.

Everything here is a plain value: no I/O, no interior mutation beyond
dataclass fields, safe to share between threads.
"""

from __future__ import annotations

import hashlib
import hmac
import re
import secrets
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum, IntEnum


class RevsysError(Exception):
    """Base error. `code` is the stable machine-readable identifier."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class CounterExhausted(RevsysError):
    code = "CounterExhausted"


class EmptyPassword(RevsysError):
    code = "EmptyPassword"


class InvalidTransition(RevsysError):
    code = "InvalidTransition"


# --------------------------------------------------------------------------
# Money
# --------------------------------------------------------------------------

# Amounts are integer kobo (NGN minor unit; 1 naira == 100 kobo), never floats.
Kobo = int

NAIRA = 100  # kobo per naira


def fmt_naira(kobo: Kobo) -> str:
    """Render integer kobo as `₦N,NNN.NN`; the sign leads the currency mark."""
    sign = "-" if kobo < 0 else ""
    naira, minor = divmod(abs(int(kobo)), 100)
    return f"{sign}₦{naira:,}.{minor:02d}"


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def iso(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat()


def parse_iso(text: str) -> datetime:
    return datetime.fromisoformat(text)


# --------------------------------------------------------------------------
# TIN: `ED` + 8 decimal digits + Luhn check digit
# --------------------------------------------------------------------------

TIN_CAPACITY = 10**8

_TIN_RE = re.compile(r"^ED\d{9}$")


def luhn_check_digit(digits: str) -> int:
    """Check digit d such that `digits + d` passes the Luhn mod-10 test."""
    total = 0
    # Doubling starts at the rightmost payload digit (the check digit will
    # occupy the final position).
    for i, ch in enumerate(reversed(digits)):
        d = int(ch)
        if i % 2 == 0:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return (10 - total % 10) % 10


def mint_tin(counter: int) -> str:
    """Mint the TIN for a registration counter; injective over [0, 10^8)."""
    if not 0 <= counter < TIN_CAPACITY:
        raise CounterExhausted(f"TIN counter out of range: {counter}")
    body = f"{counter:08d}"
    return f"ED{body}{luhn_check_digit(body)}"


def validate_tin(text: str) -> bool:
    """True iff `text` is a stored-form TIN with a correct check digit."""
    if not isinstance(text, str) or not _TIN_RE.match(text):
        return False
    return luhn_check_digit(text[2:10]) == int(text[10])


def normalize_tin(text: str) -> str:
    """Strip separators and case from user-typed TINs (`ed-00000000-0`)."""
    return re.sub(r"[-\s]", "", (text or "").upper())


def display_tin(tin: str) -> str:
    return f"ED-{tin[2:10]}-{tin[10]}"


# --------------------------------------------------------------------------
# Passwords
# --------------------------------------------------------------------------

# Deliberately light for a desk-scale system; digests self-describe their
# iteration count so this can be raised without invalidating stored hashes.
PBKDF2_ITERATIONS = 5_000

_PASSWORD_ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"


def hash_password(plain: str, salt: bytes | None = None,
                  iterations: int = PBKDF2_ITERATIONS) -> str:
    """PBKDF2-SHA256 digest in the form `pbkdf2_sha256$iters$salt$hash`."""
    if not plain:
        raise EmptyPassword("password must be non-empty")
    if salt is None:
        salt = secrets.token_bytes(16)
    dk = hashlib.pbkdf2_hmac("sha256", plain.encode("utf-8"), salt, iterations)
    return f"pbkdf2_sha256${iterations}${salt.hex()}${dk.hex()}"


def verify_password(plain: str, digest: str) -> bool:
    if not plain or not digest:
        return False
    try:
        scheme, iters, salt_hex, hash_hex = digest.split("$")
        if scheme != "pbkdf2_sha256":
            return False
        dk = hashlib.pbkdf2_hmac(
            "sha256", plain.encode("utf-8"), bytes.fromhex(salt_hex), int(iters)
        )
    except (ValueError, TypeError):
        return False
    return hmac.compare_digest(dk.hex(), hash_hex)


def gen_default_password() -> str:
    """10-char alphanumeric default password sent with a freshly issued TIN."""
    return "".join(secrets.choice(_PASSWORD_ALPHABET) for _ in range(10))


# --------------------------------------------------------------------------
# Reference codes: Crockford base32, no I/L/O/U (tellers retype these by hand)
# --------------------------------------------------------------------------

CROCKFORD_ALPHABET = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"

_CODE_CHAR_FIX = {"O": "0", "I": "1", "L": "1"}

CODE_RE = re.compile(r"^[0-9A-HJKMNP-TV-Z]{4}(-[0-9A-HJKMNP-TV-Z]{4}){3}$")


def crockford_encode(data: bytes) -> str:
    """Base32-encode with the Crockford alphabet, 5 bits per character."""
    nbits = len(data) * 8
    if nbits % 5:
        raise ValueError("data length must pack into whole base32 characters")
    value = int.from_bytes(data, "big")
    return "".join(
        CROCKFORD_ALPHABET[(value >> s) & 0x1F] for s in range(nbits - 5, -1, -5)
    )


def render_code(raw: str) -> str:
    """Group a 16-char stored code as `XXXX-XXXX-XXXX-XXXX`."""
    return "-".join(raw[i : i + 4] for i in range(0, len(raw), 4))


def normalize_code(text: str) -> str:
    """Canonicalize teller-typed codes: upcase, drop separators, O→0, I/L→1."""
    out = []
    for ch in (text or "").upper():
        if ch in "- \t":
            continue
        out.append(_CODE_CHAR_FIX.get(ch, ch))
    return "".join(out)


# --------------------------------------------------------------------------
# Enums
# --------------------------------------------------------------------------


class Tier(IntEnum):
    """Profit band; the integer value is the total order Exempt < T1 < … < T5."""

    EXEMPT = 0
    T1 = 1
    T2 = 2
    T3 = 3
    T4 = 4
    T5 = 5

    @property
    def label(self) -> str:
        return "Exempt" if self is Tier.EXEMPT else self.name

    @classmethod
    def from_label(cls, label: str) -> "Tier":
        if label == "Exempt":
            return cls.EXEMPT
        return cls[label]


class Role(str, Enum):
    ADMIN = "Admin"
    BIR_STAFF = "BirStaff"
    BANK_STAFF = "BankStaff"
    TAXPAYER = "Taxpayer"


# UserAccount roles; Taxpayer principals authenticate by TIN instead.
STAFF_ROLES = (Role.ADMIN, Role.BIR_STAFF, Role.BANK_STAFF)


class CodeStatus(str, Enum):
    ISSUED = "Issued"
    REDEEMED = "Redeemed"
    EXPIRED = "Expired"
    VOIDED = "Voided"


TERMINAL_CODE_STATUSES = frozenset(
    {CodeStatus.REDEEMED, CodeStatus.EXPIRED, CodeStatus.VOIDED}
)


def transition_code_status(current: CodeStatus, new: CodeStatus) -> CodeStatus:
    """Issued is the only live state; Redeemed/Expired/Voided are terminal."""
    if current is not CodeStatus.ISSUED or new is CodeStatus.ISSUED:
        raise InvalidTransition(f"illegal code transition {current.value} -> {new.value}")
    return new


class TxnOutcome(str, Enum):
    SUCCESS = "Success"
    REJECTED = "Rejected"


class TaxpayerStatus(str, Enum):
    PROVISIONAL = "Provisional"
    ACTIVE = "Active"


# --------------------------------------------------------------------------
# Records
# --------------------------------------------------------------------------

_PERIOD_RE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")


def valid_period(period: str) -> bool:
    return isinstance(period, str) and bool(_PERIOD_RE.match(period))


@dataclass
class MonthlyFinancials:
    period: str  # YYYY-MM
    revenue_kobo: Kobo  # >= 0
    expenses_kobo: Kobo  # >= 0
    captured_at: datetime


@dataclass
class TaxpayerRecord:
    taxpayer_id: str
    full_name: str
    email: str
    phone: str
    tin: str | None = None  # attached at issuance, unique across the pool
    password_hash: str | None = None
    must_change_password: bool = True
    status: TaxpayerStatus = TaxpayerStatus.PROVISIONAL


@dataclass
class BusinessRecord:
    business_id: str
    owner_id: str  # taxpayer_id; the owner's TIN resolves via the pool once issued
    business_name: str
    location: str
    sector: str
    financials: list[MonthlyFinancials] = field(default_factory=list)
    tier: Tier | None = None
    assessed_tax_kobo: Kobo | None = None
    assessed_period: str | None = None


@dataclass
class ReferenceCode:
    code: str  # 16 Crockford chars, stored unhyphenated
    owner_tin: str
    assessed_kobo: Kobo
    issued_at: datetime
    expires_at: datetime
    status: CodeStatus = CodeStatus.ISSUED

    @property
    def rendered(self) -> str:
        return render_code(self.code)


@dataclass
class TransactionRecord:
    txn_id: str
    code: str  # stored form
    payer_tin: str
    amount_paid_kobo: Kobo
    teller: str
    at: datetime
    outcome: TxnOutcome


@dataclass(frozen=True)
class Receipt:
    """Immutable once emitted; fields copied verbatim from the transaction."""

    receipt_no: str
    business_name: str
    amount_paid_kobo: Kobo
    date: datetime
    reference_code: str  # rendered form, same string the payment slip carried
    tin: str


@dataclass
class UserAccount:
    username: str
    password_hash: str
    role: Role
