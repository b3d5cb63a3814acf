"""The miner platform: cleanse captured data, compute profitability, classify
businesses into tax tiers with a threshold decision tree, and assess tax.

Tier assignment walks an explicit comparison tree (root = the business,
decision nodes = net-profit comparisons, one branch per tier); tests hold it
against an independent linear band scan.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from fractions import Fraction
from pathlib import Path

from . import messages
from .domain import Kobo, RevsysError, Tier, utcnow
from .pool import DataPool


class InvalidGuide(RevsysError):
    code = "InvalidGuide"


class NegativeInput(RevsysError):
    code = "NegativeInput"


class NoEarningsRecords(RevsysError):
    code = "NoEarningsRecords"

    def __init__(self):
        super().__init__(messages.NO_EARNINGS)


# --------------------------------------------------------------------------
# Rate guide
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Band:
    upper_kobo: Kobo | None  # inclusive upper edge; None means unbounded
    tier: Tier
    rate_permille: int


@dataclass(frozen=True)
class TierRateGuide:
    """Ordered profit bands T1..T5 with tax rates; net profit <= 0 is Exempt."""

    bands: tuple[Band, ...]
    currency: str = "NGN"

    def __post_init__(self):
        expected = [Tier.T1, Tier.T2, Tier.T3, Tier.T4, Tier.T5]
        if [b.tier for b in self.bands] != expected:
            raise InvalidGuide("guide must have exactly the five bands T1..T5, in order")
        uppers = [b.upper_kobo for b in self.bands]
        if any(u is None for u in uppers[:-1]) or uppers[-1] is not None:
            raise InvalidGuide("only the T5 band may be unbounded")
        finite = [u for u in uppers[:-1]]
        if finite[0] <= 0 or any(a >= b for a, b in zip(finite, finite[1:])):
            raise InvalidGuide("band upper bounds must be positive and strictly increasing")
        rates = [b.rate_permille for b in self.bands]
        if any(r < 0 or r > 1000 for r in rates):
            raise InvalidGuide("rates must lie in [0, 1000] permille")
        if any(a > b for a, b in zip(rates, rates[1:])):
            raise InvalidGuide("rates must be non-decreasing across bands")
        object.__setattr__(self, "_tree", _build_tree(self.bands))

    def rate_for(self, tier: Tier) -> int:
        if tier is Tier.EXEMPT:
            return 0
        return self.bands[int(tier) - 1].rate_permille


def default_rate_guide() -> TierRateGuide:
    # Configurable defaults, kobo edges: T1 (0, ₦50k], T2 (₦50k, ₦200k],
    # T3 (₦200k, ₦1M], T4 (₦1M, ₦5M], T5 above.
    return TierRateGuide(bands=(
        Band(5_000_000, Tier.T1, 20),
        Band(20_000_000, Tier.T2, 30),
        Band(100_000_000, Tier.T3, 40),
        Band(500_000_000, Tier.T4, 50),
        Band(None, Tier.T5, 60),
    ))


def guide_to_dict(guide: TierRateGuide) -> dict:
    return {
        "bands": [
            {"upper_kobo": b.upper_kobo, "tier": b.tier.label, "rate_permille": b.rate_permille}
            for b in guide.bands
        ],
        "currency": guide.currency,
    }


def load_rate_guide(path: str | Path) -> TierRateGuide:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        bands = tuple(
            Band(
                upper_kobo=b["upper_kobo"],
                tier=Tier.from_label(b["tier"]),
                rate_permille=int(b["rate_permille"]),
            )
            for b in raw["bands"]
        )
        return TierRateGuide(bands=bands, currency=raw.get("currency", "NGN"))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidGuide(f"unreadable rate guide: {exc}") from exc


# --------------------------------------------------------------------------
# Decision tree
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TierLeaf:
    tier: Tier


@dataclass(frozen=True)
class ProfitSplit:
    """net_profit <= threshold goes left, else right."""

    threshold_kobo: Kobo
    left: "ProfitSplit | TierLeaf"
    right: "ProfitSplit | TierLeaf"


def _build_tree(bands: tuple[Band, ...]) -> ProfitSplit:
    # Rightmost leaf is the unbounded top tier; fold the finite edges in
    # reverse so each split's left child is that band's tier.
    node: ProfitSplit | TierLeaf = TierLeaf(bands[-1].tier)
    for band in reversed(bands[:-1]):
        node = ProfitSplit(band.upper_kobo, TierLeaf(band.tier), node)
    return ProfitSplit(0, TierLeaf(Tier.EXEMPT), node)


def classify_tier(net_profit_kobo: Kobo, guide: TierRateGuide) -> Tier:
    """Walk the guide's decision tree down to a tier leaf."""
    node = guide._tree
    while isinstance(node, ProfitSplit):
        node = node.left if net_profit_kobo <= node.threshold_kobo else node.right
    return node.tier


def assess_tax(net_profit_kobo: Kobo, guide: TierRateGuide) -> tuple[Tier, Kobo]:
    """Tier plus tax, floored to whole kobo (rounding favors the taxpayer)."""
    tier = classify_tier(net_profit_kobo, guide)
    if tier is Tier.EXEMPT:
        return tier, 0
    return tier, net_profit_kobo * guide.rate_for(tier) // 1000


# --------------------------------------------------------------------------
# Profitability
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfitReport:
    business_id: str
    period: str
    net_profit_kobo: Kobo
    profit_margin: Fraction  # net / revenue; 0 when revenue is 0


def compute_profitability(revenue_kobo: Kobo, expenses_kobo: Kobo,
                          business_id: str = "", period: str = "") -> ProfitReport:
    if revenue_kobo < 0 or expenses_kobo < 0:
        raise NegativeInput("revenue and expenses must be >= 0")
    net = revenue_kobo - expenses_kobo
    margin = Fraction(net, revenue_kobo) if revenue_kobo else Fraction(0)
    return ProfitReport(business_id=business_id, period=period,
                        net_profit_kobo=net, profit_margin=margin)


# --------------------------------------------------------------------------
# Cleansing
# --------------------------------------------------------------------------


class RejectReason(str, Enum):
    MISSING_EARNINGS = "MissingEarnings"
    DUPLICATE_TIN = "DuplicateTin"
    MALFORMED_NUMERIC = "MalformedNumeric"
    EMPTY_NAME = "EmptyName"


@dataclass
class CaptureRow:
    """One raw captured row as the miner sees it; earnings fields untrusted."""

    business_name: str
    revenue: str | None
    expenses: str | None
    period: str
    captured_at: datetime
    tin: str = ""  # owner TIN, or the internal owner id while no TIN exists
    business_id: str = ""
    full_name: str = ""
    location: str = ""
    sector: str = ""


@dataclass
class CleanRow:
    business_id: str
    tin: str
    business_name: str
    period: str
    revenue_kobo: Kobo
    expenses_kobo: Kobo
    captured_at: datetime
    full_name: str = ""
    location: str = ""
    sector: str = ""


@dataclass
class CleansingReport:
    accepted: list[CleanRow] = field(default_factory=list)
    rejected: list[tuple[CaptureRow, RejectReason]] = field(default_factory=list)


def normalize_name(name: str) -> str:
    return " ".join((name or "").split()).title()


def parse_kobo(raw: str | None) -> Kobo | None:
    """Strict integer kobo; commas tolerated. None on blank, ValueError on junk."""
    if raw is None:
        return None
    text = str(raw).strip().replace(",", "")
    if not text:
        return None
    value = int(text)  # raises ValueError on malformed input
    if value < 0:
        raise ValueError(f"negative amount: {raw}")
    return value


def cleanse(rows: list[CaptureRow]) -> CleansingReport:
    """Trim and case-normalize names, reject bad earnings, dedupe latest-wins.

    Rejections are data, not errors: |accepted| + |rejected| == |input|.
    """
    report = CleansingReport()
    candidates: list[tuple[CaptureRow, CleanRow]] = []
    for row in rows:
        name = normalize_name(row.business_name)
        if not name:
            report.rejected.append((row, RejectReason.EMPTY_NAME))
            continue
        try:
            revenue = parse_kobo(row.revenue)
            expenses = parse_kobo(row.expenses)
        except ValueError:
            report.rejected.append((row, RejectReason.MALFORMED_NUMERIC))
            continue
        if revenue is None or expenses is None:
            report.rejected.append((row, RejectReason.MISSING_EARNINGS))
            continue
        candidates.append((row, CleanRow(
            business_id=row.business_id,
            tin=row.tin,
            business_name=name,
            period=row.period,
            revenue_kobo=revenue,
            expenses_kobo=expenses,
            captured_at=row.captured_at,
            full_name=row.full_name.strip(),
            location=row.location.strip(),
            sector=row.sector.strip(),
        )))

    # Duplicate TIN + business name: the freshest capture wins.
    best: dict[tuple[str, str], tuple[CaptureRow, CleanRow]] = {}
    order: list[tuple[str, str]] = []
    for row, clean in candidates:
        key = (clean.tin, clean.business_name)
        if key not in best:
            best[key] = (row, clean)
            order.append(key)
        elif clean.captured_at >= best[key][1].captured_at:
            report.rejected.append((best[key][0], RejectReason.DUPLICATE_TIN))
            best[key] = (row, clean)
        else:
            report.rejected.append((row, RejectReason.DUPLICATE_TIN))
    report.accepted = [best[key][1] for key in order]
    return report


# --------------------------------------------------------------------------
# Extraction run
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AssessmentEntry:
    business_id: str
    tin: str
    period: str
    net_profit_kobo: Kobo
    tier: Tier
    tax_kobo: Kobo


@dataclass
class MiningReport:
    run_id: str
    started_at: datetime
    counts: dict[Tier, int]
    entries: list[AssessmentEntry]
    status_message: str

    @property
    def total_tax_kobo(self) -> Kobo:
        return sum(e.tax_kobo for e in self.entries)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["business_id", "tin", "period", "net_profit_kobo", "tier", "tax_kobo"])
        for e in self.entries:
            writer.writerow([e.business_id, e.tin, e.period, e.net_profit_kobo,
                             e.tier.label, e.tax_kobo])
        return buf.getvalue()


def _rows_from_pool(pool: DataPool) -> list[CaptureRow]:
    rows = []
    for biz in sorted(pool.businesses(), key=lambda b: b.business_id):
        owner = pool.taxpayer(biz.owner_id)
        tin = (owner.tin if owner and owner.tin else biz.owner_id)
        latest = max(biz.financials, key=lambda f: f.period) if biz.financials else None
        rows.append(CaptureRow(
            business_name=biz.business_name,
            revenue=str(latest.revenue_kobo) if latest else None,
            expenses=str(latest.expenses_kobo) if latest else None,
            period=latest.period if latest else "",
            captured_at=latest.captured_at if latest else utcnow(),
            tin=tin,
            business_id=biz.business_id,
            full_name=owner.full_name if owner else "",
            location=biz.location,
            sector=biz.sector,
        ))
    return rows


def run_extraction(pool: DataPool, guide: TierRateGuide,
                   actor: str = "SYSTEM") -> MiningReport:
    """Cleanse -> profitability (latest month) -> classify -> assess.

    Persists tier and assessment onto each business (TierAssigned events).
    Raises NoEarningsRecords when no business yields a profit report.
    """
    started_at = utcnow()
    report = cleanse(_rows_from_pool(pool))
    profits = [
        (clean, compute_profitability(clean.revenue_kobo, clean.expenses_kobo,
                                      business_id=clean.business_id, period=clean.period))
        for clean in report.accepted
    ]
    if not profits:
        raise NoEarningsRecords()

    run_id = pool.begin_mining_run(actor=actor)
    counts: dict[Tier, int] = {tier: 0 for tier in Tier}
    entries: list[AssessmentEntry] = []
    for clean, profit in profits:
        tier, tax = assess_tax(profit.net_profit_kobo, guide)
        counts[tier] += 1
        entries.append(AssessmentEntry(
            business_id=clean.business_id,
            tin=clean.tin if clean.tin.startswith("ED") else "",
            period=clean.period,
            net_profit_kobo=profit.net_profit_kobo,
            tier=tier,
            tax_kobo=tax,
        ))
        pool.set_business_assessment(clean.business_id, tier, tax, clean.period,
                                     run_id, actor=actor)
    return MiningReport(
        run_id=run_id,
        started_at=started_at,
        counts=counts,
        entries=entries,
        status_message=messages.EXTRACTION_OK,
    )


def report_from_pool(pool: DataPool) -> str:
    """Rebuild the assessment CSV from committed business state (no re-mining)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["business_id", "tin", "period", "net_profit_kobo", "tier", "tax_kobo"])
    for biz in sorted(pool.businesses(), key=lambda b: b.business_id):
        if biz.tier is None:
            continue
        owner = pool.taxpayer(biz.owner_id)
        tin = owner.tin if owner and owner.tin else ""
        fin = next((f for f in biz.financials if f.period == biz.assessed_period), None)
        net = (fin.revenue_kobo - fin.expenses_kobo) if fin else 0
        writer.writerow([biz.business_id, tin, biz.assessed_period, net,
                         biz.tier.label, biz.assessed_tax_kobo])
    return buf.getvalue()
