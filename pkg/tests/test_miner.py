"""Tier classification, profitability, cleansing, and extraction runs."""

import json
from datetime import datetime, timedelta, timezone
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from revsys.domain import Tier, utcnow
from revsys.miner import (
    Band,
    CaptureRow,
    InvalidGuide,
    NegativeInput,
    NoEarningsRecords,
    TierRateGuide,
    assess_tax,
    classify_tier,
    cleanse,
    compute_profitability,
    default_rate_guide,
    guide_to_dict,
    load_rate_guide,
    normalize_name,
    parse_kobo,
    report_from_pool,
    run_extraction,
)
from revsys.domain import BusinessRecord, MonthlyFinancials, TaxpayerRecord
from revsys.pool import EventKind
from revsys import messages

GUIDE = default_rate_guide()


def _band_scan(net_kobo, guide):
    """Independent flat scan over the band table, no tree involved."""
    if net_kobo <= 0:
        return Tier.EXEMPT
    for band in guide.bands:
        if band.upper_kobo is None or net_kobo <= band.upper_kobo:
            return band.tier
    raise AssertionError("unreachable: last band is unbounded")


# -- tier classification ---------------------------------------------------------


def test_band_edges_exact():
    edges = [b.upper_kobo for b in GUIDE.bands[:-1]]
    for upper, at_edge, above in zip(edges, (Tier.T1, Tier.T2, Tier.T3, Tier.T4),
                                     (Tier.T2, Tier.T3, Tier.T4, Tier.T5)):
        assert classify_tier(upper, GUIDE) is at_edge
        assert classify_tier(upper + 1, GUIDE) is above
        assert classify_tier(upper - 1, GUIDE) is at_edge


def test_non_positive_profit_is_exempt():
    assert classify_tier(0, GUIDE) is Tier.EXEMPT
    assert classify_tier(-1, GUIDE) is Tier.EXEMPT
    assert classify_tier(-10**15, GUIDE) is Tier.EXEMPT
    assert classify_tier(1, GUIDE) is Tier.T1


@settings(max_examples=300)
@given(st.integers(min_value=-10**13, max_value=10**13))
def test_tree_matches_band_scan(net):
    assert classify_tier(net, GUIDE) is _band_scan(net, GUIDE)


@settings(max_examples=100)
@given(st.integers(min_value=-10**9, max_value=10**12),
       st.integers(min_value=0, max_value=10**9))
def test_classification_monotone(net, bump):
    lo = classify_tier(net, GUIDE)
    hi = classify_tier(net + bump, GUIDE)
    assert int(lo) <= int(hi)


def test_tree_matches_scan_on_custom_guide():
    guide = TierRateGuide(bands=(
        Band(7, Tier.T1, 1),
        Band(19, Tier.T2, 5),
        Band(20, Tier.T3, 5),
        Band(1000, Tier.T4, 100),
        Band(None, Tier.T5, 1000),
    ))
    for net in range(-3, 1005):
        assert classify_tier(net, guide) is _band_scan(net, guide)


# -- tax assessment --------------------------------------------------------------


def test_assess_tax_hand_values():
    assert assess_tax(17_000_000, GUIDE) == (Tier.T2, 510_000)
    assert assess_tax(40_000_000, GUIDE) == (Tier.T3, 1_600_000)
    assert assess_tax(600_000_000, GUIDE) == (Tier.T5, 36_000_000)
    assert assess_tax(5_000_000, GUIDE) == (Tier.T1, 100_000)
    assert assess_tax(-5, GUIDE) == (Tier.EXEMPT, 0)
    assert assess_tax(0, GUIDE) == (Tier.EXEMPT, 0)


def test_assess_tax_floors_fractional_kobo():
    # 999 * 20 / 1000 = 19.98 kobo; the taxpayer keeps the fraction.
    assert assess_tax(999, GUIDE) == (Tier.T1, 19)


@settings(max_examples=300)
@given(st.integers(min_value=1, max_value=10**13))
def test_assess_tax_floor_property(net):
    tier, tax = assess_tax(net, GUIDE)
    rate = GUIDE.rate_for(tier)
    assert tax * 1000 <= net * rate < tax * 1000 + 1000


@settings(max_examples=200)
@given(st.integers(min_value=-10**6, max_value=10**12),
       st.integers(min_value=0, max_value=10**8))
def test_assess_tax_monotone(net, bump):
    # Non-decreasing rates across bands make the tax itself monotone.
    _, tax_lo = assess_tax(net, GUIDE)
    _, tax_hi = assess_tax(net + bump, GUIDE)
    assert tax_lo <= tax_hi


def test_rate_for_each_tier():
    assert GUIDE.rate_for(Tier.EXEMPT) == 0
    assert [GUIDE.rate_for(t) for t in (Tier.T1, Tier.T2, Tier.T3, Tier.T4, Tier.T5)] \
        == [20, 30, 40, 50, 60]


# -- guide validation and persistence --------------------------------------------


def _bands(uppers, rates):
    tiers = (Tier.T1, Tier.T2, Tier.T3, Tier.T4, Tier.T5)
    return tuple(Band(u, t, r) for u, t, r in zip(uppers, tiers, rates))


def test_guide_rejects_wrong_band_count():
    with pytest.raises(InvalidGuide):
        TierRateGuide(bands=_bands([10, 20, None], [1, 2, 3])[:3])


def test_guide_rejects_out_of_order_tiers():
    bands = _bands([10, 20, 30, 40, None], [1, 2, 3, 4, 5])
    swapped = (bands[1], bands[0]) + bands[2:]
    with pytest.raises(InvalidGuide):
        TierRateGuide(bands=swapped)


def test_guide_rejects_bounded_top_band():
    with pytest.raises(InvalidGuide):
        TierRateGuide(bands=_bands([10, 20, 30, 40, 50], [1, 2, 3, 4, 5]))


def test_guide_rejects_unbounded_inner_band():
    with pytest.raises(InvalidGuide):
        TierRateGuide(bands=_bands([10, None, 30, 40, None], [1, 2, 3, 4, 5]))


def test_guide_rejects_non_increasing_uppers():
    with pytest.raises(InvalidGuide):
        TierRateGuide(bands=_bands([10, 10, 30, 40, None], [1, 2, 3, 4, 5]))
    with pytest.raises(InvalidGuide):
        TierRateGuide(bands=_bands([0, 20, 30, 40, None], [1, 2, 3, 4, 5]))


def test_guide_rejects_rate_out_of_range():
    with pytest.raises(InvalidGuide):
        TierRateGuide(bands=_bands([10, 20, 30, 40, None], [1, 2, 3, 4, 1001]))
    with pytest.raises(InvalidGuide):
        TierRateGuide(bands=_bands([10, 20, 30, 40, None], [-1, 2, 3, 4, 5]))


def test_guide_rejects_decreasing_rates():
    with pytest.raises(InvalidGuide):
        TierRateGuide(bands=_bands([10, 20, 30, 40, None], [5, 4, 3, 2, 1]))


def test_guide_file_round_trip(tmp_path):
    path = tmp_path / "guide.json"
    path.write_text(json.dumps(guide_to_dict(GUIDE)), encoding="utf-8")
    again = load_rate_guide(path)
    assert again.bands == GUIDE.bands
    assert again.currency == GUIDE.currency


def test_load_rate_guide_rejects_malformed(tmp_path):
    path = tmp_path / "guide.json"
    path.write_text(json.dumps({"bands": [{"tier": "T9"}]}), encoding="utf-8")
    with pytest.raises(InvalidGuide):
        load_rate_guide(path)


# -- profitability ---------------------------------------------------------------


def test_profitability_exact_fraction():
    report = compute_profitability(3, 1, business_id="B", period="2026-01")
    assert report.net_profit_kobo == 2
    assert report.profit_margin == Fraction(2, 3)


def test_profitability_zero_revenue():
    report = compute_profitability(0, 500)
    assert report.net_profit_kobo == -500
    assert report.profit_margin == Fraction(0)


def test_profitability_loss_margin_negative():
    report = compute_profitability(100, 150)
    assert report.profit_margin == Fraction(-1, 2)


def test_profitability_rejects_negative_inputs():
    with pytest.raises(NegativeInput):
        compute_profitability(-1, 0)
    with pytest.raises(NegativeInput):
        compute_profitability(0, -1)


@settings(max_examples=200)
@given(st.integers(min_value=0, max_value=10**12),
       st.integers(min_value=0, max_value=10**12))
def test_profitability_margin_identity(revenue, expenses):
    report = compute_profitability(revenue, expenses)
    if revenue:
        assert report.profit_margin * revenue == revenue - expenses
    else:
        assert report.profit_margin == 0


# -- field parsing ---------------------------------------------------------------


def test_parse_kobo_cases():
    assert parse_kobo("1234") == 1234
    assert parse_kobo("1,234,567") == 1234567
    assert parse_kobo(" 42 ") == 42
    assert parse_kobo("0") == 0
    assert parse_kobo("") is None
    assert parse_kobo("   ") is None
    assert parse_kobo(None) is None


def test_parse_kobo_rejects_junk():
    for bad in ("12.50", "abc", "12a", "-5", "1 000"):
        with pytest.raises(ValueError):
            parse_kobo(bad)


def test_normalize_name():
    assert normalize_name("  ada   lovelace ventures ") == "Ada Lovelace Ventures"
    assert normalize_name("ACME LTD") == "Acme Ltd"
    assert normalize_name("") == ""
    assert normalize_name("   ") == ""


# -- cleansing -------------------------------------------------------------------


def _row(name="Acme Ltd", revenue="1000", expenses="400", tin="ED00000000",
         period="2026-01", captured_at=None, business_id="B1"):
    return CaptureRow(business_name=name, revenue=revenue, expenses=expenses,
                      period=period, captured_at=captured_at or utcnow(),
                      tin=tin, business_id=business_id)


def test_cleanse_accepts_good_row():
    report = cleanse([_row()])
    assert len(report.accepted) == 1 and not report.rejected
    clean = report.accepted[0]
    assert (clean.revenue_kobo, clean.expenses_kobo) == (1000, 400)
    assert clean.business_name == "Acme Ltd"


def test_cleanse_reject_reasons():
    report = cleanse([
        _row(name="   "),
        _row(revenue="12.5"),
        _row(expenses="oops", tin="ED1"),
        _row(revenue=None, tin="ED2"),
        _row(expenses="", tin="ED3"),
    ])
    assert not report.accepted
    reasons = [reason.value for _, reason in report.rejected]
    assert reasons == ["EmptyName", "MalformedNumeric", "MalformedNumeric",
                       "MissingEarnings", "MissingEarnings"]


def test_cleanse_empty_name_outranks_bad_numbers():
    report = cleanse([_row(name="", revenue="junk")])
    assert report.rejected[0][1].value == "EmptyName"


def test_cleanse_malformed_outranks_missing():
    report = cleanse([_row(revenue="junk", expenses=None)])
    assert report.rejected[0][1].value == "MalformedNumeric"


def test_cleanse_dedup_latest_wins():
    t0 = utcnow()
    old = _row(revenue="100", captured_at=t0)
    new = _row(revenue="200", captured_at=t0 + timedelta(days=1))
    for rows in ([old, new], [new, old]):
        report = cleanse(list(rows))
        assert len(report.accepted) == 1
        assert report.accepted[0].revenue_kobo == 200
        assert report.rejected[0][1].value == "DuplicateTin"


def test_cleanse_dedup_tie_later_row_wins():
    t0 = utcnow()
    first = _row(revenue="100", captured_at=t0)
    second = _row(revenue="200", captured_at=t0)
    report = cleanse([first, second])
    assert report.accepted[0].revenue_kobo == 200


def test_cleanse_dedup_key_uses_normalized_name():
    report = cleanse([_row(name="acme  ltd"), _row(name="ACME LTD")])
    assert len(report.accepted) == 1


def test_cleanse_same_name_different_tin_kept():
    report = cleanse([_row(tin="ED1"), _row(tin="ED2")])
    assert len(report.accepted) == 2 and not report.rejected


names = st.sampled_from(["Acme Ltd", "acme  ltd", "Beta Co", "", "  "])
amounts = st.sampled_from(["1000", "2,500", "junk", "", None, "-3", "0"])
tins = st.sampled_from(["ED1", "ED2", "ED3"])


@settings(max_examples=200)
@given(st.lists(st.tuples(names, amounts, amounts, tins,
                          st.integers(min_value=0, max_value=48)), max_size=12))
def test_cleanse_conserves_rows(specs):
    t0 = datetime(2026, 1, 1, tzinfo=timezone.utc)
    rows = [_row(name=n, revenue=r, expenses=e, tin=tin,
                 captured_at=t0 + timedelta(hours=h))
            for n, r, e, tin, h in specs]
    report = cleanse(rows)
    assert len(report.accepted) + len(report.rejected) == len(rows)
    keys = {(c.tin, c.business_name) for c in report.accepted}
    assert len(keys) == len(report.accepted)


# -- extraction runs -------------------------------------------------------------


def _seed_business(pool, name, email, biz, revenue, expenses, period="2026-01",
                   with_tin=True):
    from revsys.domain import hash_password

    tid = pool.put_record(TaxpayerRecord(taxpayer_id="", full_name=name,
                                         email=email, phone="0801"))
    tin = pool.issue_tin_for(tid, hash_password("pw")) if with_tin else None
    bid = pool.put_record(BusinessRecord(
        business_id="", owner_id=tid, business_name=biz,
        location="Benin City", sector="Retail",
        financials=[MonthlyFinancials(period=period, revenue_kobo=revenue,
                                      expenses_kobo=expenses, captured_at=utcnow())],
    ))
    return tid, tin, bid


def test_run_extraction_assesses_and_persists(pool):
    _, tin_a, bid_a = _seed_business(pool, "Ada Obi", "ada@x.ng", "Ada Stores",
                                     revenue=30_000_000, expenses=13_000_000)
    _, tin_b, bid_b = _seed_business(pool, "Ben Eke", "ben@x.ng", "Ben Mills",
                                     revenue=1_000_000, expenses=2_000_000)
    report = run_extraction(pool, GUIDE, actor="T")

    assert report.status_message == "Extraction successful!"
    assert report.run_id == "RUN000000"
    by_bid = {e.business_id: e for e in report.entries}
    assert by_bid[bid_a].tier is Tier.T2
    assert by_bid[bid_a].tax_kobo == 17_000_000 * 30 // 1000
    assert by_bid[bid_a].tin == tin_a
    assert by_bid[bid_b].tier is Tier.EXEMPT
    assert by_bid[bid_b].tax_kobo == 0
    assert report.counts[Tier.T2] == 1 and report.counts[Tier.EXEMPT] == 1
    assert report.total_tax_kobo == by_bid[bid_a].tax_kobo

    stored = pool.business(bid_a)
    assert stored.tier is Tier.T2
    assert stored.assessed_tax_kobo == by_bid[bid_a].tax_kobo
    assert stored.assessed_period == "2026-01"
    kinds = [e.kind for e in pool.events()]
    assert kinds.count(EventKind.MINING_RUN) == 1
    assert kinds.count(EventKind.TIER_ASSIGNED) == 2


def test_run_extraction_uses_latest_period(pool):
    _, _, bid = _seed_business(pool, "Ada Obi", "ada@x.ng", "Ada Stores",
                               revenue=1_000, expenses=0, period="2026-01")
    pool.attach_financials(bid, MonthlyFinancials(
        period="2026-02", revenue_kobo=9_000_000, expenses_kobo=0,
        captured_at=utcnow()))
    report = run_extraction(pool, GUIDE)
    entry = report.entries[0]
    assert entry.period == "2026-02"
    assert entry.net_profit_kobo == 9_000_000
    assert entry.tier is Tier.T2


def test_run_extraction_without_tin_leaves_entry_blank(pool):
    _seed_business(pool, "Ada Obi", "ada@x.ng", "Ada Stores",
                   revenue=1_000, expenses=0, with_tin=False)
    report = run_extraction(pool, GUIDE)
    assert report.entries[0].tin == ""


def test_run_extraction_empty_pool_raises_verbatim(pool):
    with pytest.raises(NoEarningsRecords) as exc:
        run_extraction(pool, GUIDE)
    assert str(exc.value) == messages.NO_EARNINGS
    assert exc.value.code == "NoEarningsRecords"


def test_run_extraction_business_without_financials_raises(pool):
    tid = pool.put_record(TaxpayerRecord(taxpayer_id="", full_name="Ada",
                                         email="a@x.ng", phone="1"))
    pool.put_record(BusinessRecord(business_id="", owner_id=tid,
                                   business_name="Shell Co", location="", sector=""))
    with pytest.raises(NoEarningsRecords):
        run_extraction(pool, GUIDE)


def test_run_ids_advance(pool):
    _seed_business(pool, "Ada Obi", "ada@x.ng", "Ada Stores",
                   revenue=1_000, expenses=0)
    first = run_extraction(pool, GUIDE).run_id
    second = run_extraction(pool, GUIDE).run_id
    assert (first, second) == ("RUN000000", "RUN000001")


# -- reporting -------------------------------------------------------------------


def test_report_csv_matches_recompute(pool):
    _seed_business(pool, "Ada Obi", "ada@x.ng", "Ada Stores",
                   revenue=30_000_000, expenses=13_000_000)
    _seed_business(pool, "Ben Eke", "ben@x.ng", "Ben Mills",
                   revenue=700_000_000, expenses=50_000_000)
    mined = run_extraction(pool, GUIDE)

    lines = report_from_pool(pool).strip().splitlines()
    assert lines[0] == "business_id,tin,period,net_profit_kobo,tier,tax_kobo"
    rows = [line.split(",") for line in lines[1:]]
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)
    by_bid = {e.business_id: e for e in mined.entries}
    total = 0
    for bid, tin, period, net, tier_label, tax in rows:
        entry = by_bid[bid]
        assert int(net) == entry.net_profit_kobo
        assert tier_label == entry.tier.label
        assert int(tax) == entry.tax_kobo
        total += int(tax)
    assert total == mined.total_tax_kobo


def test_report_and_csv_agree(pool):
    _seed_business(pool, "Ada Obi", "ada@x.ng", "Ada Stores",
                   revenue=30_000_000, expenses=13_000_000)
    mined = run_extraction(pool, GUIDE)
    assert report_from_pool(pool) == mined.to_csv()
