"""Data pool: append-only audit log, fold/replay equivalence, snapshots,
crash recovery, and single-winner redemption under concurrency.

The replay oracle is the core check here: any pool state must be exactly
reproducible from its event log alone.
"""

import json
import shutil
import threading
from concurrent.futures import ThreadPoolExecutor
from datetime import timedelta

import pytest

from revsys.domain import (
    iso,
    BusinessRecord,
    CodeStatus,
    MonthlyFinancials,
    ReferenceCode,
    Role,
    TaxpayerRecord,
    Tier,
    UserAccount,
    hash_password,
    mint_tin,
    utcnow,
)
from revsys.pool import (
    AlreadyIssued,
    AlreadyRedeemed,
    AuditEvent,
    CorruptLog,
    DataPool,
    DuplicateCode,
    DuplicateTin,
    DuplicateUsername,
    EventKind,
    ExpiredOrVoided,
    IntegrityViolation,
    NotFound,
    PoolClosed,
    read_log,
)


def _capture_person(pool, name="Ada Obi", email="ada@x.ng", tin_counter=None):
    tid = pool.put_record(TaxpayerRecord(taxpayer_id="", full_name=name,
                                         email=email, phone="0801"))
    if tin_counter is not None:
        tin = pool.issue_tin_for(tid, hash_password("pw"))
        return tid, tin
    return tid, None


def _issue_code(pool, tin, amount=100_000, ttl_hours=72, code=None):
    now = utcnow()
    rec = ReferenceCode(
        code=code or ("A" * 16),
        owner_tin=tin,
        assessed_kobo=amount,
        issued_at=now,
        expires_at=now + timedelta(hours=ttl_hours),
    )
    pool.issue_code(rec)
    return rec


# -- audit event serialization ---------------------------------------------------


def test_event_line_round_trip():
    ev = AuditEvent(seq=7, at=iso(utcnow()), actor="X", kind=EventKind.LOGIN_OK,
                    payload={"principal": "bob"})
    again = AuditEvent.from_line(ev.to_line())
    assert again == ev


def test_event_line_key_order_fixed():
    ev = AuditEvent(seq=1, at=iso(utcnow()), actor="A", kind=EventKind.LOGIN_FAIL,
                    payload={"principal": "p"})
    keys = list(json.loads(ev.to_line()).keys())
    assert keys == ["seq", "at", "actor", "kind", "payload"]


def test_event_payload_must_be_flat_strings(pool):
    with pytest.raises(ValueError):
        pool.append_event("A", EventKind.LOGIN_OK, {"n": 3})


# -- basic storage and indexes ------------------------------------------------------


def test_put_and_read_taxpayer(pool):
    tid, _ = _capture_person(pool)
    tp = pool.taxpayer(tid)
    assert tp.full_name == "Ada Obi"
    assert tp.tin is None
    assert tp.must_change_password is True


def test_taxpayer_ids_sequential(pool):
    a, _ = _capture_person(pool, email="a@x")
    b, _ = _capture_person(pool, name="B", email="b@x")
    assert (a, b) == ("TP000000", "TP000001")


def test_business_needs_known_owner(pool):
    with pytest.raises(IntegrityViolation):
        pool.put_record(BusinessRecord(business_id="", owner_id="TP999999",
                                       business_name="Ghost", location="", sector=""))


def test_taxpayer_needs_contact_point(pool):
    with pytest.raises(IntegrityViolation):
        pool.put_record(TaxpayerRecord(taxpayer_id="", full_name="No Contact",
                                       email="", phone=""))


def test_financials_replace_by_period(pool):
    tid, _ = _capture_person(pool)
    bid = pool.put_record(BusinessRecord(business_id="", owner_id=tid,
                                         business_name="Shop", location="", sector=""))
    pool.attach_financials(bid, MonthlyFinancials("2026-01", 100, 40, utcnow()))
    pool.attach_financials(bid, MonthlyFinancials("2026-01", 200, 50, utcnow()))
    fins = pool.business(bid).financials
    assert len(fins) == 1
    assert fins[0].revenue_kobo == 200


def test_tin_issue_and_duplicate_guard(pool):
    tid, _ = _capture_person(pool)
    tin = pool.issue_tin_for(tid, hash_password("pw"))
    assert pool.taxpayer_by_tin(tin).taxpayer_id == tid
    with pytest.raises(AlreadyIssued):
        pool.issue_tin_for(tid, hash_password("pw"))


def test_tin_counter_advances(pool):
    a, tin_a = _capture_person(pool, email="a@x", tin_counter=True)
    b, tin_b = _capture_person(pool, name="B", email="b@x", tin_counter=True)
    assert tin_a == mint_tin(0)
    assert tin_b == mint_tin(1)


def test_captured_tin_collision_rejected(pool):
    tid, tin = _capture_person(pool, tin_counter=True)
    with pytest.raises(DuplicateTin):
        pool.put_record(TaxpayerRecord(taxpayer_id="", full_name="Clone",
                                       email="c@x", phone="1", tin=tin))


def test_duplicate_username_rejected(pool):
    pool.put_record(UserAccount("bir1", hash_password("x"), Role.BIR_STAFF))
    with pytest.raises(DuplicateUsername):
        pool.put_record(UserAccount("bir1", hash_password("y"), Role.BANK_STAFF))


def test_password_change_clears_flag(pool):
    tid, tin = _capture_person(pool, tin_counter=True)
    assert pool.taxpayer(tid).must_change_password is True
    pool.change_password(tid, hash_password("new"))
    assert pool.taxpayer(tid).must_change_password is False


# -- reference codes and payments -----------------------------------------------------


def test_issue_code_and_duplicate(pool):
    _, tin = _capture_person(pool, tin_counter=True)
    rec = _issue_code(pool, tin)
    assert pool.code(rec.code).status is CodeStatus.ISSUED
    with pytest.raises(DuplicateCode):
        _issue_code(pool, tin)


def test_redeem_emits_txn_and_receipt(pool):
    _, tin = _capture_person(pool, tin_counter=True)
    rec = _issue_code(pool, tin, amount=250_000)
    out_rec, txn, receipt = pool.redeem_code(rec.code, payer_tin=tin,
                                             amount_paid_kobo=250_000, teller="bank1")
    assert out_rec.status is CodeStatus.REDEEMED
    assert txn.amount_paid_kobo == 250_000
    assert receipt.amount_paid_kobo == 250_000
    assert receipt.reference_code == rec.rendered
    assert pool.receipt_for_code(rec.code) == receipt
    assert txn.txn_id == "TXN00000000"
    assert receipt.receipt_no == "RCT00000000"


def test_redeem_is_single_use(pool):
    _, tin = _capture_person(pool, tin_counter=True)
    rec = _issue_code(pool, tin)
    pool.redeem_code(rec.code)
    with pytest.raises(AlreadyRedeemed):
        pool.redeem_code(rec.code)


def test_redeem_unknown_and_expired(pool):
    _, tin = _capture_person(pool, tin_counter=True)
    with pytest.raises(NotFound):
        pool.redeem_code("B" * 16)
    rec = _issue_code(pool, tin)
    with pytest.raises(ExpiredOrVoided):
        pool.redeem_code(rec.code, at=utcnow() + timedelta(hours=73))
    assert pool.code(rec.code).status is CodeStatus.ISSUED  # attempt left no mark


def test_lazy_expiry_via_lookup_event(pool):
    _, tin = _capture_person(pool, tin_counter=True)
    rec = _issue_code(pool, tin)
    pool.append_event("BIRGENT", EventKind.CODE_LOOKUP, {
        "code": rec.code, "presenter": "", "outcome": "Expired",
        "expired_transition": "true"})
    assert pool.code(rec.code).status is CodeStatus.EXPIRED
    with pytest.raises(ExpiredOrVoided):
        pool.redeem_code(rec.code)


def test_void_via_fraud_alert_event(pool):
    _, tin = _capture_person(pool, tin_counter=True)
    rec = _issue_code(pool, tin)
    pool.append_event("BIRGENT", EventKind.FRAUD_ALERT, {
        "code": rec.code, "presenter": "thief", "rules": "StolenCode",
        "ann_score": "0", "voided": "true"})
    assert pool.code(rec.code).status is CodeStatus.VOIDED


def test_lookup_counts(pool):
    _, tin = _capture_person(pool, tin_counter=True)
    rec = _issue_code(pool, tin)
    assert pool.lookup_count(rec.code) == 0
    for _ in range(3):
        pool.append_event("BIRGENT", EventKind.CODE_LOOKUP, {
            "code": rec.code, "presenter": "", "outcome": "Valid"})
    assert pool.lookup_count(rec.code) == 3


def test_login_stats(pool):
    pool.record_login("p1", True)
    pool.record_login("p1", False)
    pool.record_login("p1", False)
    assert pool.login_stats("p1") == (1, 2)
    assert pool.login_stats("nobody") == (0, 0)


# -- event-sourcing invariants ------------------------------------------------------


def _busy_pool(pool):
    """A pool with every event kind represented."""
    pool.put_record(UserAccount("bir1", hash_password("x"), Role.BIR_STAFF))
    tid, tin = _capture_person(pool, tin_counter=True)
    bid = pool.put_record(BusinessRecord(business_id="", owner_id=tid,
                                         business_name="Shop", location="L", sector="S"))
    pool.attach_financials(bid, MonthlyFinancials("2026-01", 900_000, 100_000, utcnow()))
    pool.change_password(tid, hash_password("better"))
    run = pool.begin_mining_run()
    pool.set_business_assessment(bid, Tier.T1, 16_000, "2026-01", run)
    rec = _issue_code(pool, tin, amount=16_000)
    pool.append_event("BIRGENT", EventKind.CODE_LOOKUP, {
        "code": rec.code, "presenter": tin, "outcome": "Valid"})
    pool.redeem_code(rec.code, payer_tin=tin, amount_paid_kobo=16_000, teller="bank1")
    rec2 = _issue_code(pool, tin, amount=16_000, code="C" * 16)
    pool.append_event("BIRGENT", EventKind.FRAUD_ALERT, {
        "code": rec2.code, "presenter": "thief", "rules": "StolenCode",
        "ann_score": "0.5", "voided": "true"})
    pool.record_login(tin, True)
    pool.record_login(tin, False)
    pool.append_event(tin, EventKind.ALTERATION_BLOCKED, {
        "role": "Taxpayer", "field": "assessed_tax_kobo", "attempted_kobo": "1"})
    return tid, bid, rec


def test_seq_is_gap_free_and_ordered(pool):
    _busy_pool(pool)
    seqs = [e.seq for e in pool.events()]
    assert seqs == list(range(1, len(seqs) + 1))


def test_replay_reproduces_state_hash(pool):
    _busy_pool(pool)
    replayed = DataPool.replay(pool.events())
    assert replayed.state_hash() == pool.state_hash()


def test_reopen_from_disk_matches_live(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    pool = DataPool(d)
    _busy_pool(pool)
    live_hash = pool.state_hash()
    live_seq = pool.last_seq
    pool.close()
    again = DataPool(d)
    assert again.state_hash() == live_hash
    assert again.last_seq == live_seq
    again.close()


def test_snapshot_plus_tail_replay(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    pool = DataPool(d)
    tid, bid, rec = _busy_pool(pool)
    pool.checkpoint()
    pool.record_login("after-snapshot", True)  # tail beyond the snapshot
    pool.record_login("after-snapshot", False)
    live_hash = pool.state_hash()
    pool.close()
    again = DataPool(d)
    assert again.state_hash() == live_hash
    assert again.login_stats("after-snapshot") == (1, 1)
    again.close()


def test_kill_without_checkpoint_recovers_from_log_alone(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    pool = DataPool(d)
    _busy_pool(pool)
    expected = pool.state_hash()
    # simulate a hard kill: no close(), no checkpoint; reopen from the log
    crashed = DataPool(d)
    assert crashed.state_hash() == expected
    crashed.close()
    pool.close()


def test_torn_tail_write_is_detected(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    pool = DataPool(d)
    _busy_pool(pool)
    pool.close()
    log = d / "events.log"
    text = log.read_text(encoding="utf-8")
    log.write_text(text[:-20], encoding="utf-8")  # torn final line
    with pytest.raises(CorruptLog):
        DataPool(d)


def test_seq_gap_is_detected(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    pool = DataPool(d)
    _busy_pool(pool)
    pool.close()
    log = d / "events.log"
    lines = log.read_text(encoding="utf-8").splitlines()
    del lines[3]  # removing a middle event must break the chain
    log.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(CorruptLog):
        DataPool(d)


def test_read_log_matches_events(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    pool = DataPool(d)
    _busy_pool(pool)
    events = pool.events()
    pool.close()
    assert tuple(read_log(d)) == events


def test_replayed_counters_continue(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    pool = DataPool(d)
    _busy_pool(pool)
    pool.close()
    again = DataPool(d)
    tid = again.put_record(TaxpayerRecord(taxpayer_id="", full_name="Next",
                                          email="n@x", phone="1"))
    assert tid == "TP000001"  # counter restored from the log, no reuse
    tin = again.issue_tin_for(tid, hash_password("pw"))
    assert tin == mint_tin(1)
    again.close()


def test_closed_pool_rejects_writes(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    pool = DataPool(d)
    pool.close()
    with pytest.raises(PoolClosed):
        pool.record_login("x", True)


# -- concurrency ---------------------------------------------------------------------


def test_concurrent_appends_stay_gap_free(pool):
    n_threads, per_thread = 8, 50

    def work(k):
        for i in range(per_thread):
            pool.record_login(f"t{k}", i % 2 == 0)

    threads = [threading.Thread(target=work, args=(k,)) for k in range(n_threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    seqs = [e.seq for e in pool.events()]
    assert seqs == list(range(1, n_threads * per_thread + 1))
    replayed = DataPool.replay(pool.events())
    assert replayed.state_hash() == pool.state_hash()


def test_concurrent_redeem_single_winner(pool):
    _, tin = _capture_person(pool, tin_counter=True)
    rec = _issue_code(pool, tin)
    barrier = threading.Barrier(32)
    outcomes = []

    def attempt():
        barrier.wait()
        try:
            pool.redeem_code(rec.code, payer_tin=tin, amount_paid_kobo=100_000)
            return "success"
        except AlreadyRedeemed:
            return "already"

    with ThreadPoolExecutor(max_workers=32) as px:
        outcomes = list(px.map(lambda _: attempt(), range(32)))
    assert outcomes.count("success") == 1
    assert outcomes.count("already") == 31
    payments = [e for e in pool.events() if e.kind is EventKind.PAYMENT_RECORDED]
    assert len(payments) == 1
