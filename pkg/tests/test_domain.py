"""Domain primitives: money, TINs, reference-code encoding, passwords,
status machines. Expected values computed by independent oracles where the
implementation could plausibly drift.
"""

import re
from datetime import timedelta

import pytest
from hypothesis import given, settings, strategies as st

from revsys import domain
from revsys.domain import (
    CODE_RE,
    CROCKFORD_ALPHABET,
    CodeStatus,
    CounterExhausted,
    InvalidTransition,
    Tier,
    TERMINAL_CODE_STATUSES,
    crockford_encode,
    display_tin,
    fmt_naira,
    gen_default_password,
    hash_password,
    iso,
    luhn_check_digit,
    mint_tin,
    normalize_code,
    normalize_tin,
    parse_iso,
    render_code,
    transition_code_status,
    utcnow,
    validate_tin,
    valid_period,
    verify_password,
)


# -- money -------------------------------------------------------------------


def test_fmt_naira_cases():
    # oracle: hand-computed renderings
    assert fmt_naira(0) == "₦0.00"
    assert fmt_naira(1) == "₦0.01"
    assert fmt_naira(100) == "₦1.00"
    assert fmt_naira(123456789) == "₦1,234,567.89"
    assert fmt_naira(5_000_000) == "₦50,000.00"
    assert fmt_naira(-2550) == "-₦25.50"


@given(st.integers(min_value=0, max_value=10**15))
def test_fmt_naira_against_decimal_oracle(kobo):
    rendered = fmt_naira(kobo)
    # oracle: reconstruct the integer from the rendered pieces
    digits = rendered.replace("₦", "").replace(",", "")
    whole, frac = digits.split(".")
    assert len(frac) == 2
    assert int(whole) * 100 + int(frac) == kobo


# -- TIN minting ---------------------------------------------------------------


def _luhn_oracle(digits: str) -> int:
    # independent route: standard doubling from the rightmost payload digit
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = int(ch)
        if i % 2 == 0:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return (10 - total % 10) % 10


@given(st.integers(min_value=0, max_value=10**8 - 1))
def test_luhn_matches_independent_oracle(counter):
    payload = f"{counter:08d}"
    assert luhn_check_digit(payload) == _luhn_oracle(payload)


@given(st.integers(min_value=0, max_value=10**8 - 1),
       st.integers(min_value=0, max_value=7),
       st.integers(min_value=1, max_value=9))
def test_luhn_catches_single_digit_mutation(counter, pos, bump):
    tin = mint_tin(counter)
    digits = tin[2:]
    mutated = digits[:pos] + str((int(digits[pos]) + bump) % 10) + digits[pos + 1:]
    assert validate_tin("ED" + mutated) is False


def test_mint_tin_shape_and_validation():
    tin = mint_tin(12345)
    assert re.fullmatch(r"ED\d{9}", tin)
    assert validate_tin(tin)
    assert display_tin(tin) == f"ED-{tin[2:10]}-{tin[10]}"
    assert normalize_tin(display_tin(tin).lower()) == tin


def test_mint_tin_capacity_and_exhaustion():
    assert mint_tin(10**8 - 1).startswith("ED99999999")
    with pytest.raises(CounterExhausted):
        mint_tin(10**8)
    with pytest.raises(CounterExhausted):
        mint_tin(-1)


def test_validate_tin_rejects_garbage():
    assert not validate_tin("")
    assert not validate_tin("ED1234")
    assert not validate_tin("XX123456785")
    assert not validate_tin("ED12345678X")


@given(st.integers(min_value=0, max_value=10**8 - 1),
       st.integers(min_value=0, max_value=10**8 - 1))
def test_tins_unique_per_counter(a, b):
    if a != b:
        assert mint_tin(a) != mint_tin(b)


# -- reference code encoding ---------------------------------------------------


def _crockford_oracle(data: bytes) -> str:
    # independent route: big-integer base conversion
    value = int.from_bytes(data, "big")
    out = []
    for _ in range(len(data) * 8 // 5):
        out.append(CROCKFORD_ALPHABET[value & 0x1F])
        value >>= 5
    return "".join(reversed(out))


@given(st.binary(min_size=10, max_size=10))
def test_crockford_matches_big_integer_oracle(data):
    assert crockford_encode(data) == _crockford_oracle(data)


@given(st.binary(min_size=10, max_size=10))
def test_code_rendering_round_trip(data):
    code = crockford_encode(data)
    assert len(code) == 16
    rendered = render_code(code)
    assert CODE_RE.fullmatch(rendered)
    assert normalize_code(rendered) == code
    assert normalize_code(rendered.lower().replace("-", " ")) == code


def test_normalize_code_confusable_letters():
    assert normalize_code("o1l-i0o") == "011100"
    assert normalize_code("ABCD-EFGH-JKMN-PQRS") == "ABCDEFGHJKMNPQRS"


def test_alphabet_has_no_confusables():
    assert set("ILOU").isdisjoint(set(CROCKFORD_ALPHABET))
    assert len(CROCKFORD_ALPHABET) == 32


# -- passwords -------------------------------------------------------------------


def test_password_hash_round_trip():
    digest = hash_password("s3cret!")
    assert digest.startswith("pbkdf2_sha256$")
    assert verify_password("s3cret!", digest)
    assert not verify_password("s3cret", digest)
    assert not verify_password("", digest)


def test_password_hashes_salted():
    assert hash_password("same") != hash_password("same")


def test_empty_password_rejected():
    with pytest.raises(domain.EmptyPassword):
        hash_password("")


def test_default_password_shape():
    pw = gen_default_password()
    assert len(pw) == 10 and pw.isalnum()


def test_verify_rejects_malformed_digest():
    assert not verify_password("x", "not-a-digest")
    assert not verify_password("x", "")


# -- enums and status machines ----------------------------------------------------


def test_tier_labels_round_trip():
    for tier in Tier:
        assert Tier.from_label(tier.label) is tier
    assert Tier.EXEMPT.label == "Exempt"
    assert [int(t) for t in Tier] == [0, 1, 2, 3, 4, 5]


def test_code_status_machine_exhaustive():
    # oracle: the full legal-transition matrix, stated directly
    legal = {
        (CodeStatus.ISSUED, CodeStatus.REDEEMED),
        (CodeStatus.ISSUED, CodeStatus.EXPIRED),
        (CodeStatus.ISSUED, CodeStatus.VOIDED),
    }
    for current in CodeStatus:
        for new in CodeStatus:
            if (current, new) in legal:
                assert transition_code_status(current, new) is new
            else:
                with pytest.raises(InvalidTransition):
                    transition_code_status(current, new)


def test_terminal_statuses():
    assert set(TERMINAL_CODE_STATUSES) == {
        CodeStatus.REDEEMED, CodeStatus.EXPIRED, CodeStatus.VOIDED}


# -- time and periods ----------------------------------------------------------------


def test_iso_round_trip():
    now = utcnow()
    assert parse_iso(iso(now)) == now
    assert now.tzinfo is not None


def test_valid_period():
    assert valid_period("2026-01")
    assert valid_period("1999-12")
    assert not valid_period("2026-13")
    assert not valid_period("2026-00")
    assert not valid_period("202601")
    assert not valid_period("2026-1")
    assert not valid_period("")
