"""BIRGENT, the background agent: issues single-use payment reference codes,
verifies them at the bank, blocks amount alteration, and flags fraud with a
deterministic rule layer backed by a small trainable neural scorer.

The agent never talks to users; it watches the pool and decides.
"""

from __future__ import annotations

import hmac
import hashlib
import json
import secrets
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path

import numpy as np

from . import messages
from .domain import (
    Kobo,
    ReferenceCode,
    RevsysError,
    Role,
    Tier,
    CodeStatus,
    crockford_encode,
    iso,
    normalize_code,
    utcnow,
)
from .pool import AGENT_ACTOR, DataPool, DuplicateCode, EventKind

N_FEATURES = 6
N_HIDDEN = 8
LAYER_SIZES = (N_FEATURES, N_HIDDEN, 1)

CODE_TTL_HOURS = 72
ALERT_THRESHOLD = 0.8

# Normalizers for the feature vector; fixed so stored models stay comparable.
CODE_AGE_FULL_SCALE_HOURS = 720.0
LOOKUP_FULL_SCALE = 5.0


class UnknownTin(RevsysError):
    code = "UnknownTin"


class NonPositiveAmount(RevsysError):
    code = "NonPositiveAmount"


class CollisionRetryExhausted(RevsysError):
    code = "CollisionRetryExhausted"


class ModelUnloaded(RevsysError):
    code = "ModelUnloaded"


class DimensionMismatch(RevsysError):
    code = "DimensionMismatch"


class DegenerateData(RevsysError):
    code = "DegenerateData"


class NonFiniteLoss(RevsysError):
    code = "NonFiniteLoss"


class MissingContext(RevsysError):
    code = "MissingContext"


# --------------------------------------------------------------------------
# Features
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureVector:
    amount_deviation: float  # |paid - assessed| / assessed, clamped to [0, 1]
    code_age_norm: float  # hours since issue / 720, clamped
    prior_lookup_count_norm: float
    tier_ordinal_norm: float
    failed_login_rate_norm: float
    channel_mismatch: float  # {0, 1}

    def to_array(self) -> np.ndarray:
        return np.array([
            self.amount_deviation,
            self.code_age_norm,
            self.prior_lookup_count_norm,
            self.tier_ordinal_norm,
            self.failed_login_rate_norm,
            self.channel_mismatch,
        ], dtype=np.float64)

    def to_list(self) -> list[float]:
        return [float(v) for v in self.to_array()]


FEATURE_NAMES = (
    "amount_deviation",
    "code_age_norm",
    "prior_lookup_count_norm",
    "tier_ordinal_norm",
    "failed_login_rate_norm",
    "channel_mismatch",
)


@dataclass(frozen=True)
class TxnContext:
    """Everything featurize needs, resolved from the pool ahead of time."""

    paid_kobo: Kobo
    assessed_kobo: Kobo | None
    issued_at: datetime | None
    now: datetime
    prior_lookups: int | None
    tier: Tier | None
    login_ok: int
    login_fail: int
    presenter_matches_owner: bool


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def featurize(context: TxnContext) -> FeatureVector:
    """Pure mapping from a resolved transaction context to the 6 features."""
    if context.assessed_kobo is None or context.issued_at is None \
            or context.prior_lookups is None:
        raise MissingContext("transaction context incomplete")
    if context.assessed_kobo <= 0:
        raise MissingContext("assessed amount must be positive")
    deviation = abs(context.paid_kobo - context.assessed_kobo) / context.assessed_kobo
    age_hours = (context.now - context.issued_at).total_seconds() / 3600.0
    attempts = context.login_ok + context.login_fail
    return FeatureVector(
        amount_deviation=_clamp01(deviation),
        code_age_norm=_clamp01(age_hours / CODE_AGE_FULL_SCALE_HOURS),
        prior_lookup_count_norm=_clamp01(context.prior_lookups / LOOKUP_FULL_SCALE),
        tier_ordinal_norm=(int(context.tier) if context.tier is not None else 0) / 5.0,
        failed_login_rate_norm=(context.login_fail / attempts) if attempts else 0.0,
        channel_mismatch=0.0 if context.presenter_matches_owner else 1.0,
    )


# --------------------------------------------------------------------------
# The neural scorer: 6 -> 8 -> 1, logistic sigmoid throughout
# --------------------------------------------------------------------------


@dataclass
class AnnModel:
    w1: np.ndarray  # (8, 6)
    b1: np.ndarray  # (8,)
    w2: np.ndarray  # (1, 8)
    b2: np.ndarray  # (1,)
    version: int = 0

    def check(self) -> None:
        shapes = (self.w1.shape, self.b1.shape, self.w2.shape, self.b2.shape)
        expected = ((N_HIDDEN, N_FEATURES), (N_HIDDEN,), (1, N_HIDDEN), (1,))
        if shapes != expected:
            raise DimensionMismatch(f"model shapes {shapes} != {expected}")
        for arr in (self.w1, self.b1, self.w2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise DimensionMismatch("model parameters must be finite")

    def params(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


def zero_model() -> AnnModel:
    """All-zero parameters: scores everything 0.5 (untrained baseline)."""
    return AnnModel(
        w1=np.zeros((N_HIDDEN, N_FEATURES)),
        b1=np.zeros(N_HIDDEN),
        w2=np.zeros((1, N_HIDDEN)),
        b2=np.zeros(1),
        version=0,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def ann_forward(model: AnnModel, x: FeatureVector | np.ndarray) -> float:
    """Deterministic score in (0, 1): sigma(W2·sigma(W1·x + b1) + b2)."""
    model.check()
    vec = x.to_array() if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    if vec.shape != (N_FEATURES,):
        raise DimensionMismatch(f"feature vector shape {vec.shape} != ({N_FEATURES},)")
    hidden = _sigmoid(model.w1 @ vec + model.b1)
    return float(_sigmoid(model.w2 @ hidden + model.b2)[0])


def forward_batch(model: AnnModel, X: np.ndarray) -> np.ndarray:
    hidden = _sigmoid(X @ model.w1.T + model.b1)
    return _sigmoid(hidden @ model.w2.T + model.b2)[:, 0]


def loss_and_grads(model: AnnModel, X: np.ndarray, y: np.ndarray
                   ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean binary cross-entropy and its exact gradients (backprop)."""
    n = X.shape[0]
    hidden = _sigmoid(X @ model.w1.T + model.b1)  # (n, 8)
    p = _sigmoid(hidden @ model.w2.T + model.b2)[:, 0]  # (n,)
    p_safe = np.clip(p, 1e-12, 1.0 - 1e-12)
    loss = float(-np.mean(y * np.log(p_safe) + (1.0 - y) * np.log(1.0 - p_safe)))

    dz2 = (p - y) / n  # (n,)  sigmoid+BCE cancels to this
    grad_w2 = dz2[None, :] @ hidden  # (1, 8)
    grad_b2 = np.array([dz2.sum()])
    dh = np.outer(dz2, model.w2[0])  # (n, 8)
    dz1 = dh * hidden * (1.0 - hidden)
    grad_w1 = dz1.T @ X  # (8, 6)
    grad_b1 = dz1.sum(axis=0)
    return loss, {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


@dataclass(frozen=True)
class LabeledExample:
    features: FeatureVector
    label: int  # 0 legitimate, 1 fraudulent


def examples_to_arrays(data: list[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([ex.features.to_array() for ex in data])
    y = np.array([float(ex.label) for ex in data])
    return X, y


def ann_train(data: list[LabeledExample], epochs: int = 500,
              learning_rate: float = 0.1, seed: int = 0,
              base_version: int = 0) -> AnnModel:
    """Full-batch gradient descent on mean BCE; bit-deterministic given seed."""
    if not data:
        raise DegenerateData("no training examples")
    labels = {ex.label for ex in data}
    if labels != {0, 1}:
        raise DegenerateData(f"need both classes, got labels {sorted(labels)}")
    X, y = examples_to_arrays(data)

    rng = np.random.default_rng(seed)
    model = AnnModel(
        w1=rng.normal(0.0, 1.0 / np.sqrt(N_FEATURES), size=(N_HIDDEN, N_FEATURES)),
        b1=np.zeros(N_HIDDEN),
        w2=rng.normal(0.0, 1.0 / np.sqrt(N_HIDDEN), size=(1, N_HIDDEN)),
        b2=np.zeros(1),
        version=base_version + 1,
    )
    for _ in range(epochs):
        loss, grads = loss_and_grads(model, X, y)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"loss diverged: {loss}")
        model.w1 -= learning_rate * grads["w1"]
        model.b1 -= learning_rate * grads["b1"]
        model.w2 -= learning_rate * grads["w2"]
        model.b2 -= learning_rate * grads["b2"]
    return model


def save_model(model: AnnModel, path: str | Path) -> None:
    doc = {
        "layer_sizes": list(LAYER_SIZES),
        "w1": model.w1.tolist(),  # row-major
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2.tolist(),
        "version": model.version,
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path: str | Path) -> AnnModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("layer_sizes") != list(LAYER_SIZES):
        raise DimensionMismatch(f"model file layer sizes {doc.get('layer_sizes')}")
    model = AnnModel(
        w1=np.array(doc["w1"], dtype=np.float64),
        b1=np.array(doc["b1"], dtype=np.float64),
        w2=np.array(doc["w2"], dtype=np.float64),
        b2=np.array(doc["b2"], dtype=np.float64),
        version=int(doc["version"]),
    )
    model.check()
    return model


def evaluate(model: AnnModel, data: list[LabeledExample],
             threshold: float = ALERT_THRESHOLD) -> dict[str, float]:
    """Precision / recall at the threshold, plus tie-aware AUC."""
    X, y = examples_to_arrays(data)
    scores = forward_batch(model, X)
    flagged = scores >= threshold
    tp = float(np.sum(flagged & (y == 1)))
    fp = float(np.sum(flagged & (y == 0)))
    fn = float(np.sum(~flagged & (y == 1)))
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    return {
        "precision": precision,
        "recall": recall,
        "auc": auc_score(scores, y),
        "n": float(len(data)),
        "n_fraud": float(np.sum(y == 1)),
    }


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based AUC; ties get average ranks, so a constant scorer is 0.5."""
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0  # 1-based average rank
        i = j
    rank_sum = ranks[pos].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# --------------------------------------------------------------------------
# Verification results and fraud assessment
# --------------------------------------------------------------------------


class VerifyOutcome(str, Enum):
    VALID = "Valid"
    NOT_FOUND = "NotFound"
    STOLEN = "Stolen"
    REPLAYED = "Replayed"
    EXPIRED = "Expired"


@dataclass(frozen=True)
class VerificationResult:
    """NotFound carries nothing at all; near-miss probes are indistinguishable."""

    outcome: VerifyOutcome
    owner_name: str | None = None
    business_name: str | None = None
    assessed_kobo: Kobo | None = None
    tin: str | None = None


NOT_FOUND_RESULT = VerificationResult(outcome=VerifyOutcome.NOT_FOUND)


class RuleHit(str, Enum):
    CODE_NOT_FOUND = "CodeNotFound"
    STOLEN_CODE = "StolenCode"
    REPLAY = "Replay"
    AMOUNT_MISMATCH = "AmountMismatch"
    ALTERATION_ATTEMPT = "AlterationAttempt"
    EXPIRED_CODE = "ExpiredCode"


class Verdict(str, Enum):
    CLEAR = "Clear"
    FRAUD_ALERT = "FraudAlert"


@dataclass(frozen=True)
class FraudAssessment:
    rule_hits: frozenset[RuleHit]
    ann_score: float
    verdict: Verdict
    display_message: str
    features: FeatureVector | None = None

    def rule_labels(self) -> list[str]:
        return sorted(hit.value for hit in self.rule_hits)


@dataclass(frozen=True)
class GuardDecision:
    allowed: bool
    message: str | None = None


# --------------------------------------------------------------------------
# The agent
# --------------------------------------------------------------------------


class Birgent:
    """Single logical consumer of the pool; scoring is pure given a model."""

    def __init__(self, pool: DataPool, secret: bytes,
                 model: AnnModel | None = None,
                 alert_threshold: float = ALERT_THRESHOLD,
                 code_ttl_hours: int = CODE_TTL_HOURS):
        self.pool = pool
        self._secret = secret
        self.model = model if model is not None else zero_model()
        self.alert_threshold = alert_threshold
        self.code_ttl = timedelta(hours=code_ttl_hours)

    def replace_model(self, model: AnnModel) -> None:
        model.check()
        self.model = model  # atomic rebind: readers see old or new, never a mix

    # -- code issue / verify --------------------------------------------------

    def issue_reference_code(self, owner_tin: str, assessed_kobo: Kobo,
                             now: datetime | None = None) -> ReferenceCode:
        """Mint an unguessable single-use code bound to TIN and amount."""
        now = now or utcnow()
        if self.pool.taxpayer_by_tin(owner_tin) is None:
            raise UnknownTin(f"no taxpayer with TIN {owner_tin}")
        if assessed_kobo <= 0:
            raise NonPositiveAmount("assessed amount must be positive")
        for _ in range(3):
            nonce = secrets.token_bytes(8)
            mac = hmac.new(
                self._secret,
                b"|".join([owner_tin.encode(), str(assessed_kobo).encode(),
                           iso(now).encode(), nonce]),
                hashlib.sha256,
            ).digest()
            rec = ReferenceCode(
                code=crockford_encode(mac[:10]),
                owner_tin=owner_tin,
                assessed_kobo=assessed_kobo,
                issued_at=now,
                expires_at=now + self.code_ttl,
            )
            try:
                self.pool.issue_code(rec, actor=AGENT_ACTOR)
                return rec
            except DuplicateCode:
                continue
        raise CollisionRetryExhausted("three fresh nonces collided; check the pool")

    def verify_reference_code(self, code: str, presenter_tin: str | None = None,
                              now: datetime | None = None) -> VerificationResult:
        """Lookup by stored record; every probe lands in the audit log."""
        now = now or utcnow()
        raw = normalize_code(code)
        rec = self.pool.code(raw)
        outcome: VerifyOutcome
        expired_transition = False
        if rec is None:
            outcome = VerifyOutcome.NOT_FOUND
        elif presenter_tin is not None and presenter_tin != rec.owner_tin:
            outcome = VerifyOutcome.STOLEN
        elif rec.status is CodeStatus.EXPIRED:
            outcome = VerifyOutcome.EXPIRED
        elif rec.status is not CodeStatus.ISSUED:
            outcome = VerifyOutcome.REPLAYED
        elif now > rec.expires_at:
            outcome = VerifyOutcome.EXPIRED
            expired_transition = True
        else:
            outcome = VerifyOutcome.VALID

        payload = {
            "code": raw,
            "presenter": presenter_tin or "",
            "outcome": outcome.value,
        }
        if expired_transition:
            payload["expired_transition"] = "true"
        self.pool.append_event(AGENT_ACTOR, EventKind.CODE_LOOKUP, payload)

        if outcome is VerifyOutcome.NOT_FOUND:
            return NOT_FOUND_RESULT
        owner = self.pool.taxpayer_by_tin(rec.owner_tin)
        owner_name = owner.full_name if owner else ""
        if outcome is VerifyOutcome.STOLEN:
            # the paper-mandated disclosure: only the original owner's name
            return VerificationResult(outcome=outcome, owner_name=owner_name)
        if outcome in (VerifyOutcome.REPLAYED, VerifyOutcome.EXPIRED):
            return VerificationResult(outcome=outcome)
        return VerificationResult(
            outcome=VerifyOutcome.VALID,
            owner_name=owner_name,
            business_name=self.pool.business_names_for_tin(rec.owner_tin),
            assessed_kobo=rec.assessed_kobo,
            tin=rec.owner_tin,
        )

    # -- fraud assessment ------------------------------------------------------

    def _owner_tier(self, tin: str) -> Tier | None:
        owner = self.pool.taxpayer_by_tin(tin)
        if owner is None:
            return None
        tiers = [b.tier for b in self.pool.businesses_of(owner.taxpayer_id)
                 if b.tier is not None]
        return max(tiers) if tiers else None

    def assess_transaction(self, code: str, presenter_tin: str,
                           cash_amount_kobo: Kobo, now: datetime | None = None,
                           claimed_assessed_kobo: Kobo | None = None) -> FraudAssessment:
        """Rule layer first, then the neural score; any rule hit is an alert."""
        if self.model is None:
            raise ModelUnloaded("no scoring model loaded")
        now = now or utcnow()
        raw = normalize_code(code)
        prior_lookups = self.pool.lookup_count(raw)
        result = self.verify_reference_code(raw, presenter_tin=presenter_tin, now=now)

        rule_hits: set[RuleHit] = set()
        if result.outcome is VerifyOutcome.NOT_FOUND:
            rule_hits.add(RuleHit.CODE_NOT_FOUND)
        elif result.outcome is VerifyOutcome.STOLEN:
            rule_hits.add(RuleHit.STOLEN_CODE)
        elif result.outcome is VerifyOutcome.REPLAYED:
            rule_hits.add(RuleHit.REPLAY)
        elif result.outcome is VerifyOutcome.EXPIRED:
            rule_hits.add(RuleHit.EXPIRED_CODE)

        rec = self.pool.code(raw)
        if rec is not None:
            if cash_amount_kobo != rec.assessed_kobo:
                rule_hits.add(RuleHit.AMOUNT_MISMATCH)  # under-payment = suppression
            if claimed_assessed_kobo is not None and claimed_assessed_kobo != rec.assessed_kobo:
                rule_hits.add(RuleHit.ALTERATION_ATTEMPT)

        features: FeatureVector | None = None
        ann_score = 0.0
        if rec is not None:
            ok, fail = self.pool.login_stats(presenter_tin)
            features = featurize(TxnContext(
                paid_kobo=cash_amount_kobo,
                assessed_kobo=rec.assessed_kobo,
                issued_at=rec.issued_at,
                now=now,
                prior_lookups=prior_lookups,
                tier=self._owner_tier(rec.owner_tin),
                login_ok=ok,
                login_fail=fail,
                presenter_matches_owner=(presenter_tin == rec.owner_tin),
            ))
            ann_score = ann_forward(self.model, features)

        fraudulent = bool(rule_hits) or ann_score >= self.alert_threshold
        verdict = Verdict.FRAUD_ALERT if fraudulent else Verdict.CLEAR
        assessment = FraudAssessment(
            rule_hits=frozenset(rule_hits),
            ann_score=ann_score,
            verdict=verdict,
            display_message=messages.FRAUD_ALERT if fraudulent else messages.TRANSACTION_OK,
            features=features,
        )
        if fraudulent:
            payload = {
                "code": raw,
                "presenter": presenter_tin,
                "cash_kobo": str(cash_amount_kobo),
                "rules": ",".join(assessment.rule_labels()),
                "ann_score": f"{ann_score:.6f}",
            }
            # a confirmed theft kills the code; soft (score-only) alerts do not
            if RuleHit.STOLEN_CODE in rule_hits and rec is not None \
                    and rec.status is CodeStatus.ISSUED:
                payload["voided"] = "true"
            self.pool.append_event(AGENT_ACTOR, EventKind.FRAUD_ALERT, payload)
        return assessment

    # -- alteration guard -------------------------------------------------------

    def guard_amount_write(self, actor_role: Role, field: str, attempted_kobo: Kobo,
                           actor: str = "") -> GuardDecision:
        """Only the BIR reviewer role may touch an assessed amount."""
        if actor_role is Role.BIR_STAFF:
            return GuardDecision(allowed=True)
        self.pool.append_event(actor or AGENT_ACTOR, EventKind.ALTERATION_BLOCKED, {
            "role": actor_role.value,
            "field": field,
            "attempted_kobo": str(attempted_kobo),
        })
        return GuardDecision(allowed=False, message=messages.AMOUNT_BLOCKED)
