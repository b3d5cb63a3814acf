"""Seeded payment-stream simulator: drives the live HTTP API with a mix of
honest and planted fraudulent behaviors, and writes the labeled feature file
the scorer trains on plus a ground-truth record of what was planted.

Everything downstream of the seed is deterministic: actor behaviors, profit
draws, victim picks, and planted login failures all come from one generator.
"""

from __future__ import annotations

import asyncio
import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import httpx
import numpy as np

from .domain import CROCKFORD_ALPHABET, RevsysError

BEHAVIORS = ("honest", "suppression", "stolen_code", "replay", "fabricated_code")

GROUND_TRUTH_HEADER = ["index", "behavior", "label", "amount_kobo",
                       "assessed_kobo", "detected", "rules"]
LABELED_HEADER = ["f1", "f2", "f3", "f4", "f5", "f6", "label"]

_TIN_RE = re.compile(r"ED-\d{8}-\d")
_PASSWORD_RE = re.compile(r"default password (\S+);")

# Monthly net-profit draw ranges, one per target tier (kobo).
_PROFIT_RANGES = [
    (100_000, 5_000_000),
    (5_000_001, 20_000_000),
    (20_000_001, 100_000_000),
    (100_000_001, 500_000_000),
    (500_000_001, 2_000_000_000),
]


class ServiceUnreachable(RevsysError):
    code = "ServiceUnreachable"


class BadMix(RevsysError):
    code = "BadMix"


@dataclass(frozen=True)
class SimulationSpec:
    n_taxpayers: int = 20
    months: int = 2
    fraud_mix: Mapping[str, float] = field(
        default_factory=lambda: {"honest": 1.0})
    seed: int = 0

    def __post_init__(self):
        if self.n_taxpayers < 1:
            raise BadMix("need at least one taxpayer")
        if self.months < 1:
            raise BadMix("need at least one month of financials")
        unknown = set(self.fraud_mix) - set(BEHAVIORS)
        if unknown:
            raise BadMix(f"unknown behaviors: {sorted(unknown)}")
        if any(v < 0 for v in self.fraud_mix.values()):
            raise BadMix("behavior fractions must be non-negative")
        total = sum(self.fraud_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise BadMix(f"behavior fractions sum to {total}, not 1")


@dataclass
class TxnRow:
    index: int
    behavior: str
    label: int  # 1 when this transaction was planted as fraudulent
    amount_kobo: int
    assessed_kobo: int
    detected: int
    rules: str  # "|"-joined rule names from the service response
    features: list[float] | None  # None when the agent had no code context


@dataclass
class SimulationResult:
    spec: SimulationSpec
    counts: dict[str, int]
    rows: list[TxnRow]
    alerts: int

    def ground_truth_csv(self) -> str:
        """Deterministic per seed: no codes, no timestamps, no feature floats."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(GROUND_TRUTH_HEADER)
        for row in self.rows:
            writer.writerow([row.index, row.behavior, row.label, row.amount_kobo,
                             row.assessed_kobo, row.detected, row.rules])
        return buf.getvalue()

    def labeled_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(LABELED_HEADER)
        for row in self.rows:
            if row.features is None:
                continue  # no feature context (fabricated codes); rules own these
            writer.writerow([f"{v:.10g}" for v in row.features] + [row.label])
        return buf.getvalue()


def assign_behaviors(spec: SimulationSpec, rng: np.random.Generator) -> list[str]:
    """Largest-remainder apportionment of n actors over the mix, then shuffle."""
    fracs = [(name, spec.fraud_mix.get(name, 0.0)) for name in BEHAVIORS]
    exact = [(name, frac * spec.n_taxpayers) for name, frac in fracs]
    counts = {name: int(x) for name, x in exact}
    short = spec.n_taxpayers - sum(counts.values())
    by_remainder = sorted(exact, key=lambda kv: (kv[1] - int(kv[1]), kv[0]),
                          reverse=True)
    for name, _ in by_remainder[:short]:
        counts[name] += 1
    out: list[str] = []
    for name in BEHAVIORS:
        out.extend([name] * counts[name])
    rng.shuffle(out)
    return out


def make_capture_csv(spec: SimulationSpec, rng: np.random.Generator) -> str:
    """One business per actor; profits drawn to spread actors across tiers."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["full_name", "email", "phone", "business_name", "location",
                     "sector", "period", "revenue_kobo", "expenses_kobo"])
    for i in range(spec.n_taxpayers):
        low, high = _PROFIT_RANGES[int(rng.integers(0, len(_PROFIT_RANGES)))]
        net = int(rng.integers(low, high + 1))
        expenses = int(rng.integers(100_000, 10_000_001))
        for month in range(1, spec.months + 1):
            writer.writerow([
                f"Sim Person {spec.seed:06d}-{i:04d}",
                f"sim{spec.seed}_{i}@example.test",
                f"080{i:08d}",
                f"Sim Business {spec.seed:06d}-{i:04d}",
                "Benin City",
                "Retail",
                f"2026-{month:02d}",
                net + expenses,
                expenses,
            ])
    return buf.getvalue()


def read_spool_file(path: str | Path) -> list[dict]:
    """Reader for the file-spool notifier's JSONL output."""
    out = []
    p = Path(path)
    if not p.exists():
        return out
    for line in p.read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


def _credentials_from_spool(spool: list[dict], email: str) -> tuple[str, str]:
    for msg in reversed(spool):
        if msg.get("to") == email:
            tin_match = _TIN_RE.search(msg.get("body", ""))
            pw_match = _PASSWORD_RE.search(msg.get("body", ""))
            if tin_match and pw_match:
                return tin_match.group(0), pw_match.group(1)
    raise ServiceUnreachable(f"no TIN notification spooled for {email}")


@dataclass
class _Actor:
    index: int
    behavior: str
    email: str
    taxpayer_id: str = ""
    tin: str = ""
    password: str = ""
    token: str = ""
    assessed_kobo: int = 0
    code: str = ""
    redeemed: bool = False


class _Driver:
    """One simulation run over a live client; sequential, so draw order is fixed."""

    def __init__(self, client: httpx.AsyncClient, spec: SimulationSpec,
                 admin_username: str, admin_password: str,
                 spool_reader: Callable[[], list[dict]]):
        self.client = client
        self.spec = spec
        self.admin_username = admin_username
        self.admin_password = admin_password
        self.spool_reader = spool_reader
        self.rng = np.random.default_rng(spec.seed)
        self.rows: list[TxnRow] = []
        self.alerts = 0

    async def _post(self, path: str, token: str = "", **kwargs) -> httpx.Response:
        headers = kwargs.pop("headers", {})
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            return await self.client.post(path, headers=headers, **kwargs)
        except httpx.TransportError as exc:
            raise ServiceUnreachable(str(exc))

    async def _staff_session(self, username: str, password: str, role: str,
                             admin_token: str) -> str:
        r = await self._post("/api/admin/staff", token=admin_token, json={
            "username": username, "password": password, "role": role})
        if r.status_code not in (200, 400):  # 400 = DuplicateUsername, reuse it
            raise ServiceUnreachable(f"staff create failed: {r.text}")
        r = await self._post("/api/auth/staff-login",
                             json={"username": username, "password": password})
        if r.status_code != 200:
            raise ServiceUnreachable(f"staff login failed: {r.text}")
        return r.json()["token"]

    async def run(self) -> SimulationResult:
        spec = self.spec
        try:
            health = await self.client.get("/health")
        except httpx.TransportError as exc:
            raise ServiceUnreachable(str(exc))
        if health.status_code != 200:
            raise ServiceUnreachable(f"health check: {health.status_code}")

        r = await self._post("/api/auth/staff-login", json={
            "username": self.admin_username, "password": self.admin_password})
        if r.status_code != 200:
            raise ServiceUnreachable("admin login rejected")
        admin = r.json()["token"]
        bir = await self._staff_session(f"sim_bir_{spec.seed}", "sim-bir-pass",
                                        "BirStaff", admin)
        bank = await self._staff_session(f"sim_bank_{spec.seed}", "sim-bank-pass",
                                         "BankStaff", admin)

        behaviors = assign_behaviors(spec, self.rng)
        actors = [_Actor(index=i, behavior=behaviors[i],
                         email=f"sim{spec.seed}_{i}@example.test")
                  for i in range(spec.n_taxpayers)]

        # register everyone, issue TINs, pull credentials off the spool
        r = await self._post("/api/bir/taxpayers", token=bir,
                             content=make_capture_csv(spec, self.rng),
                             headers={"content-type": "text/csv"})
        if r.status_code != 200 or r.json()["rejected_count"]:
            raise ServiceUnreachable(f"capture failed: {r.text}")
        stored = r.json()["stored"]
        for actor in actors:
            actor.taxpayer_id = stored[actor.index * spec.months]["taxpayer_id"]
            r = await self._post(f"/api/admin/tin/{actor.taxpayer_id}", token=admin)
            if r.status_code != 200:
                raise ServiceUnreachable(
                    f"TIN issuance failed for {actor.taxpayer_id} ({r.text}); "
                    "the simulator needs a fresh population per seed")
        spool = self.spool_reader()
        for actor in actors:
            actor.tin, default_pw = _credentials_from_spool(spool, actor.email)
            r = await self._post("/api/auth/taxpayer-login", json={
                "tin": actor.tin, "password": default_pw})
            if r.status_code != 200:
                raise ServiceUnreachable(f"default login failed: {r.text}")
            token = r.json()["token"]
            actor.password = f"sim-pw-{spec.seed}-{actor.index}"
            r = await self._post("/api/taxpayer/password", token=token, json={
                "old": default_pw, "new": actor.password, "confirm": actor.password})
            if r.status_code != 200:
                raise ServiceUnreachable(f"password change failed: {r.text}")
            actor.token = token

        # planted signal: fraud actors fumble logins before acting
        for actor in actors:
            if actor.behavior in ("suppression", "stolen_code", "replay"):
                for _ in range(int(self.rng.integers(2, 5))):
                    await self._post("/api/auth/taxpayer-login", json={
                        "tin": actor.tin, "password": "wrong-guess"})

        r = await self._post("/api/bir/mine", token=bir)
        if r.status_code != 200:
            raise ServiceUnreachable(f"mining failed: {r.text}")

        for actor in actors:
            if actor.behavior == "fabricated_code":
                continue  # they never request a slip; they invent codes
            r = await self._post("/api/taxpayer/reference-code", token=actor.token)
            if r.status_code != 200:
                raise ServiceUnreachable(f"slip request failed: {r.text}")
            slip = r.json()
            actor.code = slip["reference_code"]
            actor.assessed_kobo = slip["tax_kobo"]

        async def pay(code: str, presenter_tin: str, cash: int) -> httpx.Response:
            return await self._post("/api/bank/payment", token=bank, json={
                "code": code, "presenter_tin": presenter_tin,
                "cash_amount_kobo": cash})

        def record(response: httpx.Response, actor: _Actor, label: int,
                   cash: int) -> None:
            body = response.json()
            detected = 1 if response.status_code == 409 and body.get("error") == "FraudDetected" else 0
            self.alerts += detected
            self.rows.append(TxnRow(
                index=len(self.rows),
                behavior=actor.behavior,
                label=label,
                amount_kobo=cash,
                assessed_kobo=actor.assessed_kobo,
                detected=detected,
                rules="|".join(body.get("rule_hits", [])),
                features=body.get("features"),
            ))

        # primary payment attempts, in actor order
        for actor in actors:
            if actor.behavior == "honest":
                r = await pay(actor.code, actor.tin, actor.assessed_kobo)
                record(r, actor, 0, actor.assessed_kobo)
                actor.redeemed = r.status_code == 200
            elif actor.behavior == "suppression":
                # teller pockets the difference: 0.3x..0.8x lands in the till
                cash = int(actor.assessed_kobo * self.rng.uniform(0.3, 0.8))
                r = await pay(actor.code, actor.tin, cash)
                record(r, actor, 1, cash)
            elif actor.behavior == "replay":
                r = await pay(actor.code, actor.tin, actor.assessed_kobo)
                record(r, actor, 0, actor.assessed_kobo)
                actor.redeemed = r.status_code == 200
                r = await pay(actor.code, actor.tin, actor.assessed_kobo)
                record(r, actor, 1, actor.assessed_kobo)
            elif actor.behavior == "fabricated_code":
                fake = "".join(CROCKFORD_ALPHABET[int(k)] for k in
                               self.rng.integers(0, len(CROCKFORD_ALPHABET), size=16))
                cash = int(self.rng.integers(100_000, 50_000_000))
                actor.assessed_kobo = 0
                r = await pay(fake, actor.tin, cash)
                record(r, actor, 1, cash)

        # thieves present someone else's code under their own TIN
        thieves = [a for a in actors if a.behavior == "stolen_code"]
        victims = [a for a in actors if a.redeemed] or \
                  [a for a in actors if a.code and a.behavior == "stolen_code"]
        for thief in thieves:
            pool = [v for v in victims if v.index != thief.index]
            if not pool:
                continue  # nobody to rob: degenerate all-thief mix with one actor
            victim = pool[int(self.rng.integers(0, len(pool)))]
            thief.assessed_kobo = victim.assessed_kobo
            r = await pay(victim.code, thief.tin, victim.assessed_kobo)
            record(r, thief, 1, victim.assessed_kobo)

        counts = {name: behaviors.count(name) for name in BEHAVIORS}
        return SimulationResult(spec=spec, counts=counts, rows=self.rows,
                                alerts=self.alerts)


def run_simulation(spec: SimulationSpec, *,
                   admin_username: str, admin_password: str,
                   spool_reader: Callable[[], list[dict]],
                   base_url: str = "http://sim.local",
                   transport: httpx.AsyncBaseTransport | None = None,
                   ground_truth_path: str | Path | None = None,
                   labeled_path: str | Path | None = None) -> SimulationResult:
    """Run one seeded simulation against a live service and write its files."""

    async def _go() -> SimulationResult:
        async with httpx.AsyncClient(transport=transport, base_url=base_url,
                                     timeout=60.0) as client:
            driver = _Driver(client, spec, admin_username, admin_password,
                             spool_reader)
            return await driver.run()

    result = asyncio.run(_go())
    if ground_truth_path is not None:
        Path(ground_truth_path).write_text(result.ground_truth_csv(), encoding="utf-8")
    if labeled_path is not None:
        Path(labeled_path).write_text(result.labeled_csv(), encoding="utf-8")
    return result


def load_labeled_csv(path: str | Path) -> list[tuple[list[float], int]]:
    """Read a labeled feature file back as (features, label) pairs."""
    out: list[tuple[list[float], int]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != LABELED_HEADER:
            raise ValueError(f"labeled file header must be {','.join(LABELED_HEADER)}")
        for row in reader:
            feats = [float(row[f"f{i}"]) for i in range(1, 7)]
            out.append((feats, int(row["label"])))
    return out
