"""Shared fixtures: a disk-backed pool and an in-process HTTP harness with an
injectable clock, so sessions, code expiry, and payments can be time-traveled.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass
from datetime import datetime, timedelta

import httpx
import pytest

from revsys.agent import Birgent
from revsys.domain import utcnow
from revsys.pool import DataPool
from revsys.service import InMemoryNotifier, create_app

ADMIN_USER = "admin"
ADMIN_PASS = "adminpass"
MAC_SECRET = b"test-mac-secret"

CAPTURE_HEADER_LINE = ("full_name,email,phone,business_name,location,sector,"
                       "period,revenue_kobo,expenses_kobo")


def capture_csv(rows: list[tuple]) -> str:
    lines = [CAPTURE_HEADER_LINE]
    lines.extend(",".join(str(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


class SyncClient:
    """Synchronous facade over httpx's ASGI transport for plain pytest tests."""

    def __init__(self, app):
        self._loop = asyncio.new_event_loop()
        self._client = httpx.AsyncClient(transport=httpx.ASGITransport(app=app),
                                         base_url="http://testserver")

    def request(self, method: str, url: str, token: str = "", **kwargs) -> httpx.Response:
        headers = kwargs.pop("headers", {})
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return self._loop.run_until_complete(
            self._client.request(method, url, headers=headers, **kwargs))

    def get(self, url: str, **kwargs) -> httpx.Response:
        return self.request("GET", url, **kwargs)

    def post(self, url: str, **kwargs) -> httpx.Response:
        return self.request("POST", url, **kwargs)

    def close(self) -> None:
        self._loop.run_until_complete(self._client.aclose())
        self._loop.close()


@dataclass
class Harness:
    pool: DataPool
    agent: Birgent
    notifier: InMemoryNotifier
    client: SyncClient
    now: list  # single-cell holder so handlers see updated time

    def advance(self, **timedelta_kwargs) -> datetime:
        self.now[0] = self.now[0] + timedelta(**timedelta_kwargs)
        return self.now[0]

    # -- session helpers ------------------------------------------------------

    def staff_token(self, username: str, password: str) -> str:
        r = self.client.post("/api/auth/staff-login",
                             json={"username": username, "password": password})
        assert r.status_code == 200, r.text
        return r.json()["token"]

    def admin_token(self) -> str:
        return self.staff_token(ADMIN_USER, ADMIN_PASS)

    def make_staff(self, username: str, password: str, role: str) -> str:
        r = self.client.post("/api/admin/staff", token=self.admin_token(),
                             json={"username": username, "password": password,
                                   "role": role})
        assert r.status_code == 200, r.text
        return self.staff_token(username, password)

    def register_taxpayer(self, bir_token: str, *, full_name: str, email: str,
                          business_name: str, financials: list[dict]) -> dict:
        r = self.client.post("/api/bir/taxpayers", token=bir_token, json={
            "full_name": full_name, "email": email, "phone": "0800",
            "business_name": business_name, "location": "Benin City",
            "sector": "Retail", "financials": financials,
        })
        assert r.status_code == 200, r.text
        return r.json()

    def issue_tin(self, taxpayer_id: str) -> tuple[str, str]:
        """Returns (display TIN, default password) via the notifier stub."""
        r = self.client.post(f"/api/admin/tin/{taxpayer_id}", token=self.admin_token())
        assert r.status_code == 200, r.text
        body = self.notifier.messages[-1]["body"]
        password = body.split("default password ")[1].split(";")[0]
        return r.json()["tin"], password

    def activate_taxpayer(self, tin: str, default_password: str,
                          new_password: str = "fresh-pass-1") -> str:
        """Default-password login plus forced change; returns a live token."""
        r = self.client.post("/api/auth/taxpayer-login",
                             json={"tin": tin, "password": default_password})
        assert r.status_code == 200, r.text
        token = r.json()["token"]
        r = self.client.post("/api/taxpayer/password", token=token, json={
            "old": default_password, "new": new_password, "confirm": new_password})
        assert r.status_code == 200, r.text
        return token


def make_harness(tmp_path, subdir: str = "pool", **app_kwargs) -> Harness:
    pool_dir = tmp_path / subdir
    pool_dir.mkdir(parents=True, exist_ok=True)
    pool = DataPool(pool_dir)
    now = [utcnow()]
    agent = Birgent(pool, MAC_SECRET)
    notifier = InMemoryNotifier()
    app = create_app(pool, agent, notifier,
                     clock=lambda: now[0],
                     admin_username=ADMIN_USER, admin_password=ADMIN_PASS,
                     **app_kwargs)
    return Harness(pool=pool, agent=agent, notifier=notifier,
                   client=SyncClient(app), now=now)


@pytest.fixture
def harness(tmp_path):
    h = make_harness(tmp_path)
    yield h
    h.client.close()
    h.pool.close()


@pytest.fixture
def pool(tmp_path):
    d = tmp_path / "pool"
    d.mkdir()
    p = DataPool(d)
    yield p
    p.close()
