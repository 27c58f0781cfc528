"""HTTP/JSON face of the chaining controller, plus a threaded server for tests.

Paths and status codes are part of the contract consumed by the wrappers and
the operator dashboard:

    POST   /api/register   -> 200 {token} | 409
    DELETE /api/register   -> 204
    POST   /api/keepalive  -> 200 {token} | 401
    POST   /api/attack     -> 202 | 401 | 422
    GET    /api/status     -> 200 snapshot
    POST   /api/order      -> 202 | 400
"""

from __future__ import annotations

import threading
from datetime import datetime, timezone
from pathlib import Path

import uvicorn
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .controller import (
    AttackReport,
    ControllerError,
    DuplicateRegistration,
    FunctionChainingController,
    ImplausibleStrength,
    InvalidToken,
    NotAPermutation,
    SessionExpired,
    UnknownFunction,
)
from .evaluator import ChainOrder, InvalidOrder


class RegisterBody(BaseModel):
    function_id: str
    group_id: str
    link_capacity_mbps: float = Field(gt=0)


class TokenBody(BaseModel):
    function_id: str
    token: str


class AttackBody(BaseModel):
    function_id: str
    token: str
    attack_class: str
    strength_mbps: float
    timestamp: str | None = None  # ISO-8601; server receipt time when omitted


class OrderBody(BaseModel):
    order: list[str]


def _parse_timestamp(value: str) -> None:
    try:
        datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise HTTPException(status_code=422, detail=f"bad ISO-8601 timestamp: {value!r}")


def create_app(
    controller: FunctionChainingController,
    static_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="ssfc-fcc")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.post("/api/register")
    def register(body: RegisterBody):
        try:
            token = controller.register(body.function_id, body.group_id, body.link_capacity_mbps)
        except DuplicateRegistration as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"token": token}

    @app.delete("/api/register", status_code=204)
    def deregister(body: TokenBody):
        try:
            controller.deregister(body.function_id, body.token)
        except (InvalidToken, UnknownFunction, SessionExpired) as exc:
            raise HTTPException(status_code=401, detail=str(exc))
        return Response(status_code=204)

    @app.post("/api/keepalive")
    def keepalive(body: TokenBody):
        try:
            token = controller.keepalive(body.function_id, body.token)
        except (InvalidToken, UnknownFunction, SessionExpired) as exc:
            raise HTTPException(status_code=401, detail=str(exc))
        return {"token": token}

    @app.post("/api/attack", status_code=202)
    def attack(body: AttackBody):
        if body.timestamp is not None:
            _parse_timestamp(body.timestamp)
        try:
            report = AttackReport(
                function_id=body.function_id,
                attack_class=body.attack_class,
                strength=body.strength_mbps,
                timestamp=controller.clock.now(),
                token=body.token,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            controller.report_attack(report)
        except ImplausibleStrength as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except (InvalidToken, UnknownFunction, SessionExpired) as exc:
            raise HTTPException(status_code=401, detail=str(exc))
        return {"accepted": True}

    @app.get("/api/status")
    def status():
        snapshot = controller.status()
        snapshot["generated_at"] = datetime.now(timezone.utc).isoformat()
        return snapshot

    @app.post("/api/order", status_code=202)
    def manual_order(body: OrderBody):
        try:
            epoch = controller.apply_order(ChainOrder(tuple(body.order)), trigger="manual")
        except (NotAPermutation, InvalidOrder) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except ControllerError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"epoch": epoch}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app


class ApiServer:
    """uvicorn in a background thread; used by `ssfc serve` and the API tests."""

    def __init__(self, app: FastAPI, host: str = "127.0.0.1", port: int = 8080) -> None:
        config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        self.server = uvicorn.Server(config)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        servers = getattr(self.server, "servers", [])
        if servers:
            return servers[0].sockets[0].getsockname()[1]
        return self.server.config.port

    def start(self, timeout: float = 10.0) -> None:
        self._thread = threading.Thread(target=self.server.run, daemon=True)
        self._thread.start()
        deadline = timeout
        import time

        waited = 0.0
        while not self.server.started and waited < deadline:
            time.sleep(0.02)
            waited += 0.02
        if not self.server.started:
            raise RuntimeError("API server failed to start in time")

    def stop(self) -> None:
        self.server.should_exit = True
        if self._thread:
            self._thread.join(timeout=5)
