"""Client adapters for the edge service: HTTP and in-process.

Both expose the same four calls so the pipeline and replay driver do not
care whether the service lives across a socket or in the same process.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from typing import Protocol

from . import codec
from .estimator import ShCoefficients
from .service import EdgeService


class ClientError(Exception):
    def __init__(self, reason: str, status: int = 0, detail: str = ""):
        self.reason = reason
        self.status = status
        self.detail = detail
        super().__init__(f"{reason} (status {status}) {detail}".strip())


class EstimationClient(Protocol):
    def create_session(self, anchor_count: int) -> str: ...

    def join_session(self, session_id: str) -> dict: ...

    def register_position(self, session_id: str, world_position) -> str: ...

    def estimate(self, session_id: str, position_id: str, packet: bytes) -> ShCoefficients: ...


class InProcessClient:
    """Direct calls into an EdgeService instance, no sockets involved."""

    def __init__(self, service: EdgeService | None = None):
        self.service = service if service is not None else EdgeService()

    def create_session(self, anchor_count: int) -> str:
        return self.service.create_session(anchor_count)

    def join_session(self, session_id: str) -> dict:
        return self.service.join_session(session_id)

    def register_position(self, session_id: str, world_position) -> str:
        return self.service.register_position(session_id, world_position)

    def estimate(self, session_id: str, position_id: str, packet: bytes) -> ShCoefficients:
        return self.service.estimate(session_id, position_id, packet)


class HttpClient:
    """Talks the wire protocol over HTTP using stdlib urllib."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _request(self, method: str, path: str, body: bytes, content_type: str) -> bytes:
        req = urllib.request.Request(
            self.base_url + path,
            data=body,
            method=method,
            headers={"Content-Type": content_type},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read()
        except urllib.error.HTTPError as exc:
            raw = exc.read()
            reason, detail = "http-error", ""
            try:
                parsed = json.loads(raw.decode("utf-8"))
                reason = parsed.get("error", reason)
                detail = parsed.get("detail", "")
            except (UnicodeDecodeError, json.JSONDecodeError):
                pass
            raise ClientError(reason, exc.code, detail) from exc
        except urllib.error.URLError as exc:
            raise ClientError("unreachable", 0, str(exc.reason)) from exc

    def _json(self, method: str, path: str, payload: dict | None = None) -> dict:
        body = json.dumps(payload).encode() if payload is not None else b""
        return json.loads(self._request(method, path, body, "application/json"))

    def create_session(self, anchor_count: int) -> str:
        return self._json("POST", "/sessions", {"anchor_count": anchor_count})["session_id"]

    def join_session(self, session_id: str) -> dict:
        return self._json("GET", f"/sessions/{session_id}")

    def register_position(self, session_id: str, world_position) -> str:
        x, y, z = (float(v) for v in world_position)
        payload = {"x": x, "y": y, "z": z}
        return self._json("POST", f"/sessions/{session_id}/positions", payload)["position_id"]

    def estimate(self, session_id: str, position_id: str, packet: bytes) -> ShCoefficients:
        path = f"/sessions/{session_id}/positions/{position_id}/estimate"
        raw = self._request("POST", path, packet, "application/octet-stream")
        return ShCoefficients(codec.decode_sh(raw))
