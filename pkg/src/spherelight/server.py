"""HTTP front end for the edge service, on the stdlib threading server.

Routes (little JSON in, little JSON out, except the estimate endpoint
which is raw octets both ways):

    POST /sessions                              {"anchor_count": n} -> {"session_id": s}
    GET  /sessions/{id}                         -> session descriptor
    POST /sessions/{id}/positions               {"x":..,"y":..,"z":..} -> {"position_id": p}
    POST /sessions/{id}/positions/{pid}/estimate  packet octets -> 108 SH octets

Errors carry a one-line JSON body {"error": reason}; reasons are stable
strings (session-not-found, position-not-found, invalid-argument,
malformed-packet, insufficient-observation).
"""

from __future__ import annotations

import json
import re
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import codec
from .estimator import InsufficientObservationError
from .service import EdgeService, PositionNotFoundError, SessionNotFoundError

_SESSION_RE = re.compile(r"^/sessions/([^/]+)$")
_POSITIONS_RE = re.compile(r"^/sessions/([^/]+)/positions$")
_ESTIMATE_RE = re.compile(r"^/sessions/([^/]+)/positions/([^/]+)/estimate$")

MAX_BODY = 16 * 1024 * 1024


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "spherelight-edge/0.1"

    @property
    def service(self) -> EdgeService:
        return self.server.service  # type: ignore[attr-defined]

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        if getattr(self.server, "verbose", False):
            super().log_message(format, *args)

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length", "0"))
        if length < 0 or length > MAX_BODY:
            raise ValueError(f"unacceptable body length {length}")
        return self.rfile.read(length)

    def _send_json(self, status: int, payload: dict) -> None:
        body = (json.dumps(payload, separators=(",", ":")) + "\n").encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_octets(self, payload: bytes) -> None:
        self.send_response(HTTPStatus.OK)
        self.send_header("Content-Type", "application/octet-stream")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _error(self, status: int, reason: str, detail: str = "") -> None:
        payload = {"error": reason}
        if detail:
            payload["detail"] = detail.splitlines()[0]
        self._send_json(status, payload)

    def do_GET(self):
        m = _SESSION_RE.match(self.path)
        if not m:
            self._error(HTTPStatus.NOT_FOUND, "no-such-route")
            return
        try:
            descriptor = self.service.join_session(m.group(1))
        except SessionNotFoundError:
            self._error(HTTPStatus.NOT_FOUND, "session-not-found")
            return
        self._send_json(HTTPStatus.OK, descriptor)

    def do_POST(self):
        try:
            body = self._body()
        except ValueError as exc:
            self._error(HTTPStatus.BAD_REQUEST, "invalid-argument", str(exc))
            return

        if self.path == "/sessions":
            self._create_session(body)
            return
        m = _POSITIONS_RE.match(self.path)
        if m:
            self._register_position(m.group(1), body)
            return
        m = _ESTIMATE_RE.match(self.path)
        if m:
            self._estimate(m.group(1), m.group(2), body)
            return
        self._error(HTTPStatus.NOT_FOUND, "no-such-route")

    def _parse_json(self, body: bytes) -> dict | None:
        try:
            parsed = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self._error(HTTPStatus.BAD_REQUEST, "invalid-argument", str(exc))
            return None
        if not isinstance(parsed, dict):
            self._error(HTTPStatus.BAD_REQUEST, "invalid-argument", "expected a JSON object")
            return None
        return parsed

    def _create_session(self, body: bytes) -> None:
        parsed = self._parse_json(body)
        if parsed is None:
            return
        try:
            anchor_count = int(parsed["anchor_count"])
        except (KeyError, TypeError, ValueError):
            self._error(HTTPStatus.BAD_REQUEST, "invalid-argument", "anchor_count required")
            return
        try:
            session_id = self.service.create_session(anchor_count)
        except ValueError as exc:
            self._error(HTTPStatus.BAD_REQUEST, "invalid-argument", str(exc))
            return
        self._send_json(HTTPStatus.CREATED, {"session_id": session_id})

    def _register_position(self, session_id: str, body: bytes) -> None:
        parsed = self._parse_json(body)
        if parsed is None:
            return
        try:
            world = [float(parsed[k]) for k in ("x", "y", "z")]
        except (KeyError, TypeError, ValueError):
            self._error(HTTPStatus.BAD_REQUEST, "invalid-argument", "x, y, z required")
            return
        try:
            position_id = self.service.register_position(session_id, world)
        except SessionNotFoundError:
            self._error(HTTPStatus.NOT_FOUND, "session-not-found")
            return
        except ValueError as exc:
            self._error(HTTPStatus.BAD_REQUEST, "invalid-argument", str(exc))
            return
        self._send_json(HTTPStatus.CREATED, {"position_id": position_id})

    def _estimate(self, session_id: str, position_id: str, body: bytes) -> None:
        try:
            sh = self.service.estimate(session_id, position_id, body)
        except SessionNotFoundError:
            self._error(HTTPStatus.NOT_FOUND, "session-not-found")
            return
        except PositionNotFoundError:
            self._error(HTTPStatus.NOT_FOUND, "position-not-found")
            return
        except codec.CodecError as exc:
            self._error(HTTPStatus.BAD_REQUEST, "malformed-packet", str(exc))
            return
        except InsufficientObservationError as exc:
            self._error(HTTPStatus.UNPROCESSABLE_ENTITY, "insufficient-observation", str(exc))
            return
        self._send_octets(codec.encode_sh(sh))


class EdgeHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, service: EdgeService, verbose: bool = False):
        super().__init__(address, _Handler)
        self.service = service
        self.verbose = verbose


class ServerHandle:
    """A server running on a background thread; use as a context manager."""

    def __init__(self, service: EdgeService | None = None, host: str = "127.0.0.1", port: int = 0):
        self.service = service if service is not None else EdgeService()
        self._server = EdgeHTTPServer((host, port), self.service)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "ServerHandle":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "ServerHandle":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def run_server(
    host: str,
    port: int,
    service: EdgeService | None = None,
    verbose: bool = True,
) -> None:
    """Blocking entry point used by the CLI."""
    server = EdgeHTTPServer((host, port), service if service is not None else EdgeService(), verbose)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
