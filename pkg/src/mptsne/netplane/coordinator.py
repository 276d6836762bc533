"""Coordinator HTTP service: task organization and the UI-facing API.

Control traffic only.  Bulk ciphertext matrices travel directly between
the collaborators and participants; artifact requests are proxied to
the requesting participant's own runner, which is the only place that
can join embedding positions with that participant's raw attributes.
"""

from __future__ import annotations

import json
import logging
import threading
import urllib.error
import urllib.parse
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..protocol.config import ConfigError, TaskConfig
from .registry import STATE_COMPLETE, RegistryError, TaskRegistry

log = logging.getLogger(__name__)


class CoordinatorService:
    def __init__(self, registry: TaskRegistry, host: str = "127.0.0.1", port: int = 0):
        self.registry = registry
        handler = _make_handler(self)
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="coordinator-http", daemon=True)
        self._thread.start()
        log.info("coordinator listening on %s", self.url)

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    # request handlers -----------------------------------------------------

    def handle_get(self, path: str, query: dict):
        if path == "/tasks":
            return 200, [r.to_jsonable(self.registry.collaborators())
                         for r in self.registry.list_tasks()]
        if path == "/collaborators":
            return 200, self.registry.collaborators()
        parts = [p for p in path.split("/") if p]
        if len(parts) == 2 and parts[0] == "tasks":
            return 200, self.registry.get(parts[1]).to_jsonable(
                self.registry.collaborators())
        if len(parts) == 3 and parts[0] == "tasks" and parts[2] in ("artifact", "density"):
            return self._proxy_artifact(parts[1], parts[2], query)
        raise RegistryError(f"no such resource {path!r}")

    def handle_post(self, path: str, body: dict):
        parts = [p for p in path.split("/") if p]
        if path == "/tasks":
            config = TaskConfig.from_dict(body["config"])
            record = self.registry.propose(config, title=body.get("title", ""),
                                           description=body.get("description", ""),
                                           proposer=body.get("proposer", ""))
            return 201, record.to_jsonable(self.registry.collaborators())
        if path == "/collaborators":
            self.registry.register_collaborator(body["role"], body["endpoint"])
            return 200, self.registry.collaborators()
        if len(parts) == 3 and parts[0] == "tasks":
            task_id, action = parts[1], parts[2]
            if action == "join":
                record = self.registry.join(task_id, body["participant_id"],
                                            body["endpoint"])
            elif action == "staged":
                record = self.registry.mark_staged(task_id, body["participant_id"],
                                                   body["point_count"],
                                                   body.get("dim_range"))
            elif action == "advance":
                record = self.registry.advance(task_id, body["step"], body["role"],
                                               body.get("participant_id"),
                                               body.get("evidence"))
            elif action == "fail":
                record = self.registry.fail(task_id, body.get("reason", "unspecified"))
            else:
                raise RegistryError(f"no such action {action!r}")
            return 200, record.to_jsonable(self.registry.collaborators())
        raise RegistryError(f"no such resource {path!r}")

    def _proxy_artifact(self, task_id: str, kind: str, query: dict):
        record = self.registry.get(task_id)
        participant = (query.get("participant") or [None])[0]
        if participant is None:
            raise RegistryError("participant query parameter required")
        if record.state != STATE_COMPLETE:
            return 409, {"error": f"task is {record.state_label()}, artifact not ready"}
        entry = record.roster.get(participant)
        if entry is None:
            raise RegistryError(f"{participant!r} is not on the roster")
        endpoint = (entry.endpoint or {}).get("artifact") if isinstance(entry.endpoint, dict) else None
        if not endpoint:
            return 409, {"error": f"{participant!r} has no artifact endpoint"}
        url = f"http://{endpoint}/{kind}?task={urllib.parse.quote(task_id)}"
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                return resp.status, json.loads(resp.read())
        except urllib.error.HTTPError as err:
            return err.code, json.loads(err.read() or b"{}")
        except OSError as err:
            return 502, {"error": f"participant runner unreachable: {err}"}


def _make_handler(service: CoordinatorService):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            log.debug("coordinator http: " + fmt, *args)

        def _reply(self, status: int, payload):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _dispatch(self, fn):
            try:
                status, payload = fn()
            except (RegistryError, ConfigError, KeyError, ValueError) as err:
                not_found = isinstance(err, RegistryError) and "unknown task" in str(err)
                self._reply(404 if not_found else 400, {"error": str(err)})
            except Exception as err:  # pragma: no cover - defensive
                log.exception("coordinator handler error")
                self._reply(500, {"error": str(err)})
            else:
                self._reply(status, payload)

        def do_GET(self):
            parsed = urllib.parse.urlparse(self.path)
            query = urllib.parse.parse_qs(parsed.query)
            self._dispatch(lambda: service.handle_get(parsed.path, query))

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b"{}"
            try:
                body = json.loads(raw)
            except json.JSONDecodeError:
                self._reply(400, {"error": "request body is not valid JSON"})
                return
            parsed = urllib.parse.urlparse(self.path)
            self._dispatch(lambda: service.handle_post(parsed.path, body))

    return Handler
