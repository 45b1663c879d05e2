"""HTTP supervisor: owns the session and mediates all client/world traffic.

Every response is a JSON envelope, ``{"result": ...}`` on success or
``{"error": {"code", "message"}}`` on failure. Environment ground truth
(the objects list) never appears in any payload; the glimpse sensor is the
only sanctioned channel for object information.
"""
from __future__ import annotations

import errno
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import worldsim
from .errors import (
    AddrInUse,
    InvalidCommand,
    ModeViolation,
    SessionFinished,
)
from .pools import (
    ResolvedConfig,
    environment_to_mapping,
    robot_to_mapping,
    task_to_mapping,
)

PROTOCOL_VERSION = "1"
DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 10000


def build_config_payload(config: ResolvedConfig) -> dict:
    """The served configuration: full selection with ground truth redacted."""
    environments = []
    for env in config.environments:
        mapping = environment_to_mapping(env)
        del mapping["objects"]
        environments.append(mapping)
    return {
        "protocol_version": PROTOCOL_VERSION,
        "task": task_to_mapping(config.task),
        "robot": robot_to_mapping(config.robot),
        "environments": environments,
        "eval_method": config.eval_method,
        "seed": config.seed,
    }


class Session:
    """Single live session: immutable config snapshot plus the owned world."""

    def __init__(self, config: ResolvedConfig):
        self.config = config
        self.world = worldsim.init_world(
            config.environments[0],
            config.robot,
            config.seed,
            localisation=config.task.localisation,
        )
        self.scene_index = 0
        self.started_at = time.time()
        self.config_payload = build_config_payload(config)
        self.connections_payload = {
            "sensors": list(config.task.observations),
            "actuators": list(config.task.actions),
        }
        # mutate_lock: one state-mutating request at a time, others get Busy;
        # world_lock: serializes every world access, reads included
        self._mutate_lock = threading.Lock()
        self._world_lock = threading.RLock()

    @property
    def action_in_flight(self) -> bool:
        return self._mutate_lock.locked()

    def sense(self, connection: str):
        conn = self.config.robot.connections.get(connection)
        if conn is None:
            return _error(404, "NotFound", f"unknown connection '{connection}'")
        if conn.channel != "sensor":
            return _error(400, "WrongChannel", f"'{connection}' is an actuator, not a sensor")
        with self._world_lock:
            frame = worldsim.sense(self.world, conn.backend_topic)
        return _ok(frame.to_payload())

    def act(self, connection: str, body: dict):
        conn = self.config.robot.connections.get(connection)
        if conn is None:
            return _error(404, "NotFound", f"unknown connection '{connection}'")
        if conn.channel != "actuator":
            return _error(400, "WrongChannel", f"'{connection}' is a sensor, not an actuator")
        cmd = worldsim.MotionCommand(kind=conn.backend_topic, value=body.get("value"))
        if not self._mutate_lock.acquire(blocking=False):
            return _error(409, "Busy", "another action is in flight")
        try:
            with self._world_lock:
                _, outcome = worldsim.step_motion(self.world, cmd, self.config.task.control_mode)
        except ModeViolation as exc:
            return _error(400, "ModeViolation", str(exc))
        except InvalidCommand as exc:
            return _error(400, "InvalidCommand", str(exc))
        except SessionFinished as exc:
            return _error(410, "SessionFinished", str(exc))
        finally:
            self._mutate_lock.release()
        return _ok(outcome.to_payload())

    def reset(self):
        if not self._mutate_lock.acquire(blocking=False):
            return _error(409, "Busy", "another action is in flight")
        try:
            with self._world_lock:
                self.world = worldsim.reset(self.world)
        finally:
            self._mutate_lock.release()
        return _ok("reset")

    def next_scene(self):
        scene_count = self.config.task.scene_count
        if scene_count < 2:
            return _error(400, "SceneCountMismatch", "task has a single scene")
        if not self._mutate_lock.acquire(blocking=False):
            return _error(409, "Busy", "another action is in flight")
        try:
            if self.scene_index + 1 >= scene_count:
                return _error(409, "NoMoreScenes", "already on the final scene")
            with self._world_lock:
                self.world = worldsim.apply_variant(
                    self.world, self.config.environments[self.scene_index + 1]
                )
                self.scene_index += 1
        finally:
            self._mutate_lock.release()
        return _ok({"scene_index": self.scene_index})


def _ok(payload):
    return 200, {"result": payload}


def _error(status, code, message):
    return status, {"error": {"code": code, "message": message}}


class _Handler(BaseHTTPRequestHandler):
    server_version = "taskbench-supervisor"
    protocol_version = "HTTP/1.1"

    # appeases the type checker; set on the server instance before serving
    @property
    def session(self) -> Session:
        return self.server.session  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # noqa: ARG002 - quiet by default
        pass

    def _send(self, status: int, body: dict):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, method: str):
        try:
            status, body = self._route(method)
        except Exception as exc:  # noqa: BLE001 - protocol totality
            status, body = _error(500, "Internal", f"{type(exc).__name__}: {exc}")
        self._send(status, body)

    def _read_body(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            body = json.loads(raw)
        except json.JSONDecodeError:
            return None
        return body if isinstance(body, dict) else None

    def _route(self, method: str):
        session = self.session
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if method == "GET":
            if parts == ["status", "health"]:
                return _ok("ok")
            if parts == ["config"]:
                return _ok(session.config_payload)
            if len(parts) == 2 and parts[0] == "config":
                key = parts[1]
                if key not in session.config_payload:
                    return _error(404, "NotFound", f"unknown config key '{key}'")
                return _ok(session.config_payload[key])
            if parts == ["connections"]:
                return _ok(session.connections_payload)
            if len(parts) == 2 and parts[0] == "sense":
                return session.sense(parts[1])
            if parts == ["robot", "is_collided"]:
                return _ok(session.world.collided)
            if parts == ["robot", "is_finished"]:
                return _ok(session.world.finished)
            return _error(404, "NotFound", f"no such endpoint: GET {self.path}")
        if method == "POST":
            if len(parts) == 2 and parts[0] == "act":
                body = self._read_body()
                if body is None:
                    return _error(400, "BadRequest", "request body must be a JSON object")
                return session.act(parts[1], body)
            if parts == ["robot", "reset"]:
                return session.reset()
            if parts == ["robot", "next_scene"]:
                return session.next_scene()
            return _error(404, "NotFound", f"no such endpoint: POST {self.path}")
        return _error(405, "MethodNotAllowed", f"method {method} not supported")

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_DELETE(self):
        self._dispatch("DELETE")


class SupervisorServer:
    """A live supervisor bound to one address, serving one session."""

    def __init__(self, config: ResolvedConfig, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT):
        self.session = Session(config)
        try:
            self._httpd = ThreadingHTTPServer((host, port), _Handler)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise AddrInUse(f"address {host}:{port} is already in use") from exc
            raise
        self._httpd.daemon_threads = True
        self._httpd.session = self.session  # type: ignore[attr-defined]
        self.host, self.port = self._httpd.server_address[0], self._httpd.server_address[1]
        self._thread = None

    @property
    def addr(self) -> str:
        return f"{self.host}:{self.port}"

    def serve_forever(self):
        self._httpd.serve_forever()

    def start_background(self):
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def shutdown(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.partition(":")
    return host or DEFAULT_HOST, int(port) if port else DEFAULT_PORT


def serve(config: ResolvedConfig, bind_addr: str | None = None) -> SupervisorServer:
    """Create a supervisor bound to bind_addr ('host:port'); caller starts it."""
    host, port = parse_addr(bind_addr) if bind_addr else (DEFAULT_HOST, DEFAULT_PORT)
    return SupervisorServer(config, host=host, port=port)
