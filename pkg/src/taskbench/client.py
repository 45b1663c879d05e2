"""Client access to a running supervisor: the observe/act loop and submissions.

A solution can either drive the primitives (connect/observe/act) manually or
hand the loop an agent with three callables: ``is_done(last_outcome)``,
``pick_action(observations, actuators)``, and ``save_result(path,
partial_results)``. Submission processes receive the supervisor address and
results path through the TASKBENCH_ADDR and TASKBENCH_RESULTS variables.
"""
from __future__ import annotations

import os
import shlex
import subprocess
from dataclasses import dataclass, field

import requests

from . import errors
from .results import load_results, prefill_results, validate_results

ADDR_ENV = "TASKBENCH_ADDR"
RESULTS_ENV = "TASKBENCH_RESULTS"
DEFAULT_ADDR = "127.0.0.1:10000"
NEXT_SCENE_ACTION = "next_scene"  # reserved action name for active scd agents

_ERROR_TYPES = {
    "NotFound": errors.NotFound,
    "WrongChannel": errors.WrongChannel,
    "ModeViolation": errors.ModeViolation,
    "InvalidCommand": errors.InvalidCommand,
    "Busy": errors.Busy,
    "SessionFinished": errors.SessionFinished,
    "NoMoreScenes": errors.NoMoreScenes,
    "SceneCountMismatch": errors.SceneCountMismatch,
}


def default_addr() -> str:
    return os.environ.get(ADDR_ENV, DEFAULT_ADDR)


@dataclass
class ClientHandle:
    supervisor_addr: str
    config_cache: dict
    sensors: list[str] = field(default_factory=list)
    actuators: list[str] = field(default_factory=list)

    @property
    def base_url(self) -> str:
        return f"http://{self.supervisor_addr}"


def _decode(response) -> object:
    try:
        body = response.json()
    except ValueError as exc:
        raise errors.ProtocolError(
            f"non-JSON response ({response.status_code}) from supervisor"
        ) from exc
    if isinstance(body, dict) and "result" in body:
        return body["result"]
    if isinstance(body, dict) and "error" in body:
        err = body["error"]
        exc_type = _ERROR_TYPES.get(err.get("code"), errors.TaskbenchError)
        raise exc_type(err.get("message", "supervisor error"))
    raise errors.ProtocolError("response body is not a wire envelope")


def _get(base_url: str, path: str, timeout: float = 10.0):
    try:
        return _decode(requests.get(base_url + path, timeout=timeout))
    except requests.RequestException as exc:
        raise errors.ConnectionError(f"supervisor unreachable at {base_url}: {exc}") from exc


def _post(base_url: str, path: str, body: dict | None = None, timeout: float = 60.0):
    try:
        return _decode(requests.post(base_url + path, json=body or {}, timeout=timeout))
    except requests.RequestException as exc:
        raise errors.ConnectionError(f"supervisor unreachable at {base_url}: {exc}") from exc


def connect(addr: str | None = None) -> ClientHandle:
    """Handle onto a live supervisor, populated from /config and /connections."""
    addr = addr or default_addr()
    base_url = f"http://{addr}"
    health = _get(base_url, "/status/health")
    if health != "ok":
        raise errors.SupervisorUnhealthy(f"supervisor at {addr} reported health '{health}'")
    config = _get(base_url, "/config")
    connections = _get(base_url, "/connections")
    return ClientHandle(
        supervisor_addr=addr,
        config_cache=config,
        sensors=list(connections["sensors"]),
        actuators=list(connections["actuators"]),
    )


def observe(handle: ClientHandle) -> dict[str, dict]:
    """One frame per declared sensor, collected in declared order."""
    frames = {}
    for sensor in handle.sensors:
        try:
            frames[sensor] = _get(handle.base_url, f"/sense/{sensor}")
        except errors.TaskbenchError as exc:
            raise errors.ObservationError(f"sensor '{sensor}' failed: {exc}") from exc
    return frames


def act(handle: ClientHandle, name: str, args: dict | None = None) -> dict:
    """Execute one actuator command and return the decoded outcome."""
    if name not in handle.actuators:
        raise errors.NotFound(f"'{name}' is not a declared actuator")
    return _post(handle.base_url, f"/act/{name}", args or {})


def _call_agent(agent, method: str, *call_args):
    try:
        return getattr(agent, method)(*call_args)
    except errors.TaskbenchError:
        raise
    except Exception as exc:
        raise errors.AgentError(f"agent {method} raised {type(exc).__name__}: {exc}") from exc


def run_agent(handle: ClientHandle, agent, results_path) -> None:
    """Drive the observe/act loop until the agent declares the task done.

    For two-scene tasks the runner advances the scene once: in passive mode
    when the first trajectory finishes, in active mode when the agent picks
    the reserved 'next_scene' action. The finishing outcome is still shown
    to the agent so it can track scene completions itself.
    """
    scene_count = int(handle.config_cache["task"]["scene_count"])
    control_mode = handle.config_cache["task"]["name"].split(":")[1]
    scenes_advanced = 0
    last = None
    while True:
        observations = observe(handle)
        if _call_agent(agent, "is_done", last):
            break
        name, args = _call_agent(agent, "pick_action", observations, list(handle.actuators))
        if name == NEXT_SCENE_ACTION and scene_count > 1 and control_mode == "active":
            _post(handle.base_url, "/robot/next_scene")
            scenes_advanced += 1
            last = None
            continue
        last = act(handle, name, args)
        if (
            scene_count > 1
            and control_mode == "passive"
            and last["status"] == "finished_trajectory"
            and scenes_advanced < scene_count - 1
        ):
            _post(handle.base_url, "/robot/next_scene")
            scenes_advanced += 1
    _call_agent(agent, "save_result", results_path, prefill_results(handle.config_cache))
    validate_results(load_results(results_path))


def run_submission(command, addr: str | None = None, results_path=None, timeout: float | None = None) -> int:
    """Launch a solution process against a live supervisor and validate its output.

    The command template is a string (shlex-split) or an argv list; the child
    finds the supervisor and output location through the environment contract.
    """
    addr = addr or default_addr()
    if results_path is None:
        raise ValueError("results_path is required")
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    env = dict(os.environ)
    env[ADDR_ENV] = addr
    env[RESULTS_ENV] = str(results_path)
    proc = subprocess.run(argv, env=env, timeout=timeout)
    if proc.returncode != 0:
        raise errors.SubmissionFailed(proc.returncode)
    validate_results(load_results(results_path))
    return 0
