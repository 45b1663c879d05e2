"""Environment sweeps: start supervisor, run submission, evaluate, aggregate.

One supervisor child process at a time, per-entry seed = base seed + index.
A failing entry is recorded with a null score and never blocks later
entries; the profile's mean covers scored entries only.
"""
from __future__ import annotations

import datetime
import json
import os
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from . import __version__
from .client import ADDR_ENV, default_addr, run_submission
from .errors import TaskbenchError
from .omq import evaluate_results_file
from .pools import Pools, validate_selection
from .supervisor import parse_addr

STARTUP_TIMEOUT = 20.0  # seconds to wait for a child supervisor's health check


@dataclass
class BatchSpec:
    task_id: str
    robot_id: str
    env_ids: list[str]
    command: str
    seed: int = 0
    output_dir: Path = field(default_factory=lambda: Path("batch_output"))


def _entry_env_ids(env_id: str) -> list[str]:
    # a two-scene entry names both variants joined by '+'
    return env_id.split("+")


def _sanitize(env_id: str) -> str:
    return env_id.replace(":", "_").replace("+", "_")


def _wait_for_health(addr: str, child: subprocess.Popen) -> bool:
    deadline = time.monotonic() + STARTUP_TIMEOUT
    while time.monotonic() < deadline:
        if child.poll() is not None:
            return False
        try:
            response = requests.get(f"http://{addr}/status/health", timeout=0.5)
            if response.status_code == 200:
                return True
        except requests.RequestException:
            pass
        time.sleep(0.05)
    return False


def _stop_child(child: subprocess.Popen) -> None:
    if child.poll() is None:
        child.terminate()
        try:
            child.wait(timeout=5)
        except subprocess.TimeoutExpired:
            child.kill()
            child.wait(timeout=5)


def _start_supervisor(pool_root, spec: BatchSpec, env_ids: list[str], seed: int, port: int) -> tuple[subprocess.Popen, str] | None:
    host, _ = parse_addr(default_addr())
    addr = f"{host}:{port}"
    argv = [sys.executable, "-m", "taskbench", "run", "--pool-root", str(pool_root),
            "--task", spec.task_id, "--robot", spec.robot_id, "--seed", str(seed)]
    for env_id in env_ids:
        argv += ["--env", env_id]
    env = dict(os.environ)
    env[ADDR_ENV] = addr
    child = subprocess.Popen(argv, env=env, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    if _wait_for_health(addr, child):
        return child, addr
    _stop_child(child)
    return None


def run_batch(spec: BatchSpec, pools: Pools, pool_root) -> dict:
    """Sweep the environments sequentially and write profile.json in output_dir."""
    for env_id in spec.env_ids:
        validate_selection(pools, spec.task_id, spec.robot_id, _entry_env_ids(env_id), seed=spec.seed)
    output_dir = Path(spec.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    _, base_port = parse_addr(default_addr())
    entries = []
    for index, env_id in enumerate(spec.env_ids):
        seed = spec.seed + index
        results_name = f"results_{_sanitize(env_id)}.json"
        report_name = f"report_{_sanitize(env_id)}.json"
        entry = {"env_id": env_id, "results_path": None, "report_path": None, "score": None}
        child = None
        try:
            started = _start_supervisor(pool_root, spec, _entry_env_ids(env_id), seed, base_port)
            if started is None:
                # one retry on the next port before failing the entry
                started = _start_supervisor(pool_root, spec, _entry_env_ids(env_id), seed, base_port + 1)
            if started is None:
                raise TaskbenchError(f"supervisor for '{env_id}' failed to start")
            child, addr = started
            run_submission(spec.command, addr=addr, results_path=output_dir / results_name)
            entry["results_path"] = results_name
            _stop_child(child)
            child = None
            report, _ = evaluate_results_file(
                output_dir / results_name, pools, report_path=output_dir / report_name
            )
            entry["report_path"] = report_name
            entry["score"] = report.score
        except (TaskbenchError, OSError, subprocess.SubprocessError) as exc:
            entry["error"] = str(exc)
            print(f"warning: entry '{env_id}' failed: {exc}", file=sys.stderr)
        finally:
            if child is not None:
                _stop_child(child)
        entries.append(entry)
    scores = [e["score"] for e in entries if e["score"] is not None]
    profile = {
        "entries": entries,
        "mean_score": sum(scores) / len(scores) if scores else None,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "harness_version": __version__,
    }
    with open(output_dir / "profile.json", "w", encoding="utf-8") as fh:
        json.dump(profile, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return profile
