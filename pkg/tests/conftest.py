from __future__ import annotations

import os
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest
import requests
import yaml

REPO_ROOT = Path(__file__).resolve().parents[1]
SRC = REPO_ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))
# child processes (CLI, submissions) must import the package too
os.environ["PYTHONPATH"] = str(SRC) + os.pathsep + os.environ.get("PYTHONPATH", "")

from taskbench import load_pool, validate_selection  # noqa: E402
from taskbench.supervisor import serve  # noqa: E402

POOLS_DIR = REPO_ROOT / "pools"


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture(scope="session")
def pools_dir() -> Path:
    return POOLS_DIR


@pytest.fixture(scope="session")
def bundled_pools():
    return load_pool(POOLS_DIR)


@pytest.fixture
def make_server(bundled_pools):
    """Factory for in-process supervisors on ephemeral ports."""
    servers = []

    def factory(task="semantic_slam:active:ground_truth", robot="sim_bot", envs=("house:1",), seed=0):
        config = validate_selection(bundled_pools, task, robot, list(envs), seed=seed)
        server = serve(config, "127.0.0.1:0").start_background()
        servers.append(server)
        return server

    yield factory
    for server in servers:
        server.shutdown()


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def run_cli(*args, env=None, timeout=120, cwd=None):
    merged = dict(os.environ)
    merged.update(env or {})
    return subprocess.run(
        [sys.executable, "-m", "taskbench", *args],
        capture_output=True,
        text=True,
        env=merged,
        timeout=timeout,
        cwd=cwd or REPO_ROOT,
    )


def spawn_supervisor(*args, addr, env=None):
    merged = dict(os.environ)
    merged["TASKBENCH_ADDR"] = addr
    merged.update(env or {})
    child = subprocess.Popen(
        [sys.executable, "-m", "taskbench", "run", *args],
        env=merged,
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
        cwd=REPO_ROOT,
    )
    deadline = time.monotonic() + 20
    while time.monotonic() < deadline:
        if child.poll() is not None:
            raise RuntimeError(f"supervisor exited early with {child.returncode}")
        try:
            if requests.get(f"http://{addr}/status/health", timeout=0.5).status_code == 200:
                return child
        except requests.RequestException:
            time.sleep(0.05)
    child.terminate()
    raise RuntimeError("supervisor failed to come up")


def stop_supervisor(child):
    if child.poll() is None:
        child.terminate()
        try:
            child.wait(timeout=5)
        except subprocess.TimeoutExpired:
            child.kill()
            child.wait(timeout=5)


# ---------------------------------------------------------------------------
# scratch pool building for pool-loader tests

def sample_task(**overrides) -> dict:
    data = {
        "name": "semantic_slam:active:ground_truth",
        "actions": ["move_distance", "rotate_angle"],
        "observations": ["pose", "laser"],
        "results_format": "object_map",
        "eval_method": "omq",
        "scene_count": 1,
    }
    data.update(overrides)
    return data


def sample_robot(**overrides) -> dict:
    data = {
        "name": "bot",
        "kind": "sim",
        "connections": {
            "pose": {"channel": "sensor", "backend_topic": "pose"},
            "laser": {"channel": "sensor", "backend_topic": "laser"},
            "object_glimpse": {"channel": "sensor", "backend_topic": "object_glimpse"},
            "move_distance": {"channel": "actuator", "backend_topic": "move_distance"},
            "rotate_angle": {"channel": "actuator", "backend_topic": "rotate_angle"},
            "move_next": {"channel": "actuator", "backend_topic": "move_next"},
        },
    }
    data.update(overrides)
    return data


def sample_environment(**overrides) -> dict:
    data = {
        "name": "room",
        "variant": 1,
        "kind": "sim",
        "bounds": [-5.0, -5.0, 5.0, 5.0],
        "walls": [
            [[-5.0, -5.0], [5.0, -5.0]],
            [[5.0, -5.0], [5.0, 5.0]],
            [[5.0, 5.0], [-5.0, 5.0]],
            [[-5.0, 5.0], [-5.0, -5.0]],
        ],
        "start_pose": [0.0, 0.0, 0.0],
        "trajectory": [[1.0, 0.0, 0.0], [1.0, 1.0, 1.5707963267948966]],
        "objects": [
            {"class": "mug", "centroid": [2.0, 0.0, 0.2], "extent": [0.1, 0.1, 0.2]},
        ],
        "class_list": ["mug", "box"],
    }
    data.update(overrides)
    return data


def sample_eval_method(**overrides) -> dict:
    data = {"name": "omq"}
    data.update(overrides)
    return data


def write_pool(root: Path, tasks=(), robots=(), environments=(), eval_methods=()) -> Path:
    """Materialize definitions into a pool directory layout."""
    for kind, items in (
        ("tasks", tasks),
        ("robots", robots),
        ("environments", environments),
        ("eval_methods", eval_methods),
    ):
        directory = root / kind
        directory.mkdir(parents=True, exist_ok=True)
        for i, item in enumerate(items):
            with open(directory / f"def_{i}.yaml", "w", encoding="utf-8") as fh:
                yaml.safe_dump(item, fh, sort_keys=False)
    return root
