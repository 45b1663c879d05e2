"""Task results files: prefill, schema validation, and atomic writes."""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

from .errors import ResultValidationError

PROB_SUM_TOL = 1e-6
STATE_KEYS = ("added", "removed", "constant")
REQUIRED_TOP = ("task_details", "environment_details", "class_list", "objects")


def prefill_results(config_payload: dict) -> dict:
    """Empty results skeleton carrying the authoritative session metadata."""
    task = config_payload["task"]
    envs = config_payload["environments"]
    return {
        "task_details": {"name": task["name"], "results_format": task["results_format"]},
        "environment_details": [{"name": e["name"], "variant": e["variant"]} for e in envs],
        "class_list": list(envs[0]["class_list"]),
        "objects": [],
    }


def _fail(message, field):
    raise ResultValidationError(f"invalid results file: {message}", field=field)


def _check_probs(values, field, expected_len=None):
    if not isinstance(values, list):
        _fail(f"{field} must be a list of probabilities", field)
    if expected_len is not None and len(values) != expected_len:
        _fail(f"{field} must have {expected_len} entries, got {len(values)}", field)
    total = 0.0
    for p in values:
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not math.isfinite(p):
            _fail(f"{field} entries must be finite numbers", field)
        if p < 0.0 or p > 1.0:
            _fail(f"{field} entries must lie in [0, 1]", field)
        total += float(p)
    if total > 1.0 + PROB_SUM_TOL:
        _fail(f"{field} entries sum to {total}, above 1", field)


def _check_triple(values, field, positive=False):
    if not isinstance(values, list) or len(values) != 3:
        _fail(f"{field} must have three components", field)
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            _fail(f"{field} components must be finite numbers", field)
        if positive and v <= 0.0:
            _fail(f"{field} components must be positive", field)


def validate_results(results: dict) -> None:
    """Raise ResultValidationError when the mapping is not a valid results file."""
    if not isinstance(results, dict):
        _fail("results must be a mapping", None)
    for key in REQUIRED_TOP:
        if key not in results:
            _fail(f"missing top-level field '{key}'", key)
    task_details = results["task_details"]
    if not isinstance(task_details, dict) or "name" not in task_details or "results_format" not in task_details:
        _fail("task_details must carry 'name' and 'results_format'", "task_details")
    name_parts = str(task_details["name"]).split(":")
    if len(name_parts) != 3:
        _fail(f"task_details.name '{task_details['name']}' is not a task identifier", "task_details.name")
    is_scd = name_parts[0] == "scd"
    env_details = results["environment_details"]
    if not isinstance(env_details, list) or not env_details:
        _fail("environment_details must be a non-empty list", "environment_details")
    for i, entry in enumerate(env_details):
        if not isinstance(entry, dict) or "name" not in entry or "variant" not in entry:
            _fail(f"environment_details[{i}] must carry 'name' and 'variant'", "environment_details")
    class_list = results["class_list"]
    if not isinstance(class_list, list) or any(not isinstance(c, str) for c in class_list):
        _fail("class_list must be a list of strings", "class_list")
    objects = results["objects"]
    if not isinstance(objects, list):
        _fail("objects must be a list", "objects")
    for i, obj in enumerate(objects):
        if not isinstance(obj, dict):
            _fail(f"objects[{i}] must be a mapping", f"objects[{i}]")
        for key in ("label_probs", "centroid", "extent"):
            if key not in obj:
                _fail(f"objects[{i}] is missing '{key}'", f"objects[{i}].{key}")
        _check_probs(obj["label_probs"], f"objects[{i}].label_probs", expected_len=len(class_list))
        _check_triple(obj["centroid"], f"objects[{i}].centroid")
        _check_triple(obj["extent"], f"objects[{i}].extent", positive=True)
        has_state = "state_probs" in obj and obj["state_probs"] is not None
        if has_state != is_scd:
            _fail(
                f"objects[{i}] state_probs must be present exactly for scd tasks",
                f"objects[{i}].state_probs",
            )
        if has_state:
            state_probs = obj["state_probs"]
            if not isinstance(state_probs, dict) or set(state_probs) != set(STATE_KEYS):
                _fail(
                    f"objects[{i}].state_probs must carry exactly {list(STATE_KEYS)}",
                    f"objects[{i}].state_probs",
                )
            _check_probs([state_probs[k] for k in STATE_KEYS], f"objects[{i}].state_probs")


def write_results(path, results: dict) -> None:
    """Atomic write: the file is either absent or complete, never partial."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def load_results(path) -> dict:
    target = Path(path)
    if not target.is_file():
        raise ResultValidationError(f"results file '{target}' does not exist")
    try:
        with open(target, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ResultValidationError(f"results file '{target}' is not valid JSON: {exc}") from exc
