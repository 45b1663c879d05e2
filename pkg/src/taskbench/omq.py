"""Object Map Quality: pairwise qualities, optimal matching, and summaries.

A proposed object map is compared against ground truth by scoring every
proposal/object pair, matching pairs one-to-one so the total quality is
maximal, and normalizing the matched quality mass by the count of true
positives, false positives, and false negatives.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EmptyInput, NotFound, SchemaMismatch
from .pools import EnvironmentDef, GroundTruthObject, Pools
from .results import load_results, validate_results

METRIC_VERSION = "omq-v1"
SCD_MATCH_TOLERANCE = 0.01  # metres; same-instance centroid tolerance across variants


def iou3d(box_a, box_b) -> float:
    """Intersection over union of two axis-aligned (centroid, extent) boxes."""
    (ca, ea), (cb, eb) = box_a, box_b
    inter = 1.0
    vol_a = 1.0
    vol_b = 1.0
    for axis in range(3):
        # equivalent to min(high edges) - max(low edges), but exact when the
        # two intervals coincide
        gap = abs(float(cb[axis]) - float(ca[axis]))
        overlap = min(float(ea[axis]), float(eb[axis]), (float(ea[axis]) + float(eb[axis])) / 2.0 - gap)
        inter *= max(0.0, overlap)
        vol_a *= float(ea[axis])
        vol_b *= float(eb[axis])
    union = vol_a + vol_b - inter
    return inter / union if union > 0.0 else 0.0


@dataclass(frozen=True)
class PairwiseQuality:
    label_q: float
    spatial_q: float
    state_q: float | None
    overall_q: float


def pairwise_quality(proposal: dict, gt: GroundTruthObject, class_list, task_type: str) -> PairwiseQuality:
    """Quality of one proposal against one ground-truth object.

    The overall quality is the geometric mean of the label probability mass
    on the true class, the box IoU, and (scd only) the probability mass on
    the true change state; any zero component zeroes the whole pair.
    """
    class_list = list(class_list)
    label_probs = proposal["label_probs"]
    if len(label_probs) != len(class_list):
        raise SchemaMismatch(
            f"label_probs has {len(label_probs)} entries for {len(class_list)} classes"
        )
    if gt.class_name not in class_list:
        raise SchemaMismatch(f"ground-truth class '{gt.class_name}' missing from class_list")
    label_q = float(label_probs[class_list.index(gt.class_name)])
    spatial_q = iou3d(
        (proposal["centroid"], proposal["extent"]),
        (gt.centroid, gt.extent),
    )
    components = [label_q, spatial_q]
    state_q = None
    if task_type == "scd":
        state_probs = proposal.get("state_probs") or {}
        if gt.state not in state_probs:
            raise SchemaMismatch(f"state_probs missing entry for state '{gt.state}'")
        state_q = float(state_probs[gt.state])
        components.append(state_q)
    product = 1.0
    for c in components:
        product *= c
    overall = product ** (1.0 / len(components)) if product > 0.0 else 0.0
    return PairwiseQuality(label_q=label_q, spatial_q=spatial_q, state_q=state_q, overall_q=overall)


def assign(quality_matrix) -> list[tuple[int, int]]:
    """Maximum-total-quality one-to-one matching; zero-quality pairs dropped."""
    q = np.atleast_2d(np.asarray(quality_matrix, dtype=float))
    if q.size == 0:
        return []
    rows, cols = linear_sum_assignment(q, maximize=True)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if q[r, c] > 0.0]


@dataclass
class EvalReport:
    task_name: str
    score: float
    true_positives: list[tuple[int, int, PairwiseQuality]]
    false_positive_idxs: list[int]
    false_negative_idxs: list[int]
    component_means: dict

    def to_payload(self) -> dict:
        return {
            "metric": METRIC_VERSION,
            "task_name": self.task_name,
            "score": self.score,
            "true_positives": [
                {
                    "proposal": p,
                    "gt": g,
                    "label_q": q.label_q,
                    "spatial_q": q.spatial_q,
                    "state_q": q.state_q,
                    "overall_q": q.overall_q,
                }
                for p, g, q in self.true_positives
            ],
            "false_positives": list(self.false_positive_idxs),
            "false_negatives": list(self.false_negative_idxs),
            "component_means": dict(self.component_means),
        }


def scd_ground_truth(env_a: EnvironmentDef, env_b: EnvironmentDef) -> tuple[GroundTruthObject, ...]:
    """Changed objects between two variants, tagged added or removed.

    Objects are the same instance when class matches and centroids agree
    within SCD_MATCH_TOLERANCE; instances present in both variants are
    constant and excluded from the returned ground truth.
    """
    matched_b = [False] * len(env_b.objects)
    changed = []
    for obj in env_a.objects:
        match = None
        for j, other in enumerate(env_b.objects):
            if matched_b[j] or other.class_name != obj.class_name:
                continue
            dist = sum((a - b) ** 2 for a, b in zip(obj.centroid, other.centroid)) ** 0.5
            if dist <= SCD_MATCH_TOLERANCE:
                match = j
                break
        if match is None:
            changed.append(replace(obj, state="removed"))
        else:
            matched_b[match] = True
    for j, other in enumerate(env_b.objects):
        if not matched_b[j]:
            changed.append(replace(other, state="added"))
    return tuple(changed)


def evaluate(results: dict, gt_envs, task_type: str) -> EvalReport:
    """Score one results file against environment ground truth."""
    gt_envs = list(gt_envs)
    class_list = list(results["class_list"])
    for env in gt_envs:
        if list(env.class_list) != class_list:
            raise SchemaMismatch(
                f"results class_list does not match environment '{env.env_id}' class_list"
            )
    if task_type == "scd":
        if len(gt_envs) != 2:
            raise SchemaMismatch("scene change detection needs exactly two environment variants")
        gts = scd_ground_truth(gt_envs[0], gt_envs[1])
    else:
        gts = tuple(gt_envs[0].objects)
    proposals = results["objects"]
    qualities = [
        [pairwise_quality(p, g, class_list, task_type) for g in gts] for p in proposals
    ]
    matrix = [[q.overall_q for q in row] for row in qualities]
    pairs = assign(matrix) if proposals and gts else []
    true_positives = [(p, g, qualities[p][g]) for p, g in pairs]
    matched_p = {p for p, _ in pairs}
    matched_g = {g for _, g in pairs}
    false_positive_idxs = [i for i in range(len(proposals)) if i not in matched_p]
    false_negative_idxs = [j for j in range(len(gts)) if j not in matched_g]
    denominator = len(true_positives) + len(false_positive_idxs) + len(false_negative_idxs)
    score = (
        sum(q.overall_q for _, _, q in true_positives) / denominator if denominator else 0.0
    )
    n_tp = len(true_positives)
    component_means = {
        "label": sum(q.label_q for _, _, q in true_positives) / n_tp if n_tp else 0.0,
        "spatial": sum(q.spatial_q for _, _, q in true_positives) / n_tp if n_tp else 0.0,
        "state": (
            sum(q.state_q for _, _, q in true_positives) / n_tp
            if n_tp and task_type == "scd"
            else None
        ),
    }
    return EvalReport(
        task_name=str(results["task_details"]["name"]),
        score=score,
        true_positives=true_positives,
        false_positive_idxs=false_positive_idxs,
        false_negative_idxs=false_negative_idxs,
        component_means=component_means,
    )


def summarise(reports) -> dict:
    """Mean score over several reports, keeping the per-report scores."""
    reports = list(reports)
    if not reports:
        raise EmptyInput("cannot summarise zero reports")
    return {
        "mean_score": sum(r.score for r in reports) / len(reports),
        "per_report": [{"task_name": r.task_name, "score": r.score} for r in reports],
    }


# ---------------------------------------------------------------------------
# file-level entry point shared by the eval command and the batch runner

EVALUATORS = {"omq": evaluate}


def evaluate_results_file(results_path, pools: Pools, report_path=None) -> tuple[EvalReport, Path]:
    """Validate, resolve ground truth from the pools, score, and write a report."""
    results_path = Path(results_path)
    results = load_results(results_path)
    validate_results(results)
    task_name = results["task_details"]["name"]
    task = pools.tasks.get(task_name)
    if task is None:
        raise NotFound(f"no evaluation method: unknown task '{task_name}' in '{results_path}'")
    method = pools.eval_methods.get(task.eval_method)
    if method is None or method.name not in EVALUATORS:
        raise NotFound(
            f"no evaluation method '{task.eval_method}' available for task '{task_name}'"
        )
    gt_envs = []
    for entry in results["environment_details"]:
        env_id = f"{entry['name']}:{entry['variant']}"
        env = pools.environments.get(env_id)
        if env is None:
            raise NotFound(f"unknown environment '{env_id}' referenced by '{results_path}'")
        gt_envs.append(env)
    report = EVALUATORS[method.name](results, gt_envs, task.task_type)
    if report_path is None:
        report_path = results_path.with_suffix(".report.json")
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_payload(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report, report_path
