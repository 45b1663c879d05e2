"""Bundled example agents, runnable as submissions via ``python -m taskbench.agents``."""
from __future__ import annotations

import math
import os

from .. import client
from ..results import write_results


class Agent:
    """The three-callable contract the loop runner expects."""

    def is_done(self, last_outcome) -> bool:
        raise NotImplementedError

    def pick_action(self, observations, actuators):
        raise NotImplementedError

    def save_result(self, path, partial_results) -> None:
        raise NotImplementedError


class IdleAgent(Agent):
    """Declares itself done immediately and reports an empty map."""

    def is_done(self, last_outcome) -> bool:
        return True

    def pick_action(self, observations, actuators):
        return actuators[0], {}

    def save_result(self, path, partial_results) -> None:
        write_results(path, partial_results)


class PassiveGlimpseMapper(Agent):
    """Follows the authored trajectory and reports every glimpsed object once.

    Glimpses are deduplicated by class and centroid proximity. For two-scene
    tasks the maps of both scenes are diffed and only changed objects are
    reported, with all probability mass on the inferred change state.
    """

    def __init__(self, scene_count: int = 1, dedupe_radius: float = 0.05, match_radius: float = 0.02):
        self.scene_count = scene_count
        self.dedupe_radius = dedupe_radius
        self.match_radius = match_radius
        self._maps = [[] for _ in range(scene_count)]
        self._scene = 0
        self._finishes = 0

    def is_done(self, last_outcome) -> bool:
        if last_outcome is not None and last_outcome.get("status") == "finished_trajectory":
            self._finishes += 1
            self._scene = min(self._finishes, self.scene_count - 1)
        return self._finishes >= self.scene_count

    def pick_action(self, observations, actuators):
        frame = observations.get("object_glimpse")
        if frame is not None:
            self._ingest(frame)
        return "move_next", {}

    def save_result(self, path, partial_results) -> None:
        class_list = partial_results["class_list"]
        if self.scene_count == 1:
            proposals = [self._proposal(entry, class_list) for entry in self._maps[0]]
        else:
            proposals = self._diff_scenes(class_list)
        partial_results["objects"] = proposals
        write_results(path, partial_results)

    def _ingest(self, frame) -> None:
        current = self._maps[self._scene]
        for glimpse in frame["glimpses"]:
            if not any(
                known["class"] == glimpse["class"]
                and _dist(known["centroid"], glimpse["centroid"]) <= self.dedupe_radius
                for known in current
            ):
                current.append(
                    {
                        "class": glimpse["class"],
                        "centroid": list(glimpse["centroid"]),
                        "extent": list(glimpse["extent"]),
                    }
                )

    def _proposal(self, entry, class_list, state=None):
        probs = [0.0] * len(class_list)
        if entry["class"] in class_list:
            probs[class_list.index(entry["class"])] = 1.0
        proposal = {
            "label_probs": probs,
            "centroid": list(entry["centroid"]),
            "extent": list(entry["extent"]),
        }
        if state is not None:
            proposal["state_probs"] = {
                "added": 1.0 if state == "added" else 0.0,
                "removed": 1.0 if state == "removed" else 0.0,
                "constant": 1.0 if state == "constant" else 0.0,
            }
        return proposal

    def _diff_scenes(self, class_list):
        before, after = self._maps[0], self._maps[1]
        matched_after = [False] * len(after)
        proposals = []
        for entry in before:
            match = None
            for j, other in enumerate(after):
                if matched_after[j] or other["class"] != entry["class"]:
                    continue
                if _dist(entry["centroid"], other["centroid"]) <= self.match_radius:
                    match = j
                    break
            if match is None:
                proposals.append(self._proposal(entry, class_list, state="removed"))
            else:
                matched_after[match] = True
        for j, other in enumerate(after):
            if not matched_after[j]:
                proposals.append(self._proposal(other, class_list, state="added"))
        return proposals


def _dist(a, b) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


BUNDLED = {
    "passive_mapper": PassiveGlimpseMapper,
    "idle": IdleAgent,
}


def run_bundled(name: str = "passive_mapper") -> int:
    """Run a bundled agent against the supervisor named by the environment."""
    if name not in BUNDLED:
        print(f"unknown bundled agent '{name}'; options: {sorted(BUNDLED)}")
        return 2
    results_path = os.environ.get(client.RESULTS_ENV, "results.json")
    handle = client.connect()
    if name == "passive_mapper":
        agent = PassiveGlimpseMapper(scene_count=int(handle.config_cache["task"]["scene_count"]))
    else:
        agent = IdleAgent()
    client.run_agent(handle, agent, results_path)
    return 0
