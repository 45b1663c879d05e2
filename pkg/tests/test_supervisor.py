import json
import threading
import time

import pytest
import requests

from taskbench import errors, validate_selection
from taskbench.supervisor import serve
from taskbench import worldsim


def url(server, path):
    return f"http://{server.addr}{path}"


def get(server, path):
    return requests.get(url(server, path), timeout=10)

def post(server, path, body=None):
    return requests.post(url(server, path), json=body or {}, timeout=30)


def result_of(response):
    body = response.json()
    assert "result" in body, body
    return body["result"]


def error_of(response):
    body = response.json()
    assert "error" in body, body
    return body["error"]


# ---------------------------------------------------------------------------
# basic routes

def test_health(make_server):
    server = make_server()
    response = get(server, "/status/health")
    assert response.status_code == 200
    assert result_of(response) == "ok"


def test_addr_in_use(make_server, bundled_pools):
    server = make_server()
    config = validate_selection(bundled_pools, "semantic_slam:active:ground_truth", "sim_bot", ["house:1"])
    with pytest.raises(errors.AddrInUse):
        serve(config, server.addr)


def test_config_reports_selection(make_server):
    server = make_server(task="scd:passive:ground_truth", envs=("house:1", "house:2"))
    config = result_of(get(server, "/config"))
    assert config["protocol_version"] == "1"
    assert config["task"]["scene_count"] == 2
    assert config["task"]["name"] == "scd:passive:ground_truth"
    assert [e["variant"] for e in config["environments"]] == [1, 2]
    assert config["seed"] == 0


def test_config_key_projection(make_server):
    server = make_server()
    task = result_of(get(server, "/config/task"))
    assert task["name"] == "semantic_slam:active:ground_truth"
    response = get(server, "/config/nope")
    assert response.status_code == 404
    assert error_of(response)["code"] == "NotFound"


def test_config_redacts_objects(make_server):
    server = make_server()
    for payload in (result_of(get(server, "/config"))["environments"],
                    result_of(get(server, "/config/environments"))):
        for env in payload:
            assert "objects" not in env
            assert "class_list" in env  # needed for results prefill


def test_connections_filtered_by_task(make_server):
    active = make_server()
    assert result_of(get(active, "/connections")) == {
        "sensors": ["pose", "laser", "object_glimpse"],
        "actuators": ["move_distance", "rotate_angle"],
    }
    passive = make_server(task="semantic_slam:passive:ground_truth")
    assert result_of(get(passive, "/connections"))["actuators"] == ["move_next"]


# ---------------------------------------------------------------------------
# sensing

def test_sense_pose_is_start_pose(make_server):
    server = make_server()
    frame = result_of(get(server, "/sense/pose"))
    assert frame == {"kind": "pose", "pose": [0.0, 0.0, 0.0]}


def test_sense_wrong_channel_and_unknown(make_server):
    server = make_server()
    response = get(server, "/sense/move_distance")
    assert response.status_code == 400
    assert error_of(response)["code"] == "WrongChannel"
    assert get(server, "/sense/sonar").status_code == 404


def test_sense_matches_worldsim_directly(make_server, bundled_pools):
    server = make_server()
    frame = result_of(get(server, "/sense/laser"))
    config = validate_selection(bundled_pools, "semantic_slam:active:ground_truth", "sim_bot", ["house:1"])
    world = worldsim.init_world(config.environments[0], config.robot, 0)
    assert frame == worldsim.sense(world, "laser").to_payload()


def test_repeated_sense_stable_except_glimpse(make_server):
    server = make_server(robot="sim_bot_noisy")
    pose_a = get(server, "/sense/pose").text
    pose_b = get(server, "/sense/pose").text
    assert pose_a == pose_b
    laser_a = get(server, "/sense/laser").text
    laser_b = get(server, "/sense/laser").text
    assert laser_a == laser_b
    post(server, "/act/move_distance", {"value": 1.0})  # get close to the bottle
    glimpse_a = result_of(get(server, "/sense/object_glimpse"))
    glimpse_b = result_of(get(server, "/sense/object_glimpse"))
    assert glimpse_a["glimpses"] and glimpse_a != glimpse_b


# ---------------------------------------------------------------------------
# acting

def test_act_move_distance(make_server):
    server = make_server()
    response = post(server, "/act/move_distance", {"value": 1.0})
    outcome = result_of(response)
    assert outcome["status"] == "completed"
    assert abs(outcome["distance_travelled"] - 1.0) < 1e-12
    frame = result_of(get(server, "/sense/pose"))
    assert abs(frame["pose"][0] - 1.0) < 1e-12


def test_act_mode_violation(make_server):
    server = make_server()  # active task
    response = post(server, "/act/move_next")
    assert response.status_code == 400
    assert error_of(response)["code"] == "ModeViolation"


def test_act_on_sensor_or_unknown(make_server):
    server = make_server()
    assert post(server, "/act/pose", {"value": 1.0}).status_code == 400
    assert post(server, "/act/jetpack", {"value": 1.0}).status_code == 404


def test_act_invalid_value(make_server):
    server = make_server()
    assert post(server, "/act/move_distance", {"value": 1e9}).status_code == 400
    assert post(server, "/act/move_distance", {}).status_code == 400


def test_act_after_finish_gone(make_server, bundled_pools):
    server = make_server(task="semantic_slam:passive:ground_truth")
    trajectory_len = len(bundled_pools.environments["house:1"].trajectory)
    for _ in range(trajectory_len):
        assert post(server, "/act/move_next").status_code == 200
    response = post(server, "/act/move_next")
    assert response.status_code == 410
    assert error_of(response)["code"] == "SessionFinished"
    assert result_of(get(server, "/robot/is_finished")) is True


def test_concurrent_acts_exactly_one_busy(make_server, monkeypatch):
    server = make_server()
    real_step = worldsim.step_motion

    def slow_step(*args, **kwargs):
        time.sleep(0.6)
        return real_step(*args, **kwargs)

    monkeypatch.setattr(worldsim, "step_motion", slow_step)
    codes = []
    barrier = threading.Barrier(2)

    def fire():
        barrier.wait()
        codes.append(post(server, "/act/move_distance", {"value": 0.1}).status_code)

    threads = [threading.Thread(target=fire) for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(codes) == [200, 409]


# ---------------------------------------------------------------------------
# robot control

def test_reset_restores_start(make_server):
    server = make_server()
    post(server, "/act/move_distance", {"value": 1.5})
    assert result_of(post(server, "/robot/reset")) == "reset"
    assert result_of(get(server, "/sense/pose"))["pose"] == [0.0, 0.0, 0.0]


def test_next_scene_lifecycle(make_server):
    server = make_server(task="scd:passive:ground_truth", envs=("house:1", "house:2"))
    assert result_of(post(server, "/robot/next_scene")) == {"scene_index": 1}
    response = post(server, "/robot/next_scene")
    assert response.status_code == 409
    assert error_of(response)["code"] == "NoMoreScenes"


def test_next_scene_rejected_for_single_scene(make_server):
    server = make_server()
    assert post(server, "/robot/next_scene").status_code == 400


def test_robot_flags(make_server, bundled_pools):
    server = make_server(task="semantic_slam:passive:ground_truth")
    assert result_of(get(server, "/robot/is_collided")) is False
    assert result_of(get(server, "/robot/is_finished")) is False
    for _ in range(len(bundled_pools.environments["house:1"].trajectory)):
        post(server, "/act/move_next")
    assert result_of(get(server, "/robot/is_finished")) is True


# ---------------------------------------------------------------------------
# protocol properties

ALL_GET = [
    "/status/health",
    "/config",
    "/config/task",
    "/connections",
    "/sense/pose",
    "/sense/laser",
    "/sense/object_glimpse",
    "/robot/is_collided",
    "/robot/is_finished",
    "/bogus",
    "/config/bogus/extra",
    "/sense/",
]
ALL_POST = [
    ("/act/move_distance", {"value": 0.1}),
    ("/act/move_distance", None),
    ("/act/bogus", {"value": 1}),
    ("/robot/reset", None),
    ("/robot/next_scene", None),
    ("/nonsense", None),
]


def test_protocol_totality_every_response_is_an_envelope(make_server):
    server = make_server()
    bodies = []
    for path in ALL_GET:
        bodies.append(get(server, path))
    for path, body in ALL_POST:
        bodies.append(post(server, path, body))
    # a syntactically broken body must still yield an envelope
    bodies.append(
        requests.post(url(server, "/act/move_distance"), data=b"{oops", timeout=10)
    )
    bodies.append(requests.put(url(server, "/config"), timeout=10))
    bodies.append(requests.delete(url(server, "/config"), timeout=10))
    for response in bodies:
        decoded = response.json()
        assert isinstance(decoded, dict)
        assert ("result" in decoded) != ("error" in decoded)
        if "error" in decoded:
            assert set(decoded["error"]) == {"code", "message"}


def _ground_truth_needles(env):
    needles = []
    for obj in env.objects:
        needles.append(json.dumps(list(obj.centroid)))
        needles.append(json.dumps(list(obj.extent)))
    return needles


def test_ground_truth_isolation_on_clean_endpoints(make_server, bundled_pools):
    server = make_server(task="semantic_slam:passive:ground_truth")
    env = bundled_pools.environments["house:1"]
    class_needles = [json.dumps(obj.class_name) for obj in env.objects]
    numeric_needles = _ground_truth_needles(env)
    post(server, "/act/move_next")
    clean = [get(server, "/config").text, get(server, "/config/environments").text,
             get(server, "/sense/pose").text, get(server, "/sense/laser").text]
    for body in clean:
        for needle in numeric_needles:
            assert needle not in body, needle
    # class names may legitimately appear in the served class vocabulary, so
    # strip that field before searching for them
    for raw in (get(server, "/config").json()["result"],):
        redacted = json.loads(json.dumps(raw))
        for env_payload in redacted["environments"]:
            env_payload.pop("class_list")
        text = json.dumps(redacted)
        for needle in class_needles:
            assert needle not in text, needle
    for body in (get(server, "/sense/pose").text, get(server, "/sense/laser").text):
        for needle in class_needles:
            assert needle not in body, needle
    # the glimpse sensor is the sanctioned leak
    for _ in range(5):
        post(server, "/act/move_next")
    glimpse = get(server, "/sense/object_glimpse").text
    assert any(json.dumps(obj.class_name) in glimpse for obj in env.objects)


def test_session_equivalence_same_seed(make_server):
    def script(server):
        transcript = []
        transcript.append(get(server, "/status/health").text)
        transcript.append(get(server, "/config").text)
        transcript.append(get(server, "/connections").text)
        transcript.append(get(server, "/sense/pose").text)
        transcript.append(get(server, "/sense/laser").text)
        transcript.append(get(server, "/sense/object_glimpse").text)
        transcript.append(post(server, "/act/move_distance", {"value": 0.7}).text)
        transcript.append(post(server, "/act/rotate_angle", {"value": 0.3}).text)
        transcript.append(get(server, "/sense/object_glimpse").text)
        transcript.append(get(server, "/sense/pose").text)
        transcript.append(get(server, "/robot/is_finished").text)
        return transcript

    first = script(make_server(robot="sim_bot_noisy", seed=99))
    second = script(make_server(robot="sim_bot_noisy", seed=99))
    assert first == second
