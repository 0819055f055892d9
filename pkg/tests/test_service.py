import queue
import time

import numpy as np
import pytest
from starlette.testclient import TestClient

from multigait.core import RngStream
from multigait.env import EnvSettings
from multigait.gaits import SKILL_ORDER
from multigait.policy import CompositePolicy, ExpertSet, GatingNetwork, make_expert
from multigait.rewards import SwitchCriteria
from multigait.service import SimSession, WorldGoal, build_app
from multigait.sim import CONTROL_DT

CRITERIA = SwitchCriteria(2.0, 5.0)


def make_session(max_steps=None, estimator=None):
    settings = EnvSettings()
    rng = RngStream(0)
    experts = ExpertSet([make_expert(g, rng.child(g.value), (16, 16)) for g in SKILL_ORDER])
    gating = GatingNetwork.initialize(rng.child("gating"), (16, 16))
    policy = CompositePolicy(experts, gating, settings.sim.joint_lower, settings.sim.joint_upper)
    return SimSession(policy, settings, CRITERIA, rng.child("serve"),
                      estimator_net=estimator, paced=False, max_steps=max_steps)


def drain_until(session, ws, predicate, max_steps=100):
    for _ in range(max_steps):
        session.step_once()
        frame = ws.receive_json()
        if predicate(frame):
            return frame
    raise AssertionError("condition not reached within the step budget")


class TestFrames:
    def test_schema_and_invariants(self):
        session = make_session()
        frame = session.step_once()
        assert frame["v"] == 1
        assert set(frame) == {"v", "t", "base_pos", "base_quat", "speed_true", "speed_est",
                              "roll", "pitch", "weights", "ref_gait", "contacts",
                              "goal_offset", "body_contact"}
        assert len(frame["weights"]) == 5
        assert sum(frame["weights"]) == pytest.approx(1.0, abs=1e-6)
        assert len(frame["contacts"]) == 4
        assert frame["speed_est"] is None

    def test_timestamps_advance_by_control_period(self):
        session = make_session()
        frames = [session.step_once() for _ in range(10)]
        diffs = np.diff([f["t"] for f in frames])
        np.testing.assert_allclose(diffs, CONTROL_DT, atol=1e-9)

    def test_frames_broadcast_to_registered_clients(self):
        session = make_session()
        q1, q2 = session.register(), session.register()
        session.step_once()
        assert q1.get_nowait()["t"] == q2.get_nowait()["t"]
        session.unregister(q2)
        session.step_once()
        assert q1.get_nowait()
        assert q2.empty()


class TestCommands:
    def test_set_goal_activates_gallop_within_one_step(self):
        session = make_session()
        session.step_once()
        session.commands.put({"set_goal": [1.0, 0.0]})
        frame = session.step_once()
        # goal 15 m ahead >= x2: the very step that acknowledges the goal
        # must already reference gallop
        assert frame["goal_offset"][0] == pytest.approx(1.0, abs=0.05)
        assert frame["ref_gait"] == "gallop"

    def test_goal_origin_references_trot(self):
        session = make_session()
        session.commands.put({"set_goal": [0.0, 0.0]})
        frame = session.step_once()
        assert frame["ref_gait"] == "trot"

    def test_goal_clamped_to_unit_square(self):
        session = make_session()
        session.commands.put({"set_goal": [5.0, -3.0]})
        session.step_once()
        offset = np.linalg.norm(session.goal.position - session.state.base_position[:2])
        assert offset <= 15.0 * np.sqrt(2) + 1e-6

    def test_push_impulse_causes_body_contact_within_a_second(self):
        session = make_session()
        session.step_once()
        session.commands.put({"push": [0.0, 100.0, 0.0]})
        for _ in range(25):  # 1 s of control steps
            frame = session.step_once()
            if frame["body_contact"]:
                break
        assert frame["body_contact"]

    def test_reset_restores_nominal(self):
        session = make_session()
        session.commands.put({"push": [0.0, 120.0, 0.0]})
        for _ in range(25):
            session.step_once()
        session.commands.put({"reset": True})
        frame = session.step_once()
        assert abs(frame["roll"]) < 0.3 and abs(frame["pitch"]) < 0.3

    def test_malformed_commands_ignored(self):
        session = make_session()
        session.commands.put({"zap": 42})
        session.commands.put("not a dict")
        session.commands.put({"set_goal": "oops"})
        frame = session.step_once()  # still alive
        assert frame["t"] >= 0.0

    def test_goal_constant_within_control_step(self):
        # commands queued mid-step take effect at the next drain only
        session = make_session()
        session.step_once()
        before = session.goal
        session.commands.put({"set_goal": [0.5, 0.5]})
        assert session.goal is before
        session.step_once()
        assert session.goal is not before


class TestRunLoop:
    def test_max_steps_terminates(self):
        session = make_session(max_steps=30)
        q = session.register()
        session.start()
        session.join(timeout=30.0)
        assert not session.is_alive()
        frames = []
        while not q.empty():
            frames.append(q.get_nowait())
        assert len(frames) == 30


class TestWebSocket:
    def test_telemetry_and_steering_over_ws(self):
        session = make_session()
        app = build_app(session)
        client = TestClient(app)
        with client.websocket_connect("/ws") as ws:
            session.step_once()
            frame = ws.receive_json()
            assert frame["v"] == 1
            ws.send_json({"set_goal": [1.0, 0.0]})
            deadline = time.time() + 5.0
            while session.commands.qsize() == 0 and time.time() < deadline:
                time.sleep(0.01)
            frame = drain_until(session, ws, lambda f: f["ref_gait"] == "gallop", max_steps=5)
            assert frame["goal_offset"][0] > 0.9

    def test_non_json_message_ignored(self):
        session = make_session()
        app = build_app(session)
        client = TestClient(app)
        with client.websocket_connect("/ws") as ws:
            ws.send_text("{broken json")
            time.sleep(0.1)
            session.step_once()
            frame = ws.receive_json()
            assert frame["t"] >= 0.0

    def test_health_endpoint(self):
        session = make_session()
        client = TestClient(build_app(session))
        assert client.get("/health").json()["ok"] is True


class TestWorldGoal:
    def test_position(self):
        goal = WorldGoal(3.0, -4.0)
        np.testing.assert_array_equal(goal.position, [3.0, -4.0])
