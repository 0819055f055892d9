"""Telemetry and steering service.

A simulation session runs on its own thread at the 25 Hz control rate,
broadcasting one JSON telemetry frame per control step and draining a
command queue once per step, so inbound goal changes never tear a
control window.  The browser UI (or any WebSocket client) connects to
/ws; messages are JSON, versioned with a "v" field.

Inbound commands:
    {"set_goal": [gx, gy]}   gx, gy in [-1, 1], heading frame, scaled by 15 m
    {"push": [fx, fy, fz]}   impulse on the torso, N*s
    {"reset": true}          back to the nominal stance
Malformed messages are logged and ignored; the simulation never stops on
client errors.
"""

from __future__ import annotations

import asyncio
import logging
import math
import queue
import threading
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .core import RngStream, quat_yaw, roll_pitch
from .env import EnvSettings
from .estimator import estimate_velocity
from .gaits import GaitType
from .policy import StepContext, goal_offset, heading_frame_velocity
from .rewards import SwitchCriteria, select_reference_gait
from .sim import CONTROL_DT, SimulationError, control_step, reset

log = logging.getLogger("multigait.service")

GOAL_SCALE = 15.0


@dataclass(frozen=True)
class WorldGoal:
    """Goal pinned to a world position (set interactively, unlike the
    origin-polar training goals)."""

    x: float
    y: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


class SimSession(threading.Thread):
    """Owns one simulator + policy; communicates only via queues."""

    def __init__(self, policy, settings: EnvSettings, criteria: SwitchCriteria,
                 rng: RngStream, estimator_net=None, paced: bool = True,
                 max_steps: int | None = None):
        super().__init__(daemon=True, name="multigait-sim")
        self.policy = policy
        self.settings = settings
        self.criteria = criteria
        self.rng = rng
        self.estimator_net = estimator_net
        self.paced = paced
        self.max_steps = max_steps
        self.commands: queue.Queue = queue.Queue()
        self._clients: list[queue.Queue] = []
        self._clients_lock = threading.Lock()
        self._stop_requested = threading.Event()
        self._act_rng = rng.child("actions")
        self.state = reset("nominal", rng.child("reset"), settings.sim)
        self.goal = WorldGoal(0.0, 0.0)
        self._history = [self.state, self.state, self.state]
        self._step_count = 0

    # -- client management ---------------------------------------------------

    def register(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._clients_lock:
            self._clients.append(q)
        return q

    def unregister(self, q: queue.Queue) -> None:
        with self._clients_lock:
            if q in self._clients:
                self._clients.remove(q)

    def stop(self) -> None:
        self._stop_requested.set()

    # -- command handling ----------------------------------------------------

    def _apply_command(self, msg) -> None:
        if not isinstance(msg, dict):
            raise ValueError("command must be a JSON object")
        if "set_goal" in msg:
            gx, gy = (float(v) for v in msg["set_goal"])
            gx = min(max(gx, -1.0), 1.0)
            gy = min(max(gy, -1.0), 1.0)
            yaw = quat_yaw(self.state.base_orientation)
            c, s = math.cos(yaw), math.sin(yaw)
            lx, ly = GOAL_SCALE * gx, GOAL_SCALE * gy
            self.goal = WorldGoal(
                float(self.state.base_position[0] + c * lx - s * ly),
                float(self.state.base_position[1] + s * lx + c * ly),
            )
        elif "push" in msg:
            fx, fy, fz = (float(v) for v in msg["push"])
            impulse = np.array([fx, fy, fz])
            self.state.base_lin_vel = self.state.base_lin_vel + impulse / self.settings.sim.mass
        elif "reset" in msg:
            self.state = reset("nominal", self.rng.child(f"reset{self._step_count}"), self.settings.sim)
            self._history = [self.state, self.state, self.state]
            self.goal = WorldGoal(float(self.state.base_position[0]), float(self.state.base_position[1]))
        else:
            raise ValueError(f"unknown command keys: {sorted(msg)}")

    def _drain_commands(self) -> None:
        while True:
            try:
                msg = self.commands.get_nowait()
            except queue.Empty:
                return
            try:
                self._apply_command(msg)
            except (ValueError, TypeError, KeyError) as err:
                log.warning("ignoring malformed command %r: %s", msg, err)

    # -- main loop -------------------------------------------------------------

    def _frame(self, weights, ref_gait: GaitType, offset) -> dict:
        state = self.state
        v_true = heading_frame_velocity(state)
        speed_est = None
        if self.estimator_net is not None:
            v_est = estimate_velocity(self.estimator_net, self._history)
            speed_est = float(np.linalg.norm(v_est[:2]))
        roll, pitch = roll_pitch(state.base_orientation)
        return {
            "v": 1,
            "t": round(self._step_count * CONTROL_DT, 9),
            "base_pos": [float(v) for v in state.base_position],
            "base_quat": [float(v) for v in state.base_orientation],
            "speed_true": float(np.linalg.norm(v_true[:2])),
            "speed_est": speed_est,
            "roll": roll,
            "pitch": pitch,
            "weights": [float(w) for w in weights],
            "ref_gait": ref_gait.value,
            "contacts": [bool(c) for c in state.foot_contact],
            "goal_offset": [float(v) for v in offset],
            "body_contact": bool(state.body_contact),
        }

    def _broadcast(self, frame: dict) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for q in clients:
            q.put(frame)

    def step_once(self) -> dict:
        """One control step: drain commands, act, integrate, emit a frame."""
        self._drain_commands()
        state = self.state
        distance = float(np.linalg.norm(self.goal.position - state.base_position[:2]))
        ref_gait = select_reference_gait(distance, self.criteria)
        offset = goal_offset(state, self.goal)
        velocity = heading_frame_velocity(state)
        if self.estimator_net is not None:
            velocity = estimate_velocity(self.estimator_net, self._history)
        ctx = StepContext(state=state, phase=state.phase, velocity_hf=velocity,
                          goal=self.goal, distance=distance, offset=offset)
        action, info = self.policy.act(ctx, self._act_rng)
        frequency = self.settings.gait_table.frequency(ref_gait)
        try:
            self.state, _ = control_step(state, action, self.settings.sim, frequency)
        except SimulationError as err:
            log.warning("simulation blew up (%s); resetting", err)
            self.state = reset("nominal", self.rng.child(f"blowup{self._step_count}"), self.settings.sim)
        self._history = [self._history[1], self._history[2], self.state]
        self._step_count += 1
        weights = info.get("weights")
        if weights is None:
            weights = np.zeros(5)
        frame = self._frame(weights, ref_gait, goal_offset(self.state, self.goal))
        self._broadcast(frame)
        return frame

    def run(self) -> None:
        import time

        next_tick = time.monotonic()
        while not self._stop_requested.is_set():
            if self.max_steps is not None and self._step_count >= self.max_steps:
                break
            self.step_once()
            if self.paced:
                next_tick += CONTROL_DT
                delay = next_tick - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_tick = time.monotonic()


def build_app(session: SimSession, static_dir: str | None = None):
    """FastAPI app exposing /ws telemetry plus optional static UI assets."""
    app = FastAPI(title="multigait telemetry")

    @app.get("/health")
    def health():
        return {"ok": True, "t": session._step_count * CONTROL_DT}

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        frames = session.register()
        loop = asyncio.get_event_loop()

        async def sender():
            while True:
                frame = await loop.run_in_executor(None, frames.get)
                if frame is None:  # teardown sentinel
                    return
                await websocket.send_json(frame)

        async def receiver():
            while True:
                try:
                    msg = await websocket.receive_json()
                except ValueError as err:
                    log.warning("ignoring non-JSON message: %s", err)
                    continue
                session.commands.put(msg)

        try:
            send_task = asyncio.ensure_future(sender())
            recv_task = asyncio.ensure_future(receiver())
            done, pending = await asyncio.wait({send_task, recv_task},
                                               return_when=asyncio.FIRST_EXCEPTION)
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, WebSocketDisconnect):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            session.unregister(frames)
            frames.put(None)  # release the executor thread blocked on get()

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
