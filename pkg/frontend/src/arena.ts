// Top-down arena: camera follows the robot; the goal marker is dragged
// in the robot heading frame (normalized by the 15 m command scale).

import { SessionState } from "./state.js";
import { GOAL_SCALE_METERS, yawFromQuat } from "./wire.js";

export const METERS_VISIBLE = 36; // arena edge length in world meters

export interface Camera {
  cx: number;
  cy: number;
  scale: number; // px per meter
}

export function cameraFor(state: SessionState, width: number, height: number): Camera {
  const base = state.latest ? state.latest.base_pos : [0, 0, 0];
  return { cx: base[0], cy: base[1], scale: Math.min(width, height) / METERS_VISIBLE };
}

export function worldToScreen(cam: Camera, width: number, height: number,
                              x: number, y: number): [number, number] {
  // world x is up on screen, world y is left (north-up map)
  return [width / 2 - (y - cam.cy) * cam.scale, height / 2 - (x - cam.cx) * cam.scale];
}

/** Screen pixel to a normalized heading-frame goal in [-1, 1]^2. */
export function screenToGoal(state: SessionState, cam: Camera, width: number, height: number,
                             px: number, py: number): [number, number] {
  const wx = cam.cx - (py - height / 2) / cam.scale;
  const wy = cam.cy - (px - width / 2) / cam.scale;
  const base = state.latest ? state.latest.base_pos : [0, 0, 0];
  const yaw = state.latest ? yawFromQuat(state.latest.base_quat) : 0;
  const dx = wx - base[0];
  const dy = wy - base[1];
  const hx = Math.cos(yaw) * dx + Math.sin(yaw) * dy;
  const hy = -Math.sin(yaw) * dx + Math.cos(yaw) * dy;
  return [hx / GOAL_SCALE_METERS, hy / GOAL_SCALE_METERS];
}

export function drawArena(ctx: CanvasRenderingContext2D, state: SessionState): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = state.connection === "open" ? "#101820" : "#1a1414";
  ctx.fillRect(0, 0, width, height);
  const cam = cameraFor(state, width, height);

  // 1 m grid
  ctx.strokeStyle = "#1c2834";
  ctx.lineWidth = 1;
  const half = METERS_VISIBLE / 2 + 2;
  for (let gx = Math.floor(cam.cx - half); gx <= cam.cx + half; gx++) {
    ctx.beginPath();
    let [sx, sy] = worldToScreen(cam, width, height, gx, cam.cy - half);
    ctx.moveTo(sx, sy);
    [sx, sy] = worldToScreen(cam, width, height, gx, cam.cy + half);
    ctx.lineTo(sx, sy);
    ctx.stroke();
  }
  for (let gy = Math.floor(cam.cy - half); gy <= cam.cy + half; gy++) {
    ctx.beginPath();
    let [sx, sy] = worldToScreen(cam, width, height, cam.cx - half, gy);
    ctx.moveTo(sx, sy);
    [sx, sy] = worldToScreen(cam, width, height, cam.cx + half, gy);
    ctx.lineTo(sx, sy);
    ctx.stroke();
  }

  // trail
  ctx.strokeStyle = "#355070";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  state.trail.forEach(([x, y], i) => {
    const [sx, sy] = worldToScreen(cam, width, height, x, y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.stroke();

  if (!state.latest) {
    ctx.fillStyle = "#8fa3b8";
    ctx.font = "13px system-ui, sans-serif";
    ctx.fillText("waiting for telemetry...", width / 2 - 60, height / 2);
    return;
  }

  // goal marker from the acknowledged heading-frame offset
  const yaw = yawFromQuat(state.latest.base_quat);
  const [gx, gy] = state.goalAcknowledged;
  const lx = gx * GOAL_SCALE_METERS;
  const ly = gy * GOAL_SCALE_METERS;
  const wx = state.latest.base_pos[0] + Math.cos(yaw) * lx - Math.sin(yaw) * ly;
  const wy = state.latest.base_pos[1] + Math.sin(yaw) * lx + Math.cos(yaw) * ly;
  const [gsx, gsy] = worldToScreen(cam, width, height, wx, wy);
  ctx.strokeStyle = "#ffca28";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(gsx, gsy, 9, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(gsx - 13, gsy);
  ctx.lineTo(gsx + 13, gsy);
  ctx.moveTo(gsx, gsy - 13);
  ctx.lineTo(gsx, gsy + 13);
  ctx.stroke();

  // robot pose arrow
  const [rx, ry] = worldToScreen(cam, width, height, state.latest.base_pos[0], state.latest.base_pos[1]);
  const heading = [Math.cos(yaw), Math.sin(yaw)];
  const tip = worldToScreen(cam, width, height,
                            state.latest.base_pos[0] + heading[0] * 0.9,
                            state.latest.base_pos[1] + heading[1] * 0.9);
  ctx.fillStyle = state.latest.body_contact ? "#ff5252" : "#4dd0e1";
  ctx.beginPath();
  ctx.arc(rx, ry, 7, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = ctx.fillStyle;
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(rx, ry);
  ctx.lineTo(tip[0], tip[1]);
  ctx.stroke();
}
