// Wire format shared with the telemetry service (message schemas v1).

export const GOAL_SCALE_METERS = 15;

export interface TelemetryFrame {
  v: number;
  t: number;
  base_pos: [number, number, number];
  base_quat: [number, number, number, number];
  speed_true: number;
  speed_est: number | null;
  roll: number;
  pitch: number;
  weights: number[];
  ref_gait: string;
  contacts: boolean[];
  goal_offset: [number, number];
  body_contact: boolean;
}

export type GoalCommand = { set_goal: [number, number] };
export type PushCommand = { push: [number, number, number] };
export type ResetCommand = { reset: true };
export type Command = GoalCommand | PushCommand | ResetCommand;

function numberArray(value: unknown, length: number): boolean {
  return Array.isArray(value) && value.length === length &&
    value.every((v) => typeof v === "number" && Number.isFinite(v));
}

/** Validate and narrow an incoming telemetry frame; null when malformed. */
export function parseFrame(data: unknown): TelemetryFrame | null {
  if (typeof data !== "object" || data === null) return null;
  const f = data as Record<string, unknown>;
  if (f.v !== 1) return null;
  if (typeof f.t !== "number" || !Number.isFinite(f.t)) return null;
  if (!numberArray(f.base_pos, 3) || !numberArray(f.base_quat, 4)) return null;
  if (typeof f.speed_true !== "number") return null;
  if (f.speed_est !== null && typeof f.speed_est !== "number") return null;
  if (typeof f.roll !== "number" || typeof f.pitch !== "number") return null;
  if (!numberArray(f.weights, 5)) return null;
  if (typeof f.ref_gait !== "string") return null;
  if (!Array.isArray(f.contacts) || f.contacts.length !== 4 ||
      !f.contacts.every((c) => typeof c === "boolean")) return null;
  if (!numberArray(f.goal_offset, 2)) return null;
  if (typeof f.body_contact !== "boolean") return null;
  return f as unknown as TelemetryFrame;
}

const clamp1 = (v: number) => Math.max(-1, Math.min(1, v));

/** Goal command from a (possibly out-of-range) normalized position. */
export function goalCommand(x: number, y: number): GoalCommand {
  return { set_goal: [clamp1(x), clamp1(y)] };
}

/** Push command; zero magnitude produces no message. */
export function pushCommand(fx: number, fy: number, fz: number): PushCommand | null {
  if (fx === 0 && fy === 0 && fz === 0) return null;
  return { push: [fx, fy, fz] };
}

export function resetCommand(): ResetCommand {
  return { reset: true };
}

/** Outbound schema check (mirrors the documented wire format). */
export function validateCommand(cmd: unknown): boolean {
  if (typeof cmd !== "object" || cmd === null) return false;
  const keys = Object.keys(cmd);
  if (keys.length !== 1) return false;
  const c = cmd as Record<string, unknown>;
  if ("set_goal" in c) {
    return numberArray(c.set_goal, 2) &&
      (c.set_goal as number[]).every((v) => v >= -1 && v <= 1);
  }
  if ("push" in c) return numberArray(c.push, 3);
  if ("reset" in c) return c.reset === true;
  return false;
}

/** Render-side invariant: displayed weights must sum to 1 within 1e-3. */
export function weightsSumOk(weights: number[]): boolean {
  if (weights.length !== 5) return false;
  const sum = weights.reduce((a, b) => a + b, 0);
  return Math.abs(sum - 1) <= 1e-3;
}

export function yawFromQuat(q: [number, number, number, number]): number {
  const [w, x, y, z] = q;
  return Math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
}
