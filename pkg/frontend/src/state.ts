// Session store: latest frame plus rolling 20 s history buffers.

import { TelemetryFrame, weightsSumOk } from "./wire.js";

export const FRAME_RATE = 25;
export const HISTORY_SECONDS = 20;
export const HISTORY_CAPACITY = FRAME_RATE * HISTORY_SECONDS; // 500 points

export type Connection = "connecting" | "open" | "closed";

export interface HistoryBuffers {
  t: number[];
  speedTrue: number[];
  speedEst: (number | null)[];
  roll: number[];
  pitch: number[];
  weights: number[][];    // 5 series
  contacts: boolean[][];  // 4 rows
  refGait: string[];
}

export interface SessionState {
  connection: Connection;
  latest: TelemetryFrame | null;
  goalMarker: [number, number];       // normalized [-1, 1]^2, operator intent
  goalAcknowledged: [number, number]; // last goal echoed by telemetry
  trail: [number, number][];          // world xy of recent base positions
  history: HistoryBuffers;
  badWeightFrames: number;
}

export function createState(): SessionState {
  return {
    connection: "connecting",
    latest: null,
    goalMarker: [0, 0],
    goalAcknowledged: [0, 0],
    trail: [],
    history: {
      t: [], speedTrue: [], speedEst: [], roll: [], pitch: [],
      weights: [[], [], [], [], []],
      contacts: [[], [], [], []],
      refGait: [],
    },
    badWeightFrames: 0,
  };
}

function push<T>(buffer: T[], value: T): void {
  buffer.push(value);
  if (buffer.length > HISTORY_CAPACITY) buffer.shift();
}

/** Fold one telemetry frame into the store (drops stale out-of-order frames). */
export function applyFrame(state: SessionState, frame: TelemetryFrame): void {
  const h = state.history;
  const last = h.t.length > 0 ? h.t[h.t.length - 1] : -Infinity;
  if (frame.t <= last) return;
  state.latest = frame;
  state.goalAcknowledged = [frame.goal_offset[0], frame.goal_offset[1]];
  if (!weightsSumOk(frame.weights)) state.badWeightFrames += 1;
  push(h.t, frame.t);
  push(h.speedTrue, frame.speed_true);
  push(h.speedEst, frame.speed_est);
  push(h.roll, frame.roll);
  push(h.pitch, frame.pitch);
  for (let i = 0; i < 5; i++) push(h.weights[i], frame.weights[i]);
  for (let i = 0; i < 4; i++) push(h.contacts[i], frame.contacts[i]);
  push(h.refGait, frame.ref_gait);
  state.trail.push([frame.base_pos[0], frame.base_pos[1]]);
  if (state.trail.length > HISTORY_CAPACITY) state.trail.shift();
}

/** Once-per-second consistency check: the marker the operator sees must
 * match the last goal acknowledged in telemetry. */
export function markerConsistent(state: SessionState, tolerance = 0.05): boolean {
  const [mx, my] = state.goalMarker;
  const [ax, ay] = state.goalAcknowledged;
  return Math.abs(mx - ax) <= tolerance && Math.abs(my - ay) <= tolerance;
}
