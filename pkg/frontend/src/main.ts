import { cameraFor, drawArena, screenToGoal } from "./arena.js";
import { drawContactTimeline, drawStripChart, drawWeightBars, SKILL_COLORS } from "./charts.js";
import { GoalSender } from "./ratelimit.js";
import { applyFrame, createState, markerConsistent } from "./state.js";
import { TelemetrySocket } from "./socket.js";
import { pushCommand, resetCommand } from "./wire.js";

const state = createState();

const arena = document.getElementById("arena") as HTMLCanvasElement;
const weightsCanvas = document.getElementById("weights") as HTMLCanvasElement;
const speedCanvas = document.getElementById("speed") as HTMLCanvasElement;
const attitudeCanvas = document.getElementById("attitude") as HTMLCanvasElement;
const contactsCanvas = document.getElementById("contacts") as HTMLCanvasElement;
const statusEl = document.getElementById("status")!;
const gaitEl = document.getElementById("gait")!;
const speedEl = document.getElementById("speed-value")!;
const magnitudeEl = document.getElementById("push-magnitude") as HTMLInputElement;
const warnEl = document.getElementById("warning")!;

const wsUrl = location.origin.replace(/^http/, "ws") + "/ws";
const socket = new TelemetrySocket(wsUrl, {
  onFrame: (frame) => applyFrame(state, frame),
  onStatus: (open) => {
    state.connection = open ? "open" : "closed";
    goals.setOnline(open);
  },
});
const goals = new GoalSender((cmd) => socket.send(cmd));
socket.connect();

// drag to place the goal
let dragging = false;
function pointerGoal(event: PointerEvent): void {
  const rect = arena.getBoundingClientRect();
  const cam = cameraFor(state, arena.width, arena.height);
  const [gx, gy] = screenToGoal(state, cam, arena.width, arena.height,
                                event.clientX - rect.left, event.clientY - rect.top);
  state.goalMarker = [Math.max(-1, Math.min(1, gx)), Math.max(-1, Math.min(1, gy))];
  goals.update(gx, gy);
}
arena.addEventListener("pointerdown", (e) => {
  dragging = true;
  arena.setPointerCapture(e.pointerId);
  pointerGoal(e);
});
arena.addEventListener("pointermove", (e) => {
  if (dragging) pointerGoal(e);
});
arena.addEventListener("pointerup", () => {
  dragging = false;
});

function sendPush(direction: [number, number, number]): void {
  const magnitude = Number(magnitudeEl.value);
  const cmd = pushCommand(direction[0] * magnitude, direction[1] * magnitude,
                          direction[2] * magnitude);
  if (cmd) socket.send(cmd);
}
document.getElementById("push-lateral")!.addEventListener("click", () => sendPush([0, 1, 0]));
document.getElementById("push-forward")!.addEventListener("click", () => sendPush([1, 0, 0]));
document.getElementById("reset")!.addEventListener("click", () => socket.send(resetCommand()));

// goal-marker/telemetry consistency check, once per second
setInterval(() => {
  if (state.connection === "open" && state.latest && !markerConsistent(state)) {
    state.goalMarker = [...state.goalAcknowledged];
  }
  warnEl.textContent = state.badWeightFrames > 0
    ? `${state.badWeightFrames} frames with bad weight sums`
    : "";
}, 1000);

function render(): void {
  drawArena(arena.getContext("2d")!, state);
  drawWeightBars(weightsCanvas.getContext("2d")!, state.latest ? state.latest.weights : null);
  drawStripChart(speedCanvas.getContext("2d")!, "speed (m/s)", [
    { label: "true", color: "#4dd0e1", values: state.history.speedTrue },
    { label: "estimated", color: "#ffca28", values: state.history.speedEst },
  ], state.history.t);
  drawStripChart(attitudeCanvas.getContext("2d")!, "roll / pitch (rad)", [
    { label: "roll", color: "#e4572e", values: state.history.roll },
    { label: "pitch", color: "#66bb6a", values: state.history.pitch },
  ], state.history.t);
  drawContactTimeline(contactsCanvas.getContext("2d")!, state.history.contacts,
                      state.history.refGait);

  statusEl.textContent = state.connection;
  statusEl.className = state.connection;
  if (state.latest) {
    gaitEl.textContent = state.latest.ref_gait;
    gaitEl.style.color = SKILL_COLORS[["recovery", "trot", "pace", "bound", "gallop"]
      .indexOf(state.latest.ref_gait)] ?? "#c7d4e0";
    speedEl.textContent = state.latest.speed_true.toFixed(2) + " m/s";
  }
  requestAnimationFrame(render);
}
requestAnimationFrame(render);
