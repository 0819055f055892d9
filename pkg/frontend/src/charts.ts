// Canvas side panels: stacked expert-weight bars, speed and roll/pitch
// strip charts, and a 4-row live contact timeline.

import { HistoryBuffers } from "./state.js";
import { weightsSumOk } from "./wire.js";

export const SKILL_NAMES = ["recovery", "trot", "pace", "bound", "gallop"];
export const SKILL_COLORS = ["#e4572e", "#29b6f6", "#9575cd", "#66bb6a", "#ffca28"];
const FOOT_NAMES = ["FR", "FL", "RR", "RL"];

function clearPanel(ctx: CanvasRenderingContext2D, title: string): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#0f141a";
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = "#8fa3b8";
  ctx.font = "11px system-ui, sans-serif";
  ctx.fillText(title, 8, 14);
}

export function drawWeightBars(ctx: CanvasRenderingContext2D, weights: number[] | null): void {
  clearPanel(ctx, "expert weights");
  if (!weights) return;
  const { width, height } = ctx.canvas;
  const barLeft = 70;
  const barWidth = width - barLeft - 46;
  const rowHeight = (height - 26) / 5;
  for (let i = 0; i < 5; i++) {
    const y = 22 + i * rowHeight;
    ctx.fillStyle = "#8fa3b8";
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillText(SKILL_NAMES[i], 8, y + rowHeight / 2 + 3);
    ctx.fillStyle = "#1d2733";
    ctx.fillRect(barLeft, y + 2, barWidth, rowHeight - 6);
    ctx.fillStyle = SKILL_COLORS[i];
    ctx.fillRect(barLeft, y + 2, barWidth * Math.max(0, Math.min(1, weights[i])), rowHeight - 6);
    ctx.fillStyle = "#c7d4e0";
    ctx.fillText(weights[i].toFixed(2), barLeft + barWidth + 6, y + rowHeight / 2 + 3);
  }
  if (!weightsSumOk(weights)) {
    ctx.fillStyle = "#ff5252";
    ctx.fillText("weights do not sum to 1", barLeft, 14);
  }
}

export function drawStripChart(ctx: CanvasRenderingContext2D, title: string,
                               series: { label: string; color: string; values: (number | null)[] }[],
                               t: number[]): void {
  clearPanel(ctx, title);
  const { width, height } = ctx.canvas;
  if (t.length < 2) return;
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const v of s.values) {
      if (v === null) continue;
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (!Number.isFinite(lo)) return;
  if (hi - lo < 1e-6) {
    hi += 0.5;
    lo -= 0.5;
  }
  const pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  const x0 = 8;
  const plotWidth = width - 16;
  const y0 = 20;
  const plotHeight = height - 28;
  const toX = (i: number) => x0 + (plotWidth * i) / (t.length - 1);
  const toY = (v: number) => y0 + plotHeight * (1 - (v - lo) / (hi - lo));
  ctx.strokeStyle = "#26313d";
  ctx.beginPath();
  ctx.moveTo(x0, toY(0));
  ctx.lineTo(x0 + plotWidth, toY(0));
  ctx.stroke();
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.4;
    ctx.beginPath();
    let drawing = false;
    for (let i = 0; i < s.values.length; i++) {
      const v = s.values[i];
      if (v === null) {
        drawing = false;
        continue;
      }
      if (!drawing) {
        ctx.moveTo(toX(i), toY(v));
        drawing = true;
      } else {
        ctx.lineTo(toX(i), toY(v));
      }
    }
    ctx.stroke();
  }
  ctx.fillStyle = "#8fa3b8";
  ctx.font = "10px system-ui, sans-serif";
  ctx.fillText(hi.toFixed(2), width - 40, y0 + 8);
  ctx.fillText(lo.toFixed(2), width - 40, y0 + plotHeight);
  let lx = 70;
  for (const s of series) {
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, lx, 14);
    lx += ctx.measureText(s.label).width + 14;
  }
}

export function drawContactTimeline(ctx: CanvasRenderingContext2D, contacts: boolean[][],
                                    refGait: string[]): void {
  clearPanel(ctx, `contacts${refGait.length ? "  (ref: " + refGait[refGait.length - 1] + ")" : ""}`);
  const { width, height } = ctx.canvas;
  const left = 32;
  const plotWidth = width - left - 8;
  const rowHeight = (height - 26) / 4;
  const n = contacts[0].length;
  if (n === 0) return;
  const cell = plotWidth / Math.max(n, 1);
  for (let row = 0; row < 4; row++) {
    const y = 22 + row * rowHeight;
    ctx.fillStyle = "#8fa3b8";
    ctx.font = "10px system-ui, sans-serif";
    ctx.fillText(FOOT_NAMES[row], 8, y + rowHeight / 2 + 3);
    ctx.fillStyle = "#1d2733";
    ctx.fillRect(left, y + 2, plotWidth, rowHeight - 5);
    ctx.fillStyle = "#4dd0e1";
    for (let i = 0; i < n; i++) {
      if (contacts[row][i]) {
        ctx.fillRect(left + i * cell, y + 2, Math.max(cell, 1), rowHeight - 5);
      }
    }
  }
}
