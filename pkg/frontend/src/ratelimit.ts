// Goal-message rate limiting: at most one set_goal per window (50 ms),
// latest value wins; while disconnected a single latest value is queued
// and flushed on reconnect.

import { Command, goalCommand } from "./wire.js";

export const GOAL_INTERVAL_MS = 50;

type Send = (cmd: Command) => void;
type Clock = () => number;
type Timer = (fn: () => void, ms: number) => ReturnType<typeof setTimeout>;

export class GoalSender {
  private lastSent = -Infinity;
  private pending: [number, number] | null = null;
  private queuedOffline: [number, number] | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private online = false;
  sentCount = 0;

  constructor(
    private send: Send,
    private now: Clock = () => Date.now(),
    private schedule: Timer = (fn, ms) => setTimeout(fn, ms),
    private cancel: (t: ReturnType<typeof setTimeout>) => void = clearTimeout,
  ) {}

  setOnline(online: boolean): void {
    this.online = online;
    if (online && this.queuedOffline) {
      const [x, y] = this.queuedOffline;
      this.queuedOffline = null;
      this.update(x, y);
    }
  }

  /** Operator moved the goal marker. */
  update(x: number, y: number): void {
    if (!this.online) {
      this.queuedOffline = [x, y];
      return;
    }
    const elapsed = this.now() - this.lastSent;
    if (elapsed >= GOAL_INTERVAL_MS && this.timer === null) {
      this.emit(x, y);
      return;
    }
    // inside the quiet window: keep only the latest, arm one trailing send
    this.pending = [x, y];
    if (this.timer === null) {
      this.timer = this.schedule(() => this.fire(), Math.max(0, GOAL_INTERVAL_MS - elapsed));
    }
  }

  private fire(): void {
    this.timer = null;
    if (this.pending !== null) {
      const [x, y] = this.pending;
      this.pending = null;
      this.emit(x, y);
    }
  }

  private emit(x: number, y: number): void {
    this.lastSent = this.now();
    this.sentCount += 1;
    this.send(goalCommand(x, y));
  }

  dispose(): void {
    if (this.timer !== null) this.cancel(this.timer);
    this.timer = null;
  }
}
