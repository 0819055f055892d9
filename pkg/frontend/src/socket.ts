// Telemetry socket with capped-backoff reconnect.  Rendering never waits
// on this: frames land in the session store and the UI draws whatever is
// newest.

import { Command, parseFrame, TelemetryFrame } from "./wire.js";

export interface SocketHandlers {
  onFrame: (frame: TelemetryFrame) => void;
  onStatus: (open: boolean) => void;
}

export class TelemetrySocket {
  private ws: WebSocket | null = null;
  private closed = false;
  private retryMs = 500;

  constructor(private url: string, private handlers: SocketHandlers) {}

  connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.retryMs = 500;
      this.handlers.onStatus(true);
    };
    this.ws.onmessage = (event) => {
      let data: unknown;
      try {
        data = JSON.parse(event.data as string);
      } catch {
        return; // non-JSON frames are ignored
      }
      const frame = parseFrame(data);
      if (frame) this.handlers.onFrame(frame);
    };
    this.ws.onclose = () => {
      this.handlers.onStatus(false);
      if (!this.closed) {
        setTimeout(() => this.connect(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 8000);
      }
    };
    this.ws.onerror = () => { /* onclose drives the reconnect */ };
  }

  send(cmd: Command): boolean {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(cmd));
      return true;
    }
    return false;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
