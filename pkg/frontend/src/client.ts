/**
 * WebSocket glue for the three engine channels.
 *
 * The socket implementation is injected so the same class runs in the
 * browser (native WebSocket) and under node tests (the `ws` package,
 * which exposes the same onopen/onmessage/onclose surface).
 */

import { SessionStore } from "./store.js";
import { reconnectDelayMs } from "./backoff.js";

export interface WsLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WsFactory = (url: string) => WsLike;

export interface ClientOptions {
  wsFactory: WsFactory;
  onAudio?: (chunk: ArrayBuffer) => void;
  onControlReply?: (reply: Record<string, unknown>) => void;
  setTimer?: (fn: () => void, ms: number) => unknown;
  now?: () => number;
}

export type ChannelName = "state" | "audio" | "control";

export class SessionClient {
  readonly baseUrl: string;
  readonly store: SessionStore;
  connected = false;
  attempts = 0;
  private readonly opts: ClientOptions;
  private sockets: Partial<Record<ChannelName, WsLike>> = {};
  private closedByUser = false;
  private readonly now: () => number;

  constructor(baseUrl: string, store: SessionStore, opts: ClientOptions) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.store = store;
    this.opts = opts;
    this.now = opts.now ?? (() => Date.now());
  }

  connect(): void {
    this.closedByUser = false;
    this.openChannel("state");
    this.openChannel("audio");
    this.openChannel("control");
  }

  close(): void {
    this.closedByUser = true;
    for (const ws of Object.values(this.sockets)) {
      try {
        ws.close();
      } catch {
        // already gone
      }
    }
    this.sockets = {};
    this.connected = false;
  }

  sendCommand(cmd: object): boolean {
    const ws = this.sockets.control;
    if (!ws || !this.connected) return false; // dropped while disconnected
    try {
      ws.send(JSON.stringify(cmd));
      return true;
    } catch {
      return false;
    }
  }

  nextReconnectDelayMs(): number {
    return reconnectDelayMs(this.attempts);
  }

  private openChannel(name: ChannelName): void {
    const ws = this.opts.wsFactory(`${this.baseUrl}/${name}`);
    this.sockets[name] = ws;
    if (name === "audio") ws.binaryType = "arraybuffer";
    ws.onopen = () => {
      if (name === "state") {
        this.connected = true;
        this.attempts = 0;
      }
    };
    ws.onmessage = (ev) => this.dispatch(name, ev.data);
    ws.onerror = () => undefined;
    ws.onclose = () => {
      delete this.sockets[name];
      if (name === "state") {
        this.connected = false;
        if (!this.closedByUser) this.scheduleReconnect();
      }
    };
  }

  private dispatch(name: ChannelName, data: unknown): void {
    if (name === "state" && typeof data === "string") {
      this.store.update(data, this.now());
    } else if (name === "state" && data instanceof Uint8Array) {
      this.store.update(new TextDecoder().decode(data), this.now());
    } else if (name === "audio" && this.opts.onAudio) {
      if (data instanceof ArrayBuffer) {
        this.opts.onAudio(data);
      } else if (ArrayBuffer.isView(data as ArrayBufferView)) {
        const view = data as ArrayBufferView;
        this.opts.onAudio(
          view.buffer.slice(view.byteOffset, view.byteOffset + view.byteLength) as ArrayBuffer,
        );
      }
    } else if (name === "control" && this.opts.onControlReply) {
      try {
        this.opts.onControlReply(JSON.parse(String(data)));
      } catch {
        // junk replies are dropped
      }
    }
  }

  private scheduleReconnect(): void {
    const delay = this.nextReconnectDelayMs();
    this.attempts += 1;
    const timer = this.opts.setTimer ?? ((fn: () => void, ms: number) => setTimeout(fn, ms));
    timer(() => {
      if (!this.closedByUser) this.connect();
    }, delay);
  }
}
