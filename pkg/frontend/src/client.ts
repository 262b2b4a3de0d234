// WebSocket session: validates every outgoing command, numbers it, and
// feeds parsed server messages into callbacks. Reconnects with backoff.

import { Command, Hello, StateMessage, parseServerMessage } from "./protocol.js";

// Omit that distributes over a discriminated union
type DistributiveOmit<T, K extends keyof never> =
  T extends unknown ? Omit<T, K> : never;

export type OutgoingCommand = DistributiveOmit<Command, "seq" | "proto">;

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientCallbacks {
  onHello?: (hello: Hello) => void;
  onState?: (state: StateMessage) => void;
  onError?: (detail: string) => void;
  onStatus?: (status: "connecting" | "open" | "closed") => void;
}

export class ConsoleClient {
  private socket: SocketLike | null = null;
  private seq = 0;
  private retryDelay = 0.5;
  private closed = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private callbacks: ClientCallbacks,
    private factory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect() {
    this.closed = false;
    this.callbacks.onStatus?.("connecting");
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.retryDelay = 0.5;
      this.callbacks.onStatus?.("open");
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    sock.onerror = () => undefined;
    sock.onclose = () => {
      this.socket = null;
      this.callbacks.onStatus?.("closed");
      if (!this.closed) {
        this.reconnectTimer = setTimeout(() => this.connect(), this.retryDelay * 1000);
        this.retryDelay = Math.min(this.retryDelay * 2, 5);
      }
    };
  }

  close() {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
    this.socket = null;
  }

  get connected(): boolean {
    return this.socket !== null;
  }

  private handleMessage(raw: string) {
    let msg;
    try {
      msg = parseServerMessage(raw);
    } catch (e) {
      this.callbacks.onError?.(`unreadable server frame: ${e}`);
      return;
    }
    if (msg.type === "hello") this.callbacks.onHello?.(msg);
    else if (msg.type === "state") this.callbacks.onState?.(msg);
    else if (msg.type === "error") this.callbacks.onError?.(msg.detail);
  }

  // Validates and numbers a command; returns the seq or null when not
  // connected / invalid. Nothing leaves the console unchecked.
  send(partial: OutgoingCommand): number | null {
    if (!this.socket) return null;
    const candidate = { ...partial, proto: 1, seq: this.seq + 1 };
    const checked = Command.safeParse(candidate);
    if (!checked.success) {
      this.callbacks.onError?.(`refusing invalid command: ${checked.error.message}`);
      return null;
    }
    this.seq += 1;
    this.socket.send(JSON.stringify(checked.data));
    return this.seq;
  }
}
