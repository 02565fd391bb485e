// WebSocket connection with the login handshake and reconnect backoff.
// The socket constructor and the timer functions are injectable so the
// whole state machine is testable without a browser or a server.

import { loginFrame, parseFrame, userMessageFrame, type Frame } from "./protocol.js";

export type ConnectionState =
  | "idle"
  | "connecting"
  | "logging_in"
  | "open"
  | "reconnect_wait"
  | "stopped";

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => WebSocketLike;
export type Scheduler = (fn: () => void, delayMs: number) => unknown;
export type Canceller = (handle: unknown) => void;

export interface ConnectionOptions {
  socketFactory?: SocketFactory;
  schedule?: Scheduler;
  cancel?: Canceller;
  baseDelayMs?: number;
  maxDelayMs?: number;
}

export function backoffDelay(attempt: number, baseMs: number, maxMs: number): number {
  // 1st retry after baseMs, doubling, capped
  const delay = baseMs * Math.pow(2, Math.max(0, attempt));
  return Math.min(delay, maxMs);
}

export class ChatConnection {
  onFrame: (frame: Frame) => void = () => {};
  onState: (state: ConnectionState) => void = () => {};
  onLoginOk: (name: string) => void = () => {};
  onLoginDenied: (reason: string) => void = () => {};

  private url: string;
  private factory: SocketFactory;
  private schedule: Scheduler;
  private cancel: Canceller;
  private baseDelayMs: number;
  private maxDelayMs: number;

  private socket: WebSocketLike | null = null;
  private pendingTimer: unknown = null;
  private name: string | null = null;
  private attempts = 0;
  state: ConnectionState = "idle";

  constructor(url: string, options: ConnectionOptions = {}) {
    this.url = url;
    this.factory =
      options.socketFactory ??
      ((u) => new WebSocket(u) as unknown as WebSocketLike);
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancel = options.cancel ?? ((handle) => clearTimeout(handle as number));
    this.baseDelayMs = options.baseDelayMs ?? 500;
    this.maxDelayMs = options.maxDelayMs ?? 8000;
  }

  private setState(state: ConnectionState): void {
    this.state = state;
    this.onState(state);
  }

  /** Request login under this name, connecting first if needed. */
  login(name: string): void {
    this.name = name;
    if (this.socket === null) {
      this.connect();
      return;
    }
    if (this.state === "logging_in" || this.state === "open") {
      this.socket.send(loginFrame(name));
    }
  }

  sendMessage(text: string): boolean {
    if (this.state !== "open" || this.socket === null || !text.trim()) {
      return false;
    }
    this.socket.send(userMessageFrame(text));
    return true;
  }

  stop(): void {
    this.name = null;
    if (this.pendingTimer !== null) {
      this.cancel(this.pendingTimer);
      this.pendingTimer = null;
    }
    const socket = this.socket;
    this.socket = null;
    if (socket !== null) {
      socket.close();
    }
    this.setState("stopped");
  }

  private connect(): void {
    this.setState("connecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      if (this.socket !== socket) {
        return;
      }
      this.setState("logging_in");
      if (this.name !== null) {
        socket.send(loginFrame(this.name));
      }
    };
    socket.onmessage = (event) => {
      if (this.socket !== socket) {
        return;
      }
      const frame = parseFrame(event.data);
      if (frame === null) {
        console.warn("dropped malformed frame", event.data);
        return;
      }
      this.handleFrame(frame);
    };
    socket.onclose = () => {
      if (this.socket !== socket) {
        return;
      }
      this.socket = null;
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      // the close handler owns recovery; errors alone are not actionable
    };
  }

  private handleFrame(frame: Frame): void {
    if (frame.type === "login_ok") {
      this.attempts = 0;
      this.setState("open");
      this.onLoginOk(frame.sender);
      return;
    }
    if (frame.type === "login_denied") {
      // stay connected; the server allows another attempt on this socket
      this.onLoginDenied(frame.text);
      return;
    }
    this.onFrame(frame);
  }

  private scheduleReconnect(): void {
    if (this.name === null) {
      this.setState("stopped");
      return;
    }
    const delay = backoffDelay(this.attempts, this.baseDelayMs, this.maxDelayMs);
    this.attempts += 1;
    this.setState("reconnect_wait");
    this.pendingTimer = this.schedule(() => {
      this.pendingTimer = null;
      if (this.name !== null) {
        this.connect();
      }
    }, delay);
  }
}
