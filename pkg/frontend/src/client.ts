/** WebSocket teleop client: request/response matching, reconnect with
 * exponential backoff, a latest-state frame buffer, and a session log that
 * mirrors exactly what the server acknowledged.
 *
 * The socket constructor is injectable so the client is testable without a
 * browser or a live server.
 */
import {
  framePoints,
  isHello,
  isResponse,
  isStateFrame,
  parseServerMessage,
  type Caps,
  type Request,
  type Response,
  type StateFrame,
} from "./protocol.js";
import type { Vec3 } from "./math.js";

export type ConnectionStatus = "connecting" | "connected" | "reconnecting" | "closed";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface LogEntry {
  direction: "sent" | "received";
  message: Record<string, unknown>;
  at: number; // ms timestamp
}

export interface BackoffOptions {
  baseMs: number;
  maxMs: number;
}

/** Exponential backoff schedule: base * 2^attempt, capped. */
export function backoffDelay(attempt: number, opts: BackoffOptions): number {
  return Math.min(opts.baseMs * 2 ** attempt, opts.maxMs);
}

export class TeleopClient {
  status: ConnectionStatus = "closed";
  role: "driver" | "observer" | null = null;
  caps: Caps | null = null;
  /** Only the newest state frame is kept; rendering never lags behind. */
  latestFrame: StateFrame | null = null;
  readonly log: LogEntry[] = [];

  onStatus: ((status: ConnectionStatus) => void) | null = null;
  onFrame: ((frame: StateFrame) => void) | null = null;

  private socket: SocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, (r: Response) => void>();
  private reconnectAttempt = 0;
  private closedByUser = false;

  constructor(
    private url: string,
    private makeSocket: SocketFactory,
    private backoff: BackoffOptions = { baseMs: 500, maxMs: 10_000 },
    private schedule: (fn: () => void, ms: number) => void = (fn, ms) => setTimeout(fn, ms),
    private now: () => number = () => Date.now(),
  ) {}

  connect(): void {
    this.closedByUser = false;
    this.setStatus(this.reconnectAttempt === 0 ? "connecting" : "reconnecting");
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.reconnectAttempt = 0;
      this.setStatus("connected");
    };
    socket.onmessage = (event) => this.handleMessage(event.data);
    socket.onerror = () => {
      /* onclose follows; nothing to do here */
    };
    socket.onclose = () => {
      this.socket = null;
      this.failPending("connection closed");
      if (this.closedByUser) {
        this.setStatus("closed");
        return;
      }
      this.setStatus("reconnecting");
      const delay = backoffDelay(this.reconnectAttempt, this.backoff);
      this.reconnectAttempt += 1;
      this.schedule(() => {
        if (!this.closedByUser) this.connect();
      }, delay);
    };
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
    this.socket = null;
    this.setStatus("closed");
  }

  /** Send a request; resolves with the id-matched response. */
  request(req: Request): Promise<Response> {
    if (!this.socket || this.status !== "connected") {
      return Promise.resolve({
        ok: false,
        error: { code: "NotConnected", message: "socket is not connected" },
      });
    }
    const id = this.nextId++;
    const payload = { ...req, id };
    this.log.push({ direction: "sent", message: payload, at: this.now() });
    this.socket.send(JSON.stringify(payload));
    return new Promise((resolve) => {
      this.pending.set(id, resolve);
    });
  }

  /** Latest frame's particle positions as [x, y, z] triples. */
  points(): Vec3[] {
    return this.latestFrame ? framePoints(this.latestFrame) : [];
  }

  private handleMessage(raw: string): void {
    let msg;
    try {
      msg = parseServerMessage(raw);
    } catch {
      return; // ignore unparseable frames; the server never sends these
    }
    if (isStateFrame(msg)) {
      this.latestFrame = msg;
      this.onFrame?.(msg);
      return;
    }
    this.log.push({
      direction: "received",
      message: msg as unknown as Record<string, unknown>,
      at: this.now(),
    });
    if (isHello(msg)) {
      this.role = msg.role;
      this.caps = msg.caps;
      return;
    }
    if (isResponse(msg) && typeof msg.id === "number") {
      const resolve = this.pending.get(msg.id);
      if (resolve) {
        this.pending.delete(msg.id);
        resolve(msg);
      }
    }
  }

  private failPending(message: string): void {
    for (const resolve of this.pending.values()) {
      resolve({ ok: false, error: { code: "Disconnected", message } });
    }
    this.pending.clear();
  }

  private setStatus(status: ConnectionStatus): void {
    this.status = status;
    this.onStatus?.(status);
  }
}
