/**
 * WebSocket client with automatic reconnect.
 *
 * The socket factory is injectable so the reconnect logic is testable
 * without a browser or a live server.
 */

export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
  readyState: number;
}

export type SocketFactory = (url: string) => SocketLike;

export const RECONNECT_DELAY_MS = 1000;

export class PipelineClient {
  private socket: SocketLike | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  reconnects = 0;

  onText: (text: string) => void = () => {};
  onStatus: (connected: boolean) => void = () => {};

  constructor(
    private readonly url: string,
    private readonly factory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
    private readonly reconnectDelayMs: number = RECONNECT_DELAY_MS,
  ) {}

  connect(): void {
    this.stopped = false;
    this.open();
  }

  private open(): void {
    let sock: SocketLike;
    try {
      sock = this.factory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = sock;
    sock.onopen = () => this.onStatus(true);
    sock.onmessage = (ev) => {
      if (typeof ev.data === "string") this.onText(ev.data);
    };
    sock.onclose = () => {
      this.onStatus(false);
      this.socket = null;
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped || this.reconnectTimer !== null) return;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      if (!this.stopped) {
        this.reconnects++;
        this.open();
      }
    }, this.reconnectDelayMs);
  }

  send(text: string): boolean {
    if (this.socket && this.socket.readyState === 1) {
      try {
        this.socket.send(text);
        return true;
      } catch {
        return false;
      }
    }
    return false;
  }

  close(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
    this.socket = null;
  }
}
