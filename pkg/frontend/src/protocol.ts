/**
 * Wire protocol for the kitchen play service.
 *
 * JSON text frames over a websocket at /ws/play. The client sends `join`,
 * then `start`, then `input` frames; the server streams one `state` frame
 * per tick and finishes with `episode_end`. Every server frame carries the
 * session id and a per-session monotone `seq`; client frames after `join`
 * carry the session id and a client-side monotone `seq` (the server drops
 * frames whose seq is not above the last one it saw).
 */

export type Action = "up" | "down" | "left" | "right" | "stay" | "interact";

export const ACTIONS: readonly Action[] = [
  "up", "down", "left", "right", "stay", "interact",
];

/** One chef's heading, as sent by the server. */
export type Orientation = "N" | "S" | "E" | "W";

/** Per-tick world snapshot inside a `state` frame. */
export interface Snapshot {
  tick: number;
  /** [row, col] per chef, chef 0 first. */
  positions: [number, number][];
  orientations: Orientation[];
  /** "nothing" | "onion" | "dish" | "soup" per chef. */
  held: string[];
  /** [onion count, ticks until ready | null] per pot, grid order. */
  pots: [number, number | null][];
  /** Item resting on each droppable counter cell (grid order) or null. */
  counters: (string | null)[];
}

export interface LayoutSummary {
  name: string;
  grid: string[];
  cook_time: number;
  horizon: number;
}

export type SessionStatus = "lobby" | "running" | "finished";

export interface StateFrame {
  type: "state";
  session: string;
  seq: number;
  tick: number;
  score: number;
  status: SessionStatus;
  state: Snapshot;
  /** Present on the first (lobby) frame only. */
  layout?: LayoutSummary;
  horizon?: number;
}

export interface EpisodeEndFrame {
  type: "episode_end";
  session: string;
  seq: number;
  total_reward: number;
}

export interface ErrorFrame {
  type: "error";
  session: string | null;
  seq: number;
  text: string;
}

export type ServerFrame = StateFrame | EpisodeEndFrame | ErrorFrame;

export interface JoinOptions {
  layout: string;
  checkpoint: string;
  human_seat: 0 | 1;
  horizon?: number;
  tick_rate?: number;
  seed?: number;
}

/**
 * Minimal socket surface shared by the browser WebSocket and the `ws`
 * package, injected as a factory so tests can substitute fakes.
 */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev?: any) => void) | null;
  onerror: ((ev?: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientHandlers {
  onFrame(frame: ServerFrame): void;
  onClose?(): void;
}

/**
 * Thin protocol client: owns the socket, the session id learned from the
 * first `state` frame, and the outgoing monotone sequence counter. All
 * inbound frames are parsed and handed to `handlers.onFrame`; game state
 * itself lives in the reducer (state.ts), never here.
 */
export class PlayClient {
  session: string | null = null;
  private socket: SocketLike | null = null;
  private clientSeq = 0;
  private lastJoin: JoinOptions | null = null;

  constructor(
    private readonly url: string,
    private readonly factory: SocketFactory,
    private readonly handlers: ClientHandlers,
  ) {}

  /** Open the socket; resolves once connected, rejects if refused. */
  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      let settled = false;
      const socket = this.factory(this.url);
      this.socket = socket;
      socket.onopen = () => {
        settled = true;
        resolve();
      };
      socket.onerror = () => {
        if (!settled) {
          settled = true;
          reject(new Error(`connection to ${this.url} failed`));
        }
      };
      socket.onclose = () => {
        if (!settled) {
          settled = true;
          reject(new Error(`connection to ${this.url} closed before open`));
        }
        this.handlers.onClose?.();
      };
      socket.onmessage = (ev: any) => {
        let frame: ServerFrame;
        try {
          frame = JSON.parse(String(ev.data));
        } catch {
          return; // non-JSON frame: ignore, the server never sends these
        }
        if (frame.type === "state" && this.session !== frame.session) {
          this.session = frame.session; // fresh session (join or rejoin)
        }
        this.handlers.onFrame(frame);
      };
    });
  }

  /**
   * Drop the current socket and connect again. With `rejoin` (the
   * default), re-issue the previous join so rendering resumes from the
   * next snapshot the new session produces; without it, the caller joins
   * explicitly (e.g. with fresh lobby selections).
   */
  async reconnect(rejoin = true): Promise<void> {
    if (this.socket) {
      this.socket.onclose = null; // silent teardown, not a surprise drop
      this.socket.close();
    }
    this.session = null;
    this.clientSeq = 0;
    await this.connect();
    if (rejoin && this.lastJoin) {
      this.join(this.lastJoin);
    }
  }

  join(opts: JoinOptions): void {
    this.lastJoin = opts;
    this.send({ type: "join", ...opts });
  }

  start(): void {
    this.sendInSession({ type: "start" });
  }

  input(action: Action): void {
    this.sendInSession({ type: "input", action });
  }

  quit(): void {
    this.sendInSession({ type: "quit" });
  }

  close(): void {
    this.socket?.close();
  }

  private send(payload: Record<string, unknown>): void {
    if (!this.socket) {
      throw new Error("not connected");
    }
    this.socket.send(JSON.stringify(payload));
  }

  private sendInSession(payload: Record<string, unknown>): void {
    if (this.session === null) {
      throw new Error("no session joined");
    }
    this.clientSeq += 1;
    this.send({ ...payload, session: this.session, seq: this.clientSeq });
  }
}
