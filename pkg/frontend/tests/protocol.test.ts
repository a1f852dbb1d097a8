/** PlayClient: framing, session adoption, monotone client seq, reconnect. */

import { describe, expect, it } from "vitest";

import { PlayClient } from "../src/protocol.js";
import type { ServerFrame, SocketLike } from "../src/protocol.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: any) => void) | null = null;
  onmessage: ((ev: any) => void) | null = null;
  onclose: ((ev?: any) => void) | null = null;
  onerror: ((ev?: any) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
  }

  open(): void {
    this.onopen?.();
  }

  deliver(payload: unknown): void {
    this.onmessage?.({
      data: typeof payload === "string" ? payload : JSON.stringify(payload),
    });
  }

  drop(): void {
    this.onclose?.();
  }

  lastSent(): Record<string, unknown> {
    return JSON.parse(this.sent[this.sent.length - 1]);
  }
}

function harness() {
  const sockets: FakeSocket[] = [];
  const frames: ServerFrame[] = [];
  let closes = 0;
  const client = new PlayClient(
    "ws://test/ws/play",
    () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    {
      onFrame: (f) => frames.push(f),
      onClose: () => {
        closes += 1;
      },
    },
  );
  return {
    client,
    sockets,
    frames,
    closes: () => closes,
    socket: () => sockets[sockets.length - 1],
  };
}

function lobbyFrame(session: string) {
  return {
    type: "state",
    session,
    seq: 1,
    tick: 0,
    score: 0,
    status: "lobby",
    state: {
      tick: 0,
      positions: [
        [1, 1],
        [1, 2],
      ],
      orientations: ["S", "S"],
      held: ["nothing", "nothing"],
      pots: [[0, null]],
      counters: [],
    },
    layout: {
      name: "cramped_small",
      grid: ["XOPDX", "X   X", "S   X", "XXXXX"],
      cook_time: 20,
      horizon: 200,
    },
    horizon: 60,
  };
}

describe("PlayClient", () => {
  it("connect resolves on open and rejects when refused", async () => {
    const h = harness();
    const pending = h.client.connect();
    h.socket().open();
    await expect(pending).resolves.toBeUndefined();

    const h2 = harness();
    const refused = h2.client.connect();
    h2.socket().onerror?.();
    await expect(refused).rejects.toThrow("failed");
  });

  it("join carries the options and no session id", async () => {
    const h = harness();
    const pending = h.client.connect();
    h.socket().open();
    await pending;
    h.client.join({
      layout: "cramped_small",
      checkpoint: "demo.ckpt",
      human_seat: 1,
      horizon: 60,
      seed: 7,
    });
    expect(h.socket().lastSent()).toEqual({
      type: "join",
      layout: "cramped_small",
      checkpoint: "demo.ckpt",
      human_seat: 1,
      horizon: 60,
      seed: 7,
    });
  });

  it("learns the session from the first state frame; later frames carry it with a monotone seq", async () => {
    const h = harness();
    const pending = h.client.connect();
    h.socket().open();
    await pending;
    h.client.join({ layout: "l", checkpoint: "c", human_seat: 0 });
    h.socket().deliver(lobbyFrame("s1"));
    expect(h.client.session).toBe("s1");

    h.client.start();
    h.client.input("up");
    h.client.input("left");
    h.client.quit();
    const [start, up, left, quit] = h.socket().sent.slice(1).map((s) => JSON.parse(s));
    expect(start).toEqual({ type: "start", session: "s1", seq: 1 });
    expect(up).toEqual({ type: "input", action: "up", session: "s1", seq: 2 });
    expect(left).toEqual({ type: "input", action: "left", session: "s1", seq: 3 });
    expect(quit).toEqual({ type: "quit", session: "s1", seq: 4 });
  });

  it("refuses session frames before a session exists", async () => {
    const h = harness();
    const pending = h.client.connect();
    h.socket().open();
    await pending;
    expect(() => h.client.start()).toThrow("no session");
    expect(() => h.client.input("up")).toThrow("no session");
  });

  it("hands parsed frames to the handler and ignores non-JSON data", async () => {
    const h = harness();
    const pending = h.client.connect();
    h.socket().open();
    await pending;
    h.socket().deliver(lobbyFrame("s1"));
    h.socket().deliver("not json at all {");
    h.socket().deliver({ type: "error", session: "s1", seq: 2, text: "boom" });
    expect(h.frames.map((f) => f.type)).toEqual(["state", "error"]);
  });

  it("reports unexpected drops through onClose", async () => {
    const h = harness();
    const pending = h.client.connect();
    h.socket().open();
    await pending;
    h.socket().drop();
    expect(h.closes()).toBe(1);
  });

  it("reconnect rejoins with the previous options and resets seq + session", async () => {
    const h = harness();
    const pending = h.client.connect();
    h.socket().open();
    await pending;
    h.client.join({ layout: "cramped_small", checkpoint: "demo.ckpt", human_seat: 0 });
    h.socket().deliver(lobbyFrame("s1"));
    h.client.start();

    const first = h.socket();
    const reconnecting = h.client.reconnect();
    h.socket().open(); // factory produced a second socket
    await reconnecting;
    expect(h.sockets.length).toBe(2);
    expect(first.closed).toBe(true);
    expect(h.closes()).toBe(0); // silent teardown, no surprise-drop report

    // the rejoin was sent automatically with the same options
    expect(h.socket().lastSent()).toMatchObject({
      type: "join",
      layout: "cramped_small",
      checkpoint: "demo.ckpt",
    });

    // the new session is adopted and the client seq starts over
    h.socket().deliver(lobbyFrame("s2"));
    expect(h.client.session).toBe("s2");
    h.client.start();
    expect(h.socket().lastSent()).toEqual({ type: "start", session: "s2", seq: 1 });
  });

  it("reconnect(false) connects without rejoining", async () => {
    const h = harness();
    const pending = h.client.connect();
    h.socket().open();
    await pending;
    h.client.join({ layout: "l", checkpoint: "c", human_seat: 0 });
    const reconnecting = h.client.reconnect(false);
    h.socket().open();
    await reconnecting;
    expect(h.socket().sent).toEqual([]); // caller joins explicitly
    expect(h.client.session).toBeNull();
  });
});
