/** View reducer: server-authoritative state, monotone sequence numbers. */

import { describe, expect, it } from "vitest";

import type {
  EpisodeEndFrame,
  ErrorFrame,
  LayoutSummary,
  Snapshot,
  StateFrame,
} from "../src/protocol.js";
import { applyFrame, initialView, ticksRemaining } from "../src/state.js";

const LAYOUT: LayoutSummary = {
  name: "cramped_small",
  grid: ["XOPDX", "X   X", "S   X", "XXXXX"],
  cook_time: 20,
  horizon: 200,
};

function snap(tick: number, over: Partial<Snapshot> = {}): Snapshot {
  return {
    tick,
    positions: [
      [1, 1],
      [1, 2],
    ],
    orientations: ["S", "S"],
    held: ["nothing", "nothing"],
    pots: [[0, null]],
    counters: [],
    ...over,
  };
}

function stateFrame(
  seq: number,
  tick: number,
  over: Partial<StateFrame> = {},
): StateFrame {
  return {
    type: "state",
    session: "s1",
    seq,
    tick,
    score: 0,
    status: "running",
    state: snap(tick),
    ...over,
  };
}

const LOBBY: StateFrame = stateFrame(1, 0, {
  status: "lobby",
  layout: LAYOUT,
  horizon: 60,
});

describe("applyFrame", () => {
  it("adopts the lobby frame: session, layout, horizon, snapshot", () => {
    const view = applyFrame(initialView(), LOBBY);
    expect(view.connection).toBe("lobby");
    expect(view.session).toBe("s1");
    expect(view.lastSeq).toBe(1);
    expect(view.layout).toEqual(LAYOUT);
    expect(view.horizon).toBe(60);
    expect(view.snapshot?.tick).toBe(0);
    expect(ticksRemaining(view)).toBe(60);
  });

  it("tracks running frames: tick, score, countdown", () => {
    let view = applyFrame(initialView(), LOBBY);
    view = applyFrame(view, stateFrame(2, 1));
    expect(view.connection).toBe("running");
    expect(view.tick).toBe(1);
    expect(ticksRemaining(view)).toBe(59);
    // layout/horizon from the lobby frame persist on later frames
    expect(view.layout).toEqual(LAYOUT);
    expect(view.horizon).toBe(60);
  });

  it("a delivery shows up as +20 score", () => {
    let view = applyFrame(initialView(), LOBBY);
    view = applyFrame(view, stateFrame(2, 1));
    view = applyFrame(view, stateFrame(3, 2, { score: 20 }));
    expect(view.score).toBe(20);
  });

  it("drops stale frames: same object back, state untouched", () => {
    let view = applyFrame(initialView(), LOBBY);
    view = applyFrame(view, stateFrame(5, 4));
    const replay = applyFrame(view, stateFrame(5, 9));
    expect(replay).toBe(view);
    const older = applyFrame(view, stateFrame(3, 2));
    expect(older).toBe(view);
    expect(view.tick).toBe(4);
  });

  it("accepts any forward seq jump", () => {
    let view = applyFrame(initialView(), LOBBY);
    view = applyFrame(view, stateFrame(40, 39));
    expect(view.tick).toBe(39);
    expect(view.lastSeq).toBe(40);
  });

  it("episode_end finishes the session and records the total", () => {
    let view = applyFrame(initialView(), LOBBY);
    view = applyFrame(view, stateFrame(61, 60, { status: "finished", score: 40 }));
    const end: EpisodeEndFrame = {
      type: "episode_end",
      session: "s1",
      seq: 62,
      total_reward: 40,
    };
    view = applyFrame(view, end);
    expect(view.connection).toBe("finished");
    expect(view.finalReward).toBe(40);
    expect(view.score).toBe(40);
  });

  it("shows error text verbatim and clears it on the next state frame", () => {
    let view = applyFrame(initialView(), LOBBY);
    const err: ErrorFrame = {
      type: "error",
      session: "s1",
      seq: 2,
      text: "not an action: 'jump'",
    };
    view = applyFrame(view, err);
    expect(view.error).toBe("not an action: 'jump'");
    view = applyFrame(view, stateFrame(3, 1));
    expect(view.error).toBeNull();
  });

  it("shows pre-join errors (no session, seq 0) without seq tracking", () => {
    const err: ErrorFrame = {
      type: "error",
      session: null,
      seq: 0,
      text: "unknown checkpoint: 'nope'",
    };
    let view = applyFrame(initialView(), err);
    expect(view.error).toBe("unknown checkpoint: 'nope'");
    // a second pre-join error still shows even though seq did not advance
    view = applyFrame(view, { ...err, text: "unknown layout: 'nah'" });
    expect(view.error).toBe("unknown layout: 'nah'");
    expect(view.lastSeq).toBe(0);
  });

  it("ignores end/error frames from sessions it never saw", () => {
    const view = applyFrame(initialView(), LOBBY);
    const foreign = applyFrame(view, {
      type: "episode_end",
      session: "s9",
      seq: 99,
      total_reward: 7,
    });
    expect(foreign).toBe(view);
  });

  it("adopts a new session after reconnect, resetting seq tracking", () => {
    let view = applyFrame(initialView(), LOBBY);
    view = applyFrame(view, stateFrame(14, 13));
    expect(view.lastSeq).toBe(14);
    // new session starts its seq over at 1; must not be treated as stale
    const rejoined = applyFrame(
      view,
      stateFrame(1, 0, {
        session: "s2",
        status: "lobby",
        layout: LAYOUT,
        horizon: 30,
      }),
    );
    expect(rejoined.session).toBe("s2");
    expect(rejoined.lastSeq).toBe(1);
    expect(rejoined.horizon).toBe(30);
    expect(rejoined.connection).toBe("lobby");
    expect(rejoined.finalReward).toBeNull();
  });
});
