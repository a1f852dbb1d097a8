/**
 * Client-side view state: a pure reducer over server frames.
 *
 * The server is authoritative — nothing here predicts or simulates; the
 * view only ever reflects the latest acknowledged snapshot. Frames that
 * arrive with a sequence number at or below the last accepted one for the
 * same session are dropped (stale or replayed), keeping the rendered state
 * monotone in server time.
 */

import type {
  LayoutSummary,
  ServerFrame,
  SessionStatus,
  Snapshot,
} from "./protocol.js";

export type ConnectionStatus = "disconnected" | "connecting" | SessionStatus;

export interface ClientView {
  connection: ConnectionStatus;
  session: string | null;
  /** Highest server seq accepted for `session`. */
  lastSeq: number;
  layout: LayoutSummary | null;
  horizon: number | null;
  snapshot: Snapshot | null;
  score: number;
  tick: number;
  /** Set by the episode_end frame; null while the episode runs. */
  finalReward: number | null;
  /** Last server error text, displayed verbatim; cleared by a state frame. */
  error: string | null;
}

export function initialView(): ClientView {
  return {
    connection: "disconnected",
    session: null,
    lastSeq: 0,
    layout: null,
    horizon: null,
    snapshot: null,
    score: 0,
    tick: 0,
    finalReward: null,
    error: null,
  };
}

/** Ticks left before the episode ends, or null before a session exists. */
export function ticksRemaining(view: ClientView): number | null {
  if (view.horizon === null || view.snapshot === null) {
    return null;
  }
  return Math.max(0, view.horizon - view.snapshot.tick);
}

/**
 * Fold one server frame into the view. Returns the same object when the
 * frame is stale (non-monotone seq) so callers can cheaply detect drops.
 */
export function applyFrame(view: ClientView, frame: ServerFrame): ClientView {
  if (frame.type === "error" && frame.session === null) {
    // pre-join errors carry no session and seq 0; show them verbatim
    return { ...view, error: frame.text };
  }
  if (frame.session === view.session) {
    if (frame.seq <= view.lastSeq) {
      return view; // stale or replayed frame
    }
  } else if (frame.type !== "state") {
    return view; // end/error frames for a session we never saw
  }

  switch (frame.type) {
    case "state": {
      const fresh = frame.session !== view.session;
      return {
        ...view,
        connection: frame.status,
        session: frame.session,
        lastSeq: frame.seq,
        layout: frame.layout ?? (fresh ? null : view.layout),
        horizon: frame.horizon ?? (fresh ? null : view.horizon),
        snapshot: frame.state,
        score: frame.score,
        tick: frame.tick,
        finalReward: fresh ? null : view.finalReward,
        error: null,
      };
    }
    case "episode_end":
      return {
        ...view,
        connection: "finished",
        lastSeq: frame.seq,
        finalReward: frame.total_reward,
      };
    case "error":
      return { ...view, lastSeq: frame.seq, error: frame.text };
  }
}
