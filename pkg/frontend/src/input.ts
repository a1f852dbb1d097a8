/**
 * Keyboard mapping and per-frame throttling.
 *
 * Arrow keys map to movement, space to interact; anything else maps to
 * nothing. Key presses are collected into a one-slot buffer that the
 * render loop flushes once per client frame, so each press produces at
 * most one outbound `input` frame and held-key autorepeat collapses to
 * one frame per client frame (the server applies the latest input per
 * tick anyway).
 */

import type { Action } from "./protocol.js";

const KEYMAP: Record<string, Action> = {
  ArrowUp: "up",
  ArrowDown: "down",
  ArrowLeft: "left",
  ArrowRight: "right",
  " ": "interact",
};

/** The action for a KeyboardEvent.key, or null for unmapped keys. */
export function mapKey(key: string): Action | null {
  return KEYMAP[key] ?? null;
}

export class InputThrottle {
  private pending: Action | null = null;

  /** Record a key press; returns true when the key maps to an action. */
  press(key: string): boolean {
    const action = mapKey(key);
    if (action === null) {
      return false;
    }
    this.pending = action; // latest press wins within one client frame
    return true;
  }

  /** Take the buffered action (at most one per call), clearing the slot. */
  flush(): Action | null {
    const action = this.pending;
    this.pending = null;
    return action;
  }
}
