/**
 * Canvas renderer for the kitchen, split in two for testability:
 *
 *   renderFrame(view)  -> a pure display list (data only, deterministic)
 *   paint(ctx, frame)  -> executes a display list on a 2D canvas context
 *
 * Identical views therefore produce identical display lists, and every
 * rendering decision can be asserted headlessly without a real canvas.
 * A snapshot that does not fit the layout is never drawn half-way: the
 * whole frame degrades to an error overlay.
 */

import type { LayoutSummary, Orientation, Snapshot } from "./protocol.js";
import type { ClientView } from "./state.js";
import { ticksRemaining } from "./state.js";

export const CELL = 48; // px per grid cell
export const HUD = 44; // px, top status band

export type DrawCmd =
  | { op: "clear"; w: number; h: number; color: string }
  | { op: "rect"; x: number; y: number; w: number; h: number; color: string }
  | {
      op: "frame";
      x: number;
      y: number;
      w: number;
      h: number;
      color: string;
      width: number;
    }
  | { op: "disc"; x: number; y: number; r: number; color: string }
  | {
      op: "text";
      x: number;
      y: number;
      text: string;
      color: string;
      size: number;
      align: "left" | "center" | "right";
    };

export interface RenderedFrame {
  width: number;
  height: number;
  cmds: DrawCmd[];
}

const COLORS = {
  background: "#1b1d22",
  wall: "#3a3f4a",
  floor: "#d9d3c7",
  counter: "#9aa3b2",
  pot: "#2b2b30",
  potReady: "#67d672",
  serving: "#67b26f",
  onion: "#e8a33d",
  dish: "#f2f2ee",
  soup: "#c96f2f",
  chefs: ["#4f86f7", "#f75f5f"],
  humanRing: "#ffffff",
  hudText: "#e8e8e8",
  overlay: "#10121699",
  error: "#b33939",
} as const;

const ITEM_COLORS: Record<string, string> = {
  onion: COLORS.onion,
  dish: COLORS.dish,
  soup: COLORS.soup,
};

const FACING: Record<Orientation, [number, number]> = {
  N: [-1, 0],
  S: [1, 0],
  E: [0, 1],
  W: [0, -1],
};

/** Grid-order cell positions of one glyph, matching the server's indexing
 * of pots and counters. */
export function cellsOf(grid: string[], glyph: string): [number, number][] {
  const cells: [number, number][] = [];
  grid.forEach((row, r) => {
    for (let c = 0; c < row.length; c += 1) {
      if (row[c] === glyph) {
        cells.push([r, c]);
      }
    }
  });
  return cells;
}

function checkSnapshot(layout: LayoutSummary, snap: Snapshot): void {
  const rows = layout.grid.length;
  const cols = layout.grid[0]?.length ?? 0;
  if (!Array.isArray(snap.positions) || snap.positions.length !== 2) {
    throw new Error("snapshot needs two chef positions");
  }
  for (const pos of snap.positions) {
    if (
      !Array.isArray(pos) ||
      pos.length !== 2 ||
      !Number.isInteger(pos[0]) ||
      !Number.isInteger(pos[1]) ||
      pos[0] < 0 ||
      pos[0] >= rows ||
      pos[1] < 0 ||
      pos[1] >= cols
    ) {
      throw new Error(`chef position out of grid: ${JSON.stringify(pos)}`);
    }
  }
  for (const o of snap.orientations) {
    if (!(o in FACING)) {
      throw new Error(`unknown orientation: ${JSON.stringify(o)}`);
    }
  }
  const pots = cellsOf(layout.grid, "P").length;
  if (!Array.isArray(snap.pots) || snap.pots.length !== pots) {
    throw new Error(`expected ${pots} pots`);
  }
  const counters = cellsOf(layout.grid, "C").length;
  if (!Array.isArray(snap.counters) || snap.counters.length !== counters) {
    throw new Error(`expected ${counters} counter slots`);
  }
}

function tileColor(glyph: string): string {
  switch (glyph) {
    case " ":
      return COLORS.floor;
    case "C":
    case "O":
    case "D":
    case "P":
    case "S":
      return COLORS.counter;
    default:
      return COLORS.wall; // X and anything unexpected draw as wall
  }
}

function drawGrid(layout: LayoutSummary, cmds: DrawCmd[]): void {
  layout.grid.forEach((row, r) => {
    for (let c = 0; c < row.length; c += 1) {
      const x = c * CELL;
      const y = HUD + r * CELL;
      cmds.push({ op: "rect", x, y, w: CELL, h: CELL, color: tileColor(row[c]) });
      const cx = x + CELL / 2;
      const cy = y + CELL / 2;
      switch (row[c]) {
        case "O":
          cmds.push({ op: "disc", x: cx, y: cy, r: CELL * 0.28, color: COLORS.onion });
          break;
        case "D":
          cmds.push({ op: "disc", x: cx, y: cy, r: CELL * 0.28, color: COLORS.dish });
          break;
        case "P":
          cmds.push({ op: "disc", x: cx, y: cy, r: CELL * 0.34, color: COLORS.pot });
          break;
        case "S":
          cmds.push({
            op: "rect",
            x: x + CELL * 0.15,
            y: y + CELL * 0.4,
            w: CELL * 0.7,
            h: CELL * 0.2,
            color: COLORS.serving,
          });
          break;
      }
    }
  });
}

function drawPots(layout: LayoutSummary, snap: Snapshot, cmds: DrawCmd[]): void {
  cellsOf(layout.grid, "P").forEach(([r, c], i) => {
    const [count, timer] = snap.pots[i];
    const x = c * CELL;
    const y = HUD + r * CELL;
    for (let k = 0; k < count; k += 1) {
      cmds.push({
        op: "disc",
        x: x + CELL * (0.3 + 0.2 * k),
        y: y + CELL / 2,
        r: CELL * 0.08,
        color: COLORS.onion,
      });
    }
    if (timer !== null) {
      const progress = (layout.cook_time - timer) / layout.cook_time;
      cmds.push({
        op: "rect",
        x: x + CELL * 0.1,
        y: y + CELL * 0.8,
        w: CELL * 0.8,
        h: CELL * 0.12,
        color: COLORS.wall,
      });
      cmds.push({
        op: "rect",
        x: x + CELL * 0.1,
        y: y + CELL * 0.8,
        w: CELL * 0.8 * progress,
        h: CELL * 0.12,
        color: COLORS.potReady,
      });
      if (timer === 0) {
        cmds.push({
          op: "frame",
          x: x + 2,
          y: y + 2,
          w: CELL - 4,
          h: CELL - 4,
          color: COLORS.potReady,
          width: 2,
        });
      }
    }
  });
}

function drawCounterItems(
  layout: LayoutSummary,
  snap: Snapshot,
  cmds: DrawCmd[],
): void {
  cellsOf(layout.grid, "C").forEach(([r, c], i) => {
    const item = snap.counters[i];
    if (item && ITEM_COLORS[item]) {
      cmds.push({
        op: "disc",
        x: c * CELL + CELL / 2,
        y: HUD + r * CELL + CELL / 2,
        r: CELL * 0.22,
        color: ITEM_COLORS[item],
      });
    }
  });
}

function drawChefs(
  snap: Snapshot,
  humanSeat: number | null,
  cmds: DrawCmd[],
): void {
  snap.positions.forEach(([r, c], seat) => {
    const cx = c * CELL + CELL / 2;
    const cy = HUD + r * CELL + CELL / 2;
    cmds.push({
      op: "disc",
      x: cx,
      y: cy,
      r: CELL * 0.36,
      color: COLORS.chefs[seat % 2],
    });
    const [dr, dc] = FACING[snap.orientations[seat]];
    cmds.push({
      op: "disc",
      x: cx + dc * CELL * 0.24,
      y: cy + dr * CELL * 0.24,
      r: CELL * 0.09,
      color: COLORS.background,
    });
    const item = ITEM_COLORS[snap.held[seat]];
    if (item) {
      cmds.push({ op: "disc", x: cx, y: cy, r: CELL * 0.14, color: item });
    }
    if (seat === humanSeat) {
      cmds.push({
        op: "frame",
        x: cx - CELL * 0.42,
        y: cy - CELL * 0.42,
        w: CELL * 0.84,
        h: CELL * 0.84,
        color: COLORS.humanRing,
        width: 2,
      });
    }
  });
}

function hudText(view: ClientView): { left: string; center: string; right: string } {
  const left = `score ${view.score}`;
  const remaining = ticksRemaining(view);
  const right = remaining === null ? "" : `${remaining} ticks left`;
  let center: string;
  switch (view.connection) {
    case "lobby":
      center = `${view.layout?.name ?? ""} — press start`;
      break;
    case "running":
      center = view.layout?.name ?? "";
      break;
    case "finished":
      center = "episode over";
      break;
    default:
      center = view.connection;
  }
  return { left, center, right };
}

function errorOverlay(width: number, height: number, text: string): DrawCmd[] {
  return [
    { op: "clear", w: width, h: height, color: COLORS.background },
    {
      op: "rect",
      x: 0,
      y: height - 36,
      w: width,
      h: 36,
      color: COLORS.error,
    },
    {
      op: "text",
      x: width / 2,
      y: height - 18,
      text,
      color: COLORS.dish,
      size: 14,
      align: "center",
    },
  ];
}

const IDLE_W = 520;
const IDLE_H = 280;

/**
 * Turn the current view into a display list. Never throws: a snapshot
 * that does not match the layout renders as an error overlay instead.
 */
export function renderFrame(
  view: ClientView,
  humanSeat: number | null = null,
): RenderedFrame {
  if (!view.layout || !view.snapshot) {
    const cmds: DrawCmd[] = [
      { op: "clear", w: IDLE_W, h: IDLE_H, color: COLORS.background },
      {
        op: "text",
        x: IDLE_W / 2,
        y: IDLE_H / 2,
        text: "kitchen play — join a session",
        color: COLORS.hudText,
        size: 18,
        align: "center",
      },
    ];
    if (view.error) {
      cmds.push(...errorOverlay(IDLE_W, IDLE_H, view.error).slice(1));
    }
    return { width: IDLE_W, height: IDLE_H, cmds };
  }

  const layout = view.layout;
  const width = (layout.grid[0]?.length ?? 0) * CELL;
  const height = HUD + layout.grid.length * CELL;
  try {
    checkSnapshot(layout, view.snapshot);
  } catch (err) {
    return {
      width,
      height,
      cmds: errorOverlay(width, height, `malformed snapshot: ${(err as Error).message}`),
    };
  }

  const cmds: DrawCmd[] = [
    { op: "clear", w: width, h: height, color: COLORS.background },
  ];
  drawGrid(layout, cmds);
  drawPots(layout, view.snapshot, cmds);
  drawCounterItems(layout, view.snapshot, cmds);
  drawChefs(view.snapshot, humanSeat, cmds);

  const { left, center, right } = hudText(view);
  cmds.push(
    { op: "text", x: 8, y: HUD / 2, text: left, color: COLORS.hudText, size: 16, align: "left" },
    { op: "text", x: width / 2, y: HUD / 2, text: center, color: COLORS.hudText, size: 14, align: "center" },
    { op: "text", x: width - 8, y: HUD / 2, text: right, color: COLORS.hudText, size: 16, align: "right" },
  );

  if (view.connection === "finished") {
    const score = view.finalReward ?? view.score;
    cmds.push(
      { op: "rect", x: 0, y: HUD, w: width, h: height - HUD, color: COLORS.overlay },
      {
        op: "text",
        x: width / 2,
        y: height / 2,
        text: `episode over — score ${score}`,
        color: COLORS.dish,
        size: 22,
        align: "center",
      },
      {
        op: "text",
        x: width / 2,
        y: height / 2 + 28,
        text: "join again to play another round",
        color: COLORS.hudText,
        size: 13,
        align: "center",
      },
    );
  }

  if (view.error) {
    cmds.push(...errorOverlay(width, height, view.error).slice(1));
  }
  return { width, height, cmds };
}

/** The 2D-context surface paint() relies on; CanvasRenderingContext2D
 * satisfies it structurally (its style properties admit gradients and
 * patterns too, hence the unions), and tests substitute a recorder. */
export interface Canvas2DLike {
  fillStyle: string | object;
  strokeStyle: string | object;
  lineWidth: number;
  font: string;
  textAlign: string;
  textBaseline: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

/** Execute a display list on a canvas context. */
export function paint(ctx: Canvas2DLike, frame: RenderedFrame): void {
  for (const cmd of frame.cmds) {
    switch (cmd.op) {
      case "clear":
        ctx.fillStyle = cmd.color;
        ctx.fillRect(0, 0, cmd.w, cmd.h);
        break;
      case "rect":
        ctx.fillStyle = cmd.color;
        ctx.fillRect(cmd.x, cmd.y, cmd.w, cmd.h);
        break;
      case "frame":
        ctx.strokeStyle = cmd.color;
        ctx.lineWidth = cmd.width;
        ctx.strokeRect(cmd.x, cmd.y, cmd.w, cmd.h);
        break;
      case "disc":
        ctx.fillStyle = cmd.color;
        ctx.beginPath();
        ctx.arc(cmd.x, cmd.y, cmd.r, 0, Math.PI * 2);
        ctx.fill();
        break;
      case "text":
        ctx.fillStyle = cmd.color;
        ctx.font = `${cmd.size}px ui-monospace, Menlo, monospace`;
        ctx.textAlign = cmd.align;
        ctx.textBaseline = "middle";
        ctx.fillText(cmd.text, cmd.x, cmd.y);
        break;
    }
  }
}
