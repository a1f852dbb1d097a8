/**
 * Browser entry point: wires DOM controls, the keyboard, the websocket
 * client, the view reducer and the canvas painter into one render loop.
 *
 * The loop ticks on requestAnimationFrame: flush at most one buffered
 * input to the server, then repaint the latest server-acknowledged view.
 * All game state originates from server snapshots — the client never
 * steps the simulation locally.
 */

import { InputThrottle, mapKey } from "./input.js";
import { PlayClient } from "./protocol.js";
import { paint, renderFrame } from "./render.js";
import { applyFrame, initialView } from "./state.js";
import type { ClientView } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const params = new URLSearchParams(window.location.search);
const server = params.get("server") ?? window.location.host;
const httpBase = `${window.location.protocol}//${server}`;
const wsScheme = window.location.protocol === "https:" ? "wss" : "ws";
const wsUrl = `${wsScheme}://${server}/ws/play`;

const canvas = el<HTMLCanvasElement>("kitchen");
const ctx = ((): CanvasRenderingContext2D => {
  const context = canvas.getContext("2d");
  if (!context) {
    throw new Error("2d canvas context unavailable");
  }
  return context;
})();
const layoutSel = el<HTMLSelectElement>("layout");
const checkpointSel = el<HTMLSelectElement>("checkpoint");
const seatSel = el<HTMLSelectElement>("seat");
const joinBtn = el<HTMLButtonElement>("join");
const startBtn = el<HTMLButtonElement>("start");
const quitBtn = el<HTMLButtonElement>("quit");
const retryBtn = el<HTMLButtonElement>("retry");
const statusLine = el<HTMLDivElement>("status");

let view: ClientView = initialView();
const throttle = new InputThrottle();

const client = new PlayClient(wsUrl, (url) => new WebSocket(url), {
  onFrame(frame) {
    view = applyFrame(view, frame);
  },
  onClose() {
    if (view.connection !== "finished") {
      view = { ...view, connection: "disconnected" };
      statusLine.textContent = "connection lost";
      retryBtn.hidden = false;
    }
  },
});

async function fillListings(): Promise<void> {
  const [layouts, checkpoints] = await Promise.all([
    fetch(`${httpBase}/layouts`).then((r) => r.json()),
    fetch(`${httpBase}/checkpoints`).then((r) => r.json()),
  ]);
  layoutSel.replaceChildren(
    ...layouts.layouts.map((name: string) => new Option(name, name)),
  );
  checkpointSel.replaceChildren(
    ...checkpoints.checkpoints.map((name: string) => new Option(name, name)),
  );
}

function joinSelected(): void {
  view = initialView();
  view = { ...view, connection: "connecting" };
  client.join({
    layout: layoutSel.value,
    checkpoint: checkpointSel.value,
    human_seat: Number(seatSel.value) === 1 ? 1 : 0,
  });
  statusLine.textContent = "";
}

joinBtn.addEventListener("click", async () => {
  if (view.connection === "lobby" || view.connection === "running") {
    return; // already in a session; quit first
  }
  retryBtn.hidden = true;
  try {
    if (view.connection === "disconnected") {
      await client.connect();
    } else {
      // a socket can host one session; open a fresh one to play again
      await client.reconnect(false);
    }
    joinSelected();
  } catch (err) {
    statusLine.textContent = `${(err as Error).message} — retry?`;
    retryBtn.hidden = false;
  }
});

startBtn.addEventListener("click", () => {
  if (view.connection === "lobby") {
    client.start();
  }
});

quitBtn.addEventListener("click", () => {
  if (view.connection === "running") {
    client.quit();
  }
});

retryBtn.addEventListener("click", async () => {
  retryBtn.hidden = true;
  try {
    await client.reconnect();
    statusLine.textContent = "";
  } catch (err) {
    statusLine.textContent = `${(err as Error).message} — retry?`;
    retryBtn.hidden = false;
  }
});

window.addEventListener("keydown", (ev) => {
  if (mapKey(ev.key)) {
    ev.preventDefault(); // keep space/arrows from scrolling the page
    throttle.press(ev.key);
  }
});

function humanSeat(): number | null {
  return view.session ? (Number(seatSel.value) === 1 ? 1 : 0) : null;
}

function loop(): void {
  const action = throttle.flush();
  if (action && view.connection === "running") {
    client.input(action);
  }
  const frame = renderFrame(view, humanSeat());
  if (canvas.width !== frame.width || canvas.height !== frame.height) {
    canvas.width = frame.width;
    canvas.height = frame.height;
  }
  paint(ctx, frame);
  requestAnimationFrame(loop);
}

fillListings().catch((err) => {
  statusLine.textContent = `cannot reach ${httpBase}: ${(err as Error).message}`;
  retryBtn.hidden = false;
});
requestAnimationFrame(loop);
