/**
 * Live play loop against the real service: train a small checkpoint,
 * serve it, complete a scripted session over the wire, render every
 * snapshot, and verify the displayed score against the server's session
 * log and its replay.
 */

import { spawn, spawnSync } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, readdirSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { PlayClient } from "../src/protocol.js";
import type {
  Action,
  EpisodeEndFrame,
  JoinOptions,
  SocketFactory,
  SocketLike,
  StateFrame,
} from "../src/protocol.js";
import { renderFrame } from "../src/render.js";
import type { RenderedFrame } from "../src/render.js";
import { applyFrame, initialView } from "../src/state.js";
import type { ClientView } from "../src/state.js";

const wsFactory: SocketFactory = (url) =>
  new WebSocket(url) as unknown as SocketLike;

const TRAIN_FLAGS = [
  "--layout", "cramped_small", "--seed", "3", "--total-steps", "160",
  "--n-envs", "2", "--horizon", "40", "--n-skills", "3", "--hidden", "12",
  "--embed-dim", "8", "--batch-size", "40", "--partners", "uniform_random",
];

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitForService(base: string): Promise<void> {
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const res = await fetch(`${base}/layouts`);
      if (res.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service at ${base} never became ready`);
    }
    await new Promise((r) => setTimeout(r, 200));
  }
}

interface SessionResult {
  view: ClientView;
  session: string;
  ticks: StateFrame[];
  rendered: RenderedFrame[];
  arrivals: number[];
  end: EpisodeEndFrame;
  finalFrame: RenderedFrame;
}

/** Join, start, feed scripted inputs, render every snapshot, await the end. */
function runSession(
  port: number,
  opts: JoinOptions,
  script: (tick: number) => Action | null,
): Promise<SessionResult> {
  return new Promise((resolve, reject) => {
    let view = initialView();
    const ticks: StateFrame[] = [];
    const rendered: RenderedFrame[] = [];
    const arrivals: number[] = [];
    const client = new PlayClient(
      `ws://127.0.0.1:${port}/ws/play`,
      wsFactory,
      {
        onFrame(frame) {
          view = applyFrame(view, frame);
          if (frame.type === "error") {
            reject(new Error(`server error: ${frame.text}`));
            return;
          }
          if (frame.type === "state") {
            rendered.push(renderFrame(view, opts.human_seat));
            if (frame.status === "lobby") {
              client.start();
            } else {
              ticks.push(frame);
              arrivals.push(performance.now());
              const action = script(frame.tick);
              if (action && frame.status === "running") {
                client.input(action);
              }
            }
          } else {
            const finalFrame = renderFrame(view, opts.human_seat);
            const session = client.session!;
            client.close();
            resolve({
              view,
              session,
              ticks,
              rendered,
              arrivals,
              end: frame,
              finalFrame,
            });
          }
        },
        onClose() {
          reject(new Error("socket dropped before episode_end"));
        },
      },
    );
    client
      .connect()
      .then(() => client.join(opts))
      .catch(reject);
  });
}

function displayedScore(frame: RenderedFrame): number {
  const text = frame.cmds.flatMap((c) =>
    c.op === "text" && c.text.startsWith("score ") ? [c.text] : [],
  )[0];
  expect(text, "HUD score text").toBeDefined();
  return Number(text!.slice("score ".length));
}

describe("play loop against the live service", () => {
  const work = mkdtempSync(join(tmpdir(), "pasd-ui-"));
  const ckptDir = join(work, "ckpts");
  const logDir = join(work, "sessions");
  let server: ChildProcess | null = null;
  let serverLog = "";
  let port = 0;

  beforeAll(async () => {
    const train = spawnSync(
      "python3",
      ["-m", "pasd.cli", "train-pasd", "--out", ckptDir, ...TRAIN_FLAGS],
      { encoding: "utf8" },
    );
    expect(train.status, train.stderr).toBe(0);

    port = await freePort();
    server = spawn(
      "python3",
      [
        "-m", "pasd.cli", "serve",
        "--checkpoint-dir", ckptDir,
        "--log-dir", logDir,
        "--host", "127.0.0.1",
        "--port", String(port),
      ],
      { stdio: ["ignore", "pipe", "pipe"] },
    );
    server.stdout?.on("data", (chunk) => (serverLog += chunk));
    server.stderr?.on("data", (chunk) => (serverLog += chunk));
    await waitForService(`http://127.0.0.1:${port}`);
  });

  afterAll(() => {
    server?.kill("SIGTERM");
    rmSync(work, { recursive: true, force: true });
  });

  it("lists layouts and checkpoints over HTTP", async () => {
    const layouts = await (await fetch(`http://127.0.0.1:${port}/layouts`)).json();
    expect(layouts.layouts).toContain("cramped_small");
    const checkpoints = await (
      await fetch(`http://127.0.0.1:${port}/checkpoints`)
    ).json();
    expect(checkpoints.checkpoints).toContain("policy_final.ckpt");
  });

  it("completes a scripted 60-tick session: renders every snapshot, score matches the log, log replays", async () => {
    const cycle: Action[] = ["up", "left", "down", "right", "interact"];
    const result = await runSession(
      port,
      {
        layout: "cramped_small",
        checkpoint: "policy_final.ckpt",
        human_seat: 1,
        horizon: 60,
        tick_rate: 60,
        seed: 3,
      },
      (tick) => cycle[tick % cycle.length],
    ).catch((err) => {
      throw new Error(`${err.message}\nserver output:\n${serverLog}`);
    });

    // all 60 ticks arrived in order and the session finished
    expect(result.ticks.map((f) => f.tick)).toEqual(
      Array.from({ length: 60 }, (_, i) => i + 1),
    );
    expect(result.ticks[59].status).toBe("finished");
    expect(result.view.connection).toBe("finished");

    // every server snapshot rendered without error (no overlay fallback)
    expect(result.rendered.length).toBe(61); // lobby + 60 ticks
    for (const frame of result.rendered) {
      expect(frame.cmds.length).toBeGreaterThan(0);
      const overlay = frame.cmds.some(
        (c) => c.op === "text" && c.text.startsWith("malformed snapshot"),
      );
      expect(overlay).toBe(false);
    }

    // displayed final score == episode_end total == server-logged total
    const displayed = displayedScore(result.finalFrame);
    expect(displayed).toBe(result.end.total_reward);
    expect(result.view.finalReward).toBe(result.end.total_reward);
    expect(result.view.score).toBe(result.end.total_reward);
    const finishText = result.finalFrame.cmds.flatMap((c) =>
      c.op === "text" ? [c.text] : [],
    );
    expect(finishText).toContain(
      `episode over — score ${result.end.total_reward}`,
    );

    // the server wrote one row per tick plus a summary row
    const logPath = join(logDir, `${result.session}.jsonl`);
    const rows = readFileSync(logPath, "utf8").trim().split("\n").map((l) =>
      JSON.parse(l),
    );
    expect(rows.length).toBe(61);
    const summary = rows[rows.length - 1];
    expect(summary.summary).toBe(true);
    expect(summary.ticks).toBe(60);
    expect(summary.total_reward).toBe(result.end.total_reward);

    // and the log re-simulates to the same score
    const replay = spawnSync("python3", ["-m", "pasd.cli", "replay", logPath], {
      encoding: "utf8",
    });
    expect(replay.status, replay.stderr + replay.stdout).toBe(0);
    expect(replay.stdout).toContain("ok");
  });

  it("keeps tick period jitter under 20% at 6 ticks per second", async () => {
    const result = await runSession(
      port,
      {
        layout: "cramped_small",
        checkpoint: "policy_final.ckpt",
        human_seat: 0,
        horizon: 14,
        tick_rate: 6,
        seed: 1,
      },
      () => null,
    ).catch((err) => {
      throw new Error(`${err.message}\nserver output:\n${serverLog}`);
    });

    const periods: number[] = [];
    for (let i = 1; i < result.arrivals.length; i += 1) {
      periods.push((result.arrivals[i] - result.arrivals[i - 1]) / 1000);
    }
    expect(periods.length).toBe(13);
    const mean = periods.reduce((a, b) => a + b, 0) / periods.length;
    const nominal = 1 / 6;
    expect(Math.abs(mean - nominal) / nominal).toBeLessThan(0.2);
    const worst = Math.max(...periods.map((p) => Math.abs(p - mean)));
    expect(worst / mean).toBeLessThan(0.2);
  });

  it("training left exactly one final checkpoint for the lobby listing", () => {
    const names = readdirSync(ckptDir).filter((n) => n.endsWith(".ckpt"));
    expect(names).toContain("policy_final.ckpt");
  });
});
