"""Real-time play service: a human controls one chef from a browser while a
checkpointed skill hierarchy controls the other.

Protocol (JSON text frames over a websocket at ``/ws/play``):

  client -> server   {"type": "join", "layout": L, "checkpoint": C,
                      "human_seat": 0|1, "tick_rate": hz, "horizon": T,
                      "seed": n, "seq": k}
                     {"type": "input", "session": id, "seq": k, "action": a}
                     {"type": "start", "session": id, "seq": k}
                     {"type": "quit",  "session": id, "seq": k}
  server -> client   {"type": "state", "session": id, "seq": k, "tick": t,
                      "score": s, "status": ..., "state": snapshot, ...}
                     {"type": "episode_end", "session": id, "seq": k,
                      "total_reward": r}
                     {"type": "error", "session": id|null, "seq": k,
                      "text": msg}

Every server frame carries the session id and a per-session monotone
sequence number. The tick loop is the sole mutator of a session: it runs at
the configured rate, consumes at most one pending human action per tick
(latest input wins; no input means ``stay``), queries the agent policy with
the same skill-persistence/termination semantics used during training
rollouts, steps the simulation once, and broadcasts the new state. Finished
sessions append a per-tick trajectory log plus a one-line summary, which
``pasd replay`` can re-simulate for verification.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import kitchen as K
from .policy import HierarchicalPolicy

_STATUSES = ("lobby", "running", "finished")


def state_snapshot(state: K.WorldState) -> dict:
    return {
        "tick": state.tick,
        "positions": [list(p) for p in state.positions],
        "orientations": [K.ORIENT_NAMES[o] for o in state.orientations],
        "held": list(state.held),
        "pots": [[count, timer] for count, timer in state.pots],
        "counters": list(state.counters),
    }


def layout_summary(layout: K.Layout) -> dict:
    return {
        "name": layout.name,
        "grid": list(layout.grid),
        "cook_time": layout.cook_time,
        "horizon": layout.horizon,
    }


def parse_action(value) -> int:
    if isinstance(value, bool):
        raise ValueError(f"not an action: {value!r}")
    if isinstance(value, int) and 0 <= value < K.N_ACTIONS:
        return value
    if isinstance(value, str) and value in K.ACTION_NAMES:
        return K.ACTION_NAMES.index(value)
    raise ValueError(f"not an action: {value!r}")


class AgentSeat:
    """Skill hierarchy driving one chef: persists the active skill across
    ticks and redraws it when the termination head fires."""

    def __init__(self, policy: HierarchicalPolicy, rng: np.random.Generator):
        self.policy = policy
        self.rng = rng
        self.skill: int | None = None

    def act(self, layout: K.Layout, state: K.WorldState, seat: int) -> int:
        obs = K.observe(layout, state, seat)
        if self.skill is None:
            self.skill, _, _ = self.policy.select_skill(obs, self.rng)
        else:
            fired, _ = self.policy.sample_termination(obs, self.skill, self.rng)
            if fired:
                self.skill, _, _ = self.policy.select_skill(obs, self.rng)
        return self.policy.act(obs, self.skill, self.rng)[0]


@dataclass
class Session:
    id: str
    layout: K.Layout
    condition: str  # checkpoint label for the summary record
    agent: AgentSeat
    human_seat: int
    tick_rate: float
    horizon: int
    state: K.WorldState
    status: str = "lobby"
    score: float = 0.0
    seq: int = 0
    pending_action: int | None = None
    last_client_seq: int = -1
    tick_log: list[dict] = field(default_factory=list)

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq


def advance_tick(session: Session) -> None:
    """Advance the simulation one step; the tick loop is the only caller
    while a session runs, making it the sole state mutator."""
    human = session.pending_action
    session.pending_action = None
    if human is None:
        human = K.STAY
    agent = session.agent.act(session.layout, session.state,
                              1 - session.human_seat)
    joint = [0, 0]
    joint[session.human_seat] = human
    joint[1 - session.human_seat] = agent
    before = session.state
    session.state, team, shaped, _ = K.step(
        session.layout, before, (joint[0], joint[1])
    )
    session.score += team
    session.tick_log.append({
        "tick": before.tick,
        "positions": [list(p) for p in before.positions],
        "orientations": [K.ORIENT_NAMES[o] for o in before.orientations],
        "held": list(before.held),
        "actions": joint,
        "skill": session.agent.skill,
        "reward": team,
        "shaped": list(shaped),
        "terminated": before.tick + 1 >= session.horizon,
    })


def create_app(checkpoint_dir: str | Path, log_dir: str | Path,
               tick_rate: float = 6.0,
               ui_dir: str | Path | None = None) -> FastAPI:
    checkpoint_dir = Path(checkpoint_dir)
    log_dir = Path(log_dir)
    app = FastAPI(title="kitchen play service")
    app.state.sessions: dict[str, Session] = {}
    app.state.session_counter = 0

    @app.get("/layouts")
    def layouts() -> dict:
        return {"layouts": K.bundled_layout_names()}

    @app.get("/checkpoints")
    def checkpoints() -> dict:
        found = sorted(p.name for p in checkpoint_dir.glob("*.ckpt"))
        return {"checkpoints": found}

    def write_session_log(session: Session) -> Path:
        log_dir.mkdir(parents=True, exist_ok=True)
        path = log_dir / f"{session.id}.jsonl"
        with path.open("w") as fh:
            for row in session.tick_log:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
            fh.write(json.dumps({
                "summary": True,
                "condition": session.condition,
                "layout": session.layout.name,
                "total_reward": session.score,
                "ticks": len(session.tick_log),
                "human_seat": session.human_seat,
            }, sort_keys=True) + "\n")
        return path

    async def send(ws: WebSocket, lock: asyncio.Lock, payload: dict) -> None:
        async with lock:
            await ws.send_text(json.dumps(payload, sort_keys=True))

    def state_frame(session: Session, **extra) -> dict:
        return {
            "type": "state",
            "session": session.id,
            "seq": session.next_seq(),
            "tick": session.state.tick,
            "score": session.score,
            "status": session.status,
            "state": state_snapshot(session.state),
            **extra,
        }

    async def tick_loop(session: Session, ws: WebSocket, lock: asyncio.Lock):
        period = 1.0 / session.tick_rate
        loop = asyncio.get_running_loop()
        next_at = loop.time() + period
        while session.status == "running":
            await asyncio.sleep(max(0.0, next_at - loop.time()))
            next_at += period
            if session.status != "running":  # quit arrived mid-sleep
                break
            advance_tick(session)
            done = session.state.tick >= session.horizon
            if done:
                session.status = "finished"
            await send(ws, lock, state_frame(session))
            if done:
                write_session_log(session)
                await send(ws, lock, {
                    "type": "episode_end",
                    "session": session.id,
                    "seq": session.next_seq(),
                    "total_reward": session.score,
                })

    @app.websocket("/ws/play")
    async def play(ws: WebSocket):
        await ws.accept()
        lock = asyncio.Lock()
        session: Session | None = None
        ticker: asyncio.Task | None = None

        async def error(text: str) -> None:
            await send(ws, lock, {
                "type": "error",
                "session": session.id if session else None,
                "seq": session.next_seq() if session else 0,
                "text": text,
            })

        try:
            while True:
                raw = await ws.receive_text()
                try:
                    frame = json.loads(raw)
                except json.JSONDecodeError:
                    await error("frame is not valid JSON")
                    continue
                kind = frame.get("type")

                if kind == "join":
                    if session is not None:
                        await error("session already joined on this socket")
                        continue
                    try:
                        layout = K.load_layout(frame["layout"])
                    except (KeyError, K.LayoutError) as exc:
                        await error(f"unknown layout: {exc}")
                        continue
                    ckpt = checkpoint_dir / str(frame.get("checkpoint", ""))
                    if not ckpt.is_file():
                        await error(f"unknown checkpoint: {frame.get('checkpoint')!r}")
                        continue
                    try:
                        policy, _ = HierarchicalPolicy.load(ckpt)
                    except ValueError as exc:
                        await error(f"unreadable checkpoint: {exc}")
                        continue
                    human_seat = int(frame.get("human_seat", 0))
                    if human_seat not in (0, 1):
                        await error("human_seat must be 0 or 1")
                        continue
                    app.state.session_counter += 1
                    session = Session(
                        id=f"s{app.state.session_counter}",
                        layout=layout,
                        condition=ckpt.name,
                        agent=AgentSeat(
                            policy,
                            np.random.default_rng(int(frame.get("seed", 0))),
                        ),
                        human_seat=human_seat,
                        tick_rate=float(frame.get("tick_rate", tick_rate)),
                        horizon=min(
                            int(frame.get("horizon", layout.horizon)),
                            layout.horizon,
                        ),
                        state=K.reset(layout),
                    )
                    app.state.sessions[session.id] = session
                    await send(ws, lock, state_frame(
                        session, layout=layout_summary(layout),
                        horizon=session.horizon,
                    ))
                    continue

                if session is None:
                    await error("join a session first")
                    continue
                if frame.get("session") != session.id:
                    await error("unknown session id")
                    continue
                seq = frame.get("seq")
                if isinstance(seq, int):
                    if seq <= session.last_client_seq:
                        continue  # stale or replayed frame
                    session.last_client_seq = seq

                if kind == "input":
                    try:
                        action = parse_action(frame.get("action"))
                    except ValueError as exc:
                        await error(str(exc))
                        continue
                    session.pending_action = action  # latest wins
                elif kind == "start":
                    if session.status == "lobby":
                        session.status = "running"
                        ticker = asyncio.create_task(tick_loop(ws=ws, lock=lock,
                                                               session=session))
                    else:
                        await error(f"cannot start a {session.status} session")
                elif kind == "quit":
                    if session.status == "running":
                        session.status = "finished"
                        if ticker is not None:
                            await ticker
                        write_session_log(session)
                        await send(ws, lock, {
                            "type": "episode_end",
                            "session": session.id,
                            "seq": session.next_seq(),
                            "total_reward": session.score,
                        })
                    break
                else:
                    await error(f"unknown frame type {kind!r}")
        except WebSocketDisconnect:
            pass
        finally:
            if session is not None:
                was_running = session.status == "running"
                session.status = "finished"
                if ticker is not None and not ticker.done():
                    ticker.cancel()
                if was_running and session.tick_log:
                    write_session_log(session)
                app.state.sessions.pop(session.id, None)

    if ui_dir is not None:
        from starlette.staticfiles import StaticFiles

        # mounted last so /layouts, /checkpoints and /ws/play win the route
        # match; everything else falls through to the static client build
        app.mount("/", StaticFiles(directory=Path(ui_dir), html=True),
                  name="ui")

    return app
