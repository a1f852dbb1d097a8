"""A frame-by-frame session against the play service.

Trains a throwaway policy for a few seconds, saves it as a checkpoint,
starts the websocket service in-process, and plays a 12-tick episode with
a scripted "human" on seat 1 sending a few movement inputs (the browser
client maps arrow keys and space to these frames) while the policy drives
seat 0. Every frame crossing the socket is printed: client frames
prefixed ``->``, server frames ``<-``. Inputs apply on the next tick after
they arrive and the latest input wins a tick — the server simulates on
its own clock and never blocks on the client. Afterwards the session log
the server wrote is re-simulated tick by tick to confirm the logged score
is reproducible.

Requires the dev extras (the in-process client): pip install -e '.[dev]'

Run:  python3 demos/03_play_service_transcript.py
"""

import json
import tempfile
import warnings
from pathlib import Path

warnings.filterwarnings(
    "ignore", message="Using `httpx` with `starlette.testclient`"
)
from starlette.testclient import TestClient  # noqa: E402

from pasd.cli import main as cli_main
from pasd.config import TrainConfig
from pasd.server import create_app
from pasd.trainer import PASDTrainer


def show(prefix: str, frame: dict) -> None:
    print(f"{prefix} {json.dumps(frame, sort_keys=True)}")


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="play_demo_"))
    ckpt_dir = workdir / "checkpoints"
    log_dir = workdir / "sessions"
    ckpt_dir.mkdir()

    print("training a small throwaway policy for the agent seat ...")
    cfg = TrainConfig(
        layout="cramped_small", seed=0, total_steps=4_800, n_envs=4,
        horizon=60, n_skills=3, hidden=(16,), embed_dim=8,
        partners=("uniform_random",),
    )
    trainer = PASDTrainer(cfg)
    while trainer.env_steps < cfg.total_steps:
        trainer.iterate()
    trainer.save(ckpt_dir / "demo.ckpt")

    app = create_app(checkpoint_dir=ckpt_dir, log_dir=log_dir, tick_rate=60.0)
    # seat-1 inputs: walk left toward the onion pile, face it, grab an onion
    scripted_inputs = ["left", "left", "up", "interact"]

    with TestClient(app) as web:
        print(f"\nGET /layouts      -> {web.get('/layouts').json()}")
        print(f"GET /checkpoints  -> {web.get('/checkpoints').json()}\n")

        with web.websocket_connect("/ws/play") as ws:
            join = {"type": "join", "layout": "cramped_small",
                    "checkpoint": "demo.ckpt", "human_seat": 1,
                    "horizon": 12, "seed": 7}
            show("->", join)
            ws.send_json(join)
            lobby = ws.receive_json()
            show("<-", lobby)
            session = lobby["session"]
            seq = 0

            start = {"type": "start", "session": session, "seq": (seq := seq + 1)}
            show("->", start)
            ws.send_json(start)

            sent = 0
            score = None
            while True:
                frame = ws.receive_json()
                show("<-", frame)
                if frame["type"] == "episode_end":
                    score = frame["total_reward"]
                    break
                if sent < len(scripted_inputs):
                    msg = {"type": "input", "session": session,
                           "seq": (seq := seq + 1),
                           "action": scripted_inputs[sent]}
                    sent += 1
                    show("->", msg)
                    ws.send_json(msg)

    log_path = next(log_dir.glob("*.jsonl"))
    rows = log_path.read_text().splitlines()
    print(f"\nserver wrote {log_path.name}: {len(rows) - 1} tick rows + "
          f"1 summary row; episode score {score}")
    print("re-simulating the logged actions to verify the score ...")
    code = cli_main(["replay", str(log_path)])
    print(f"replay exit code {code} (0 = every logged reward reproduced)")


if __name__ == "__main__":
    main()
