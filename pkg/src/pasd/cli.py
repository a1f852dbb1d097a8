"""Command-line entry points.

Every command reads an optional JSON config file, applies command-line
overrides on top (flags > file > dataclass defaults), echoes the effective
configuration into its output directory, and is reproducible from that
echo plus the seeds inside it. Output root precedence: ``--out`` flag,
``PASD_OUTPUT_ROOT`` environment variable, then ``./runs``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import kitchen as K
from .config import PopulationConfig, TrainConfig
from .evaluate import (
    HierActor,
    evaluate,
    intra_inter_stats,
    sequence_embeddings,
    similarity_matrix,
    window_embedding_table,
)
from .policy import HierarchicalPolicy
from .population import PopulationTrainer
from .rollout import record_to_rollout, replay_joint_actions
from .trainer import PASDTrainer, resolve_partners

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class ConfigError(ValueError):
    """Bad flags, config file, or referenced paths; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are configuration errors
        self.print_usage(sys.stderr)
        raise ConfigError(message)


# --------------------------------------------------- dataclass <-> flags


def _coerce(name: str, type_str: str, value):
    """Parse a flag string (or JSON value from a config file) into the
    declared dataclass field type."""
    base = type_str.replace(" ", "")
    optional = "|None" in base
    base = base.replace("|None", "")
    if value is None or (isinstance(value, str) and value.lower() == "none"):
        if optional:
            return None
        raise ConfigError(f"{name}: null not allowed")
    try:
        if base.startswith("tuple["):
            inner = base[len("tuple["):].split(",")[0]
            items = value.split(",") if isinstance(value, str) else list(value)
            items = [i for i in items if i != ""]
            cast = {"str": str, "int": int, "float": float}[inner]
            return tuple(cast(i) for i in items)
        if base == "bool":
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("1", "true", "yes"):
                return True
            if str(value).lower() in ("0", "false", "no"):
                return False
            raise ValueError(value)
        return {"str": str, "int": int, "float": float}[base](value)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{name}: cannot parse {value!r} as {type_str}") from exc


def _add_config_flags(parser: argparse.ArgumentParser, cls) -> None:
    for f in dataclasses.fields(cls):
        parser.add_argument(
            f"--{f.name.replace('_', '-')}",
            dest=f.name,
            default=argparse.SUPPRESS,
            metavar=str(f.type).replace(" ", ""),
            help=f"(default: {f.default!r})",
        )


def _build_config(cls, args: argparse.Namespace):
    field_types = {f.name: str(f.type) for f in dataclasses.fields(cls)}
    data: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        for key, value in loaded.items():
            if key not in field_types:
                raise ConfigError(f"{path}: unknown field {key!r}")
            data[key] = _coerce(key, field_types[key], value)
    for key, value in vars(args).items():
        if key in field_types:
            data[key] = _coerce(key, field_types[key], value)
    try:
        return cls(**data)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args: argparse.Namespace, default_name: str) -> Path:
    if getattr(args, "out", None):
        run_dir = Path(args.out)
    else:
        root = Path(os.environ.get("PASD_OUTPUT_ROOT", "runs"))
        run_dir = root / default_name
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _echo_config(run_dir: Path, effective: dict) -> None:
    (run_dir / "config.json").write_text(
        json.dumps(effective, sort_keys=True, indent=2, default=list)
    )


def _load_policy(path: str) -> tuple[HierarchicalPolicy, dict]:
    ckpt = Path(path)
    if not ckpt.is_file():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    policy, manifest = HierarchicalPolicy.load(ckpt)
    return policy, manifest


# ------------------------------------------------------------- commands


def cmd_train_population(args) -> int:
    cfg = _build_config(PopulationConfig, args)
    run_dir = _out_dir(args, "population")
    _echo_config(run_dir, dataclasses.asdict(cfg.resolve()))
    manifest = PopulationTrainer(cfg, run_dir).train()
    n_ckpts = sum(len(a["checkpoints"]) for a in manifest["agents"])
    print(f"population manifest: {run_dir / 'population.json'}")
    print(f"checkpoints written: {n_ckpts}")
    return EXIT_OK


def cmd_train_pasd(args) -> int:
    cfg = _build_config(TrainConfig, args)
    run_dir = _out_dir(args, "pasd")
    trainer = PASDTrainer(cfg, run_dir)
    if args.resume:
        resume_path = Path(args.resume)
        if not resume_path.is_file():
            raise ConfigError(f"resume checkpoint not found: {resume_path}")
        trainer.load_state(resume_path)
        print(f"resumed at iteration {trainer.iteration} ({trainer.env_steps} steps)")

    def progress(row):
        if row["iteration"] % max(1, args.log_every) == 0:
            print(
                f"iter {row['iteration']:5d}  steps {row['env_steps']:>9d}  "
                f"return {row['team_return_mean']:8.2f}  "
                f"mixing {row['mixing_lambda']:.3f}  "
                f"contrastive {row['infonce_loss']:.3f}"
            )

    trainer.train(on_iteration=progress)
    print(f"final checkpoint: {run_dir / 'policy_final.ckpt'}")
    print(f"metrics: {run_dir / 'metrics.jsonl'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    policy, manifest = _load_policy(args.checkpoint)
    layout_name = args.layout or manifest.get("extra", {}).get("layout")
    if not layout_name:
        raise ConfigError("no --layout given and checkpoint does not name one")
    try:
        layout = K.load_layout(layout_name)
        partners = resolve_partners(tuple(args.partners.split(",")))
    except (K.LayoutError, ValueError, FileNotFoundError) as exc:
        raise ConfigError(str(exc)) from exc
    run_dir = _out_dir(args, "eval")
    _echo_config(run_dir, {
        "checkpoint": str(args.checkpoint),
        "layout": layout_name,
        "partners": args.partners.split(","),
        "episodes_per_pair": args.episodes,
        "seed": args.seed,
        "horizon": args.horizon,
        "probe_rollouts": args.probe_rollouts,
    })
    report = evaluate(
        layout,
        HierActor(policy),
        partners,
        episodes_per_pair=args.episodes,
        seed=args.seed,
        horizon=args.horizon,
        log_path=run_dir / "episodes.jsonl",
    )
    (run_dir / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2))
    print(f"report: {run_dir / 'report.json'}")
    print(f"overall mean return: {report['overall_mean']:.2f} "
          f"± {report['overall_std']:.2f}")

    if not args.no_plots:
        from . import plots

        table = window_embedding_table(
            policy, layout, partners,
            n_rollouts=args.probe_rollouts, seed=args.seed, horizon=args.horizon,
        )
        if table:
            emb = np.array([row["pooled"] for row in table])
            sm = similarity_matrix(emb, [row["skill"] for row in table])
            plots.similarity_heatmap(sm.matrix, sm.labels, run_dir / "heatmap.png")
            print(f"heatmap: {run_dir / 'heatmap.png'}")
        metrics = Path(args.metrics) if args.metrics else None
        if metrics is not None:
            if not metrics.is_file():
                raise ConfigError(f"metrics file not found: {metrics}")
            plots.training_curves(metrics, run_dir / "training_curves.png")
            print(f"training curves: {run_dir / 'training_curves.png'}")
    return EXIT_OK


def cmd_export_embeddings(args) -> int:
    policy, manifest = _load_policy(args.checkpoint)
    run_dir = _out_dir(args, "embeddings")
    records: list[dict] = []
    if args.trajectories:
        src = Path(args.trajectories)
        if not src.is_file():
            raise ConfigError(f"trajectory log not found: {src}")
        for i, line in enumerate(src.read_text().splitlines()):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "joint_actions" not in rec:
                continue  # summary rows in session logs carry no trajectory
            rollout = record_to_rollout(rec)
            records.extend(sequence_embeddings(
                policy, rollout, rollout_index=i,
                rng=np.random.default_rng([args.seed, i]),
            ))
        source = {"trajectories": str(src)}
    else:
        layout_name = args.layout or manifest.get("extra", {}).get("layout")
        if not layout_name:
            raise ConfigError("no --layout given and checkpoint does not name one")
        try:
            layout = K.load_layout(layout_name)
            partners = resolve_partners(tuple(args.partners.split(",")))
        except (K.LayoutError, ValueError, FileNotFoundError) as exc:
            raise ConfigError(str(exc)) from exc
        records = window_embedding_table(
            policy, layout, partners,
            n_rollouts=args.n_rollouts, seed=args.seed, horizon=args.horizon,
        )
        source = {
            "layout": layout_name,
            "partners": args.partners.split(","),
            "n_rollouts": args.n_rollouts,
        }
    if not records:
        raise ConfigError("no segments to export (empty trajectory source)")
    _echo_config(run_dir, {
        "checkpoint": str(args.checkpoint),
        "seed": args.seed,
        "variant": args.variant,
        **source,
    })
    with (run_dir / "embeddings.jsonl").open("w") as fh:
        for row in records:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    emb = np.array([row[args.variant] for row in records])
    skills = [row["skill"] for row in records]
    sm = similarity_matrix(emb, skills)
    intra, inter, gap = intra_inter_stats(sm)
    (run_dir / "similarity.json").write_text(json.dumps({
        "variant": args.variant,
        "intra": intra,
        "inter": inter,
        "gap": gap,
        **sm.to_record(),
    }, sort_keys=True, indent=2))
    if not args.no_plots:
        from . import plots

        plots.similarity_heatmap(sm.matrix, sm.labels, run_dir / "heatmap.png")
    print(f"embeddings: {run_dir / 'embeddings.jsonl'} ({len(records)} segments)")
    print(f"similarity: {run_dir / 'similarity.json'}")
    print(f"intra {intra:.4f}  inter {inter:.4f}  gap {gap:+.4f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    ckpt_dir = Path(args.checkpoint_dir)
    if not ckpt_dir.is_dir():
        raise ConfigError(f"checkpoint directory not found: {ckpt_dir}")
    if args.ui_dir and not Path(args.ui_dir).is_dir():
        raise ConfigError(f"ui directory not found: {args.ui_dir}")
    app = create_app(
        checkpoint_dir=ckpt_dir,
        log_dir=Path(args.log_dir) if args.log_dir else _out_dir(args, "sessions"),
        tick_rate=args.tick_rate,
        ui_dir=args.ui_dir,
    )
    print(f"serving on {args.host}:{args.port} "
          f"(checkpoints: {ckpt_dir}, tick rate: {args.tick_rate}/s)")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _replay_episode_record(rec: dict) -> tuple[bool, str]:
    rollout = record_to_rollout(rec, require_skills=False)
    expected = float(rec.get("team_return", rollout.team_return))
    ok = rollout.team_return == expected
    detail = f"team return {rollout.team_return:g} (logged {expected:g})"
    if ok and "event_counts" in rec:
        ok = rollout.event_counts == rec["event_counts"]
        if not ok:
            detail = f"event counts differ: {rollout.event_counts} vs {rec['event_counts']}"
    return ok, detail


def _replay_session_log(rows: list[dict]) -> tuple[bool, str]:
    summaries = [r for r in rows if r.get("summary")]
    ticks = [r for r in rows if "tick" in r and not r.get("summary")]
    if not summaries or not ticks:
        return False, "session log needs tick rows and a summary row"
    summary = summaries[-1]
    layout = K.load_layout(summary["layout"])
    joint = np.array([t["actions"] for t in ticks], dtype=int)
    _, team, _ = replay_joint_actions(layout, joint)
    total = float(team.sum())
    logged = float(summary["total_reward"])
    ok = total == logged and len(ticks) == int(summary["ticks"])
    return ok, f"replayed {len(ticks)} ticks, total {total:g} (logged {logged:g})"


def cmd_replay(args) -> int:
    src = Path(args.trajectories)
    if not src.is_file():
        raise ConfigError(f"trajectory log not found: {src}")
    rows = [json.loads(line) for line in src.read_text().splitlines() if line.strip()]
    if not rows:
        raise ConfigError(f"{src}: empty log")
    failures = 0
    if any("joint_actions" in r for r in rows):
        for i, rec in enumerate(r for r in rows if "joint_actions" in r):
            ok, detail = _replay_episode_record(rec)
            failures += 0 if ok else 1
            print(f"episode {i}: {'ok' if ok else 'MISMATCH'} — {detail}")
    else:
        ok, detail = _replay_session_log(rows)
        failures += 0 if ok else 1
        print(f"session: {'ok' if ok else 'MISMATCH'} — {detail}")
    if failures:
        print(f"{failures} trajectory record(s) failed to replay")
        return EXIT_RUNTIME
    return EXIT_OK


# ----------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pasd", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (default: "
                       "$PASD_OUTPUT_ROOT/<command> or runs/<command>)")

    p = sub.add_parser("train-population",
                       help="self-play partner population with diversity bonus")
    common(p)
    _add_config_flags(p, PopulationConfig)
    p.set_defaults(func=cmd_train_population)

    p = sub.add_parser("train-pasd",
                       help="skill-discovery training loop with intrinsic rewards")
    common(p)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--log-every", type=int, default=10,
                   help="print a progress line every N iterations")
    _add_config_flags(p, TrainConfig)
    p.set_defaults(func=cmd_train_pasd)

    p = sub.add_parser("evaluate", help="score a checkpoint against partners")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--layout", help="default: the layout the checkpoint trained on")
    p.add_argument("--partners", required=True,
                   help="comma list: scripted names, checkpoint paths, or "
                        "population:<dir>")
    p.add_argument("--episodes", type=int, default=5,
                   help="episodes per (partner, start position)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--metrics", help="metrics.jsonl to render training curves from")
    p.add_argument("--probe-rollouts", type=int, default=10,
                   help="rollouts for the similarity heatmap")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-embeddings",
                       help="segment embedding table + similarity matrix")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--trajectories",
                   help="trajectory log to embed (default: fresh rollouts)")
    p.add_argument("--layout")
    p.add_argument("--partners", default="uniform_random",
                   help="partners for fresh rollouts")
    p.add_argument("--n-rollouts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--variant", choices=("pooled", "representative"),
                   default="pooled", help="embedding used for the similarity matrix")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_export_embeddings)

    p = sub.add_parser("serve", help="websocket play service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--checkpoint-dir", default="runs/pasd",
                   help="directory listed by /checkpoints")
    p.add_argument("--log-dir", help="session log directory")
    p.add_argument("--tick-rate", type=float, default=6.0)
    p.add_argument("--ui-dir",
                   help="static browser-client build to serve at / "
                        "(e.g. frontend/)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay",
                       help="verify a trajectory log re-simulates to its "
                            "logged rewards")
    p.add_argument("trajectories")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 — boundary: report, don't crash
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
