"""Command-line entry points.

Exit codes: 0 success, 2 configuration/usage error, 1 runtime failure.
Every run writes a manifest.json (config hash, seed, input/output content
hashes, wall time) next to its primary output. TERT_DETERMINISTIC=1 is an
alias for --deterministic.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from .io.config import ConfigError, ExperimentConfig, load_config
from .io.manifest import RunManifest


def _load_experiment(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed,
                                  ppo=dataclasses.replace(cfg.ppo, seed=args.seed))
    if getattr(args, "deterministic", False) or os.environ.get("TERT_DETERMINISTIC") == "1":
        cfg = dataclasses.replace(cfg, deterministic=True)
    return cfg


def _manifest(args, cfg: ExperimentConfig, command: str) -> RunManifest:
    return RunManifest(command, cfg.to_dict(), cfg.seed)


def _finish(manifest: RunManifest, out_dir, outputs) -> int:
    for path in outputs:
        manifest.add_output(path)
    manifest.write(out_dir)
    return 0


def _load_ckpt(path):
    from .models.checkpoint import load_checkpoint

    return load_checkpoint(path)


def _teacher_from(path):
    from .models.teacher import TeacherBundle

    return TeacherBundle.from_checkpoint(_load_ckpt(path))


# -- subcommands -----------------------------------------------------------

def cmd_train_teacher(args) -> int:
    from .ppo import train_teacher

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "train-teacher")
    out = Path(args.out)
    ppo = dataclasses.replace(cfg.ppo, num_envs=cfg.num_envs)
    train_teacher(ppo, terrain_kinds=cfg.terrain_kinds, range_set=cfg.range_set,
                  curriculum=not args.no_curriculum, out_dir=out,
                  quiet=args.quiet)
    return _finish(manifest, out, [out / "teacher.tckp", out / "teacher_curve.csv"])


def cmd_collect(args) -> int:
    from .distill import collect_teacher_dataset
    from .io.trajfile import write_trajectories

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "collect")
    manifest.add_input(args.ckpt)
    teacher = _teacher_from(args.ckpt)
    steps = args.steps if args.steps is not None else cfg.distill.offline_timesteps
    dataset = collect_teacher_dataset(
        teacher, steps, kinds=cfg.terrain_kinds, range_set=cfg.range_set,
        seed=cfg.seed, num_envs=cfg.distill.num_envs, record_latents=args.latents,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trajectories(dataset, out)
    return _finish(manifest, out.parent, [out])


def cmd_pretrain(args) -> int:
    from .distill import new_student, pretrain_offline, transformer_checkpoint
    from .io.csvout import export_csv
    from .io.trajfile import read_trajectories
    from .models.checkpoint import save_checkpoint

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "pretrain")
    datasets = []
    for path in args.data:
        manifest.add_input(path)
        datasets.append(read_trajectories(path))
    model = new_student(cfg.transformer, cfg.seed)
    model, curve = pretrain_offline(datasets, model, cfg.distill, seed=cfg.seed,
                                    quiet=args.quiet)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(transformer_checkpoint(model, "transformer",
                                           {"variant": "no-oc", "seed": cfg.seed}), out)
    curve_path = out.with_suffix(".curve.csv")
    export_csv(["update", "loss", "lr", "holdout_mse"], curve, curve_path)
    return _finish(manifest, out.parent, [out, curve_path])


def cmd_correct(args) -> int:
    from .distill import correct_online, transformer_checkpoint
    from .io.trajfile import read_trajectories
    from .models.checkpoint import save_checkpoint
    from .models.transformer import CausalTransformer, TransformerSpec

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "correct")
    ckpt = _load_ckpt(args.ckpt)
    manifest.add_input(args.ckpt)
    manifest.add_input(args.teacher)
    spec_dict = {k: v for k, v in ckpt.spec.items() if k != "body"}
    model = CausalTransformer(TransformerSpec(**spec_dict))
    ckpt.load_into(model.params)
    teacher = _teacher_from(args.teacher)
    base = []
    for path in args.data or []:
        manifest.add_input(path)
        base.append(read_trajectories(path))
    model, info = correct_online(model, teacher, cfg.distill,
                                 kinds=cfg.terrain_kinds, range_set=cfg.range_set,
                                 seed=cfg.seed, base_datasets=base,
                                 quiet=args.quiet)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(transformer_checkpoint(model, "transformer",
                                           {"variant": "tert", "seed": cfg.seed,
                                            "gaps": info["gaps"]}), out)
    return _finish(manifest, out.parent, [out])


def cmd_train_baseline(args) -> int:
    from .distill import tcn_checkpoint, train_tcn_student
    from .models.checkpoint import save_checkpoint

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "train-baseline")
    manifest.add_input(args.teacher)
    teacher = _teacher_from(args.teacher)
    tcn, info = train_tcn_student(teacher, cfg.distill, kinds=cfg.terrain_kinds,
                                  range_set=cfg.range_set, seed=cfg.seed,
                                  quiet=args.quiet)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(tcn_checkpoint(tcn, "tcn-latent",
                                   {"variant": "rma-tcn", "seed": cfg.seed,
                                    "latent_mse": info["latent_mse"]},
                                   body=teacher), out)
    return _finish(manifest, out.parent, [out])


def cmd_eval(args) -> int:
    from .evalm import evaluate, write_metric_rows
    from .io.trajfile import write_trajectories

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "eval")
    manifest.add_input(args.ckpt)
    ckpt = _load_ckpt(args.ckpt)
    kinds = [args.terrain] if args.terrain else cfg.terrain_kinds
    rows, raw = evaluate(ckpt, kinds=kinds, episodes=args.episodes,
                         seed=cfg.seed, range_set="testing")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_metric_rows(rows, out)
    outputs = [out]
    if args.save_trajectories:
        for (kind, diff), dataset in raw.items():
            tpath = out.parent / f"trajs_{kind}_{diff:g}.traj"
            write_trajectories(dataset, tpath)
            outputs.append(tpath)
    return _finish(manifest, out.parent, outputs)


def cmd_attn(args) -> int:
    from .evalm import dump_attention, hidden_from_checkpoint
    from .io.csvout import export_matrix_csv
    from .sim import TerrainSpec

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "attn")
    manifest.add_input(args.ckpt)
    model = hidden_from_checkpoint(_load_ckpt(args.ckpt))
    from .models.transformer import CausalTransformer

    if not isinstance(model, CausalTransformer):
        raise ConfigError("attn requires a transformer checkpoint")
    spec = TerrainSpec(args.terrain, args.difficulty, cfg.seed + 9200)
    matrix = dump_attention(model, spec, steps=args.steps, seed=cfg.seed,
                            per_layer=args.per_layer)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.per_layer:
        matrix = matrix.reshape(matrix.shape[0], -1)
    export_matrix_csv(matrix, out, col_prefix="w")
    return _finish(manifest, out.parent, [out])


def cmd_hidden(args) -> int:
    from .evalm import dump_hidden, hidden_from_checkpoint
    from .io.csvout import export_csv

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "hidden")
    manifest.add_input(args.ckpt)
    model = hidden_from_checkpoint(_load_ckpt(args.ckpt))
    labels, matrix = dump_hidden(model, kinds=cfg.terrain_kinds, steps=args.steps,
                                 seed=cfg.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = ["terrain"] + [f"h{j}" for j in range(matrix.shape[1])]
    rows = [[label] + [float(v) for v in vec] for label, vec in zip(labels, matrix)]
    export_csv(header, rows, out)
    return _finish(manifest, out.parent, [out])


def cmd_sweep_seqlen(args) -> int:
    from .evalm import sequence_length_sweep
    from .io.csvout import export_csv
    from .io.trajfile import read_trajectories

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "sweep-seqlen")
    datasets = []
    for path in args.data:
        manifest.add_input(path)
        datasets.append(read_trajectories(path))
    rows = sequence_length_sweep(datasets, cfg.transformer, cfg.distill,
                                 t_values=args.lengths, seed=cfg.seed,
                                 eval_kinds=cfg.terrain_kinds, quiet=args.quiet)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_csv(["T", "mean_return", "holdout_mse"], rows, out)
    return _finish(manifest, out.parent, [out])


def cmd_ablate(args) -> int:
    from .distill import train_variant
    from .io.trajfile import read_trajectories
    from .models.checkpoint import save_checkpoint

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "ablate")
    manifest.add_input(args.teacher)
    teacher = _teacher_from(args.teacher)
    datasets = []
    for path in args.data or []:
        manifest.add_input(path)
        datasets.append(read_trajectories(path))
    ckpt, _ = train_variant(args.variant, teacher, datasets, cfg.distill,
                            tspec=cfg.transformer, terrain_kinds=cfg.terrain_kinds,
                            range_set=cfg.range_set, seed=cfg.seed,
                            quiet=args.quiet)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, out)
    return _finish(manifest, out.parent, [out])


def cmd_export_terrain(args) -> int:
    from .io.csvout import export_csv
    from .sim import TerrainSpec
    from .sim.terrain import generate_terrain

    cfg = _load_experiment(args)
    manifest = _manifest(args, cfg, "export-terrain")
    spec = TerrainSpec(args.terrain, args.difficulty, args.terrain_seed)
    xs, hs = generate_terrain(spec).grid(args.resolution)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_csv(["x", "height"], [[float(x), float(h)] for x, h in zip(xs, hs)], out)
    return _finish(manifest, out.parent, [out])


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .distill.variants import VARIANTS
    from .sim import KINDS

    parser = argparse.ArgumentParser(
        prog="tert", description="Terrain Transformer training pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", required=out_required, help="output path")
        p.add_argument("--deterministic", action="store_true",
                       help="bit-reproducible mode (also TERT_DETERMINISTIC=1)")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("train-teacher", help="PPO teacher training")
    common(p)
    p.add_argument("--no-curriculum", action="store_true")
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("collect", help="teacher dataset collection")
    common(p)
    p.add_argument("--ckpt", required=True, help="teacher checkpoint")
    p.add_argument("--steps", type=int, help="timesteps to collect")
    p.add_argument("--latents", action="store_true",
                   help="record teacher latents alongside actions")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("pretrain", help="offline Transformer pretraining")
    common(p)
    p.add_argument("--data", nargs="+", required=True, help="trajectory files")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("correct", help="online DAgger correction")
    common(p)
    p.add_argument("--ckpt", required=True, help="pretrained student checkpoint")
    p.add_argument("--teacher", required=True, help="teacher checkpoint")
    p.add_argument("--data", nargs="*", help="offline datasets to keep mixing in")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("train-baseline", help="RMA-style TCN latent student")
    common(p)
    p.add_argument("--teacher", required=True)
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("eval", help="metric evaluation of any checkpoint")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--terrain", choices=KINDS)
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--save-trajectories", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attn", help="attention heatmap dump")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--terrain", choices=KINDS, default="stairs-down")
    p.add_argument("--difficulty", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--per-layer", action="store_true")
    p.set_defaults(func=cmd_attn)

    p = sub.add_parser("hidden", help="last-hidden-layer activation dump")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.set_defaults(func=cmd_hidden)

    p = sub.add_parser("sweep-seqlen", help="sequence-length sweep")
    common(p)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--lengths", nargs="+", type=int, default=[1, 5, 10, 20])
    p.set_defaults(func=cmd_sweep_seqlen)

    p = sub.add_parser("ablate", help="train an ablation variant")
    common(p)
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--teacher", required=True)
    p.add_argument("--data", nargs="*")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export-terrain", help="heightfield CSV export")
    common(p)
    p.add_argument("--terrain", choices=KINDS, required=True)
    p.add_argument("--difficulty", type=float, default=0.5)
    p.add_argument("--terrain-seed", type=int, default=0)
    p.add_argument("--resolution", type=float, default=0.01)
    p.set_defaults(func=cmd_export_terrain)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
