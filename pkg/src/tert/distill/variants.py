"""Full pipeline and ablation variants."""

from __future__ import annotations

import dataclasses

import numpy as np

from ..io.trajfile import TrajectoryDataset
from ..models.checkpoint import PolicyCheckpoint
from ..models.tcn import TCN
from ..models.teacher import TeacherBundle
from ..models.transformer import CausalTransformer, TransformerSpec
from ..sim.env import OBS_DIM, OBS_SCALE
from .config import DistillConfig
from .correct import correct_online
from .pretrain import pretrain_offline
from .tcn_train import TcnHistorySampler, train_tcn_on_histories, train_tcn_student

VARIANTS = ("tert", "no-oc", "no-op", "tcn-student", "latent-transformer")


def new_student(tspec: TransformerSpec, seed: int) -> CausalTransformer:
    if tspec.obs_scale is None and tspec.obs_dim == OBS_DIM:
        tspec = dataclasses.replace(tspec, obs_scale=tuple(float(v) for v in OBS_SCALE))
    return CausalTransformer(tspec, rng=np.random.default_rng((seed, 29)))


def transformer_checkpoint(model: CausalTransformer, kind: str = "transformer",
                           metadata: dict | None = None,
                           body: TeacherBundle | None = None) -> PolicyCheckpoint:
    params = dict(model.params)
    spec = model.spec.to_dict()
    if body is not None:  # deployment needs the frozen policy body too
        params.update(body.policy.params)
        spec["body"] = body.spec_dict()
    return PolicyCheckpoint.from_params(kind, spec, params, metadata)


def tcn_checkpoint(tcn: TCN, kind: str, metadata: dict | None = None,
                   body: TeacherBundle | None = None) -> PolicyCheckpoint:
    params = dict(tcn.params)
    spec = {"in_dim": tcn.in_dim, "out_dim": tcn.out_dim, "history": tcn.history}
    if tcn.in_scale is not None:
        spec["in_scale"] = list(tcn.in_scale)
    if body is not None:
        params.update(body.policy.params)
        spec["body"] = body.spec_dict()
    return PolicyCheckpoint.from_params(kind, spec, params, metadata)


def train_variant(kind: str, teacher: TeacherBundle,
                  offline_dataset: TrajectoryDataset | list[TrajectoryDataset],
                  cfg: DistillConfig, tspec: TransformerSpec | None = None,
                  terrain_kinds=None, range_set: str = "training", seed: int = 0,
                  quiet: bool = True) -> tuple[PolicyCheckpoint, dict]:
    """Train one pipeline variant end to end and return (checkpoint, info).

    kinds: tert = offline pretraining then online correction;
    no-oc = pretraining only; no-op = online correction from random init;
    tcn-student = TCN cloning actions end-to-end through both stages;
    latent-transformer = Transformer regressing the 12-d privileged latent,
    deployed through the frozen teacher policy body.
    """
    if kind not in VARIANTS:
        raise ValueError(f"unknown variant {kind!r}; expected one of {VARIANTS}")
    datasets = (offline_dataset if isinstance(offline_dataset, list)
                else [offline_dataset])
    tspec = tspec or TransformerSpec()
    info: dict = {"variant": kind}
    meta = {"variant": kind, "seed": seed}

    if kind == "tert":
        model = new_student(tspec, seed)
        model, info["offline_curve"] = pretrain_offline(datasets, model, cfg,
                                                        seed=seed, quiet=quiet)
        model, online = correct_online(model, teacher, cfg, kinds=terrain_kinds,
                                       range_set=range_set, seed=seed,
                                       base_datasets=datasets, quiet=quiet)
        info.update(online)
        return transformer_checkpoint(model, "transformer", meta), info

    if kind == "no-oc":
        model = new_student(tspec, seed)
        model, info["offline_curve"] = pretrain_offline(datasets, model, cfg,
                                                        seed=seed, quiet=quiet)
        return transformer_checkpoint(model, "transformer", meta), info

    if kind == "no-op":
        model = new_student(tspec, seed)  # explicitly from scratch
        model, online = correct_online(model, teacher, cfg, kinds=terrain_kinds,
                                       range_set=range_set, seed=seed,
                                       base_datasets=[], quiet=quiet)
        info.update(online)
        return transformer_checkpoint(model, "transformer", meta), info

    if kind == "tcn-student":
        tcn = TCN(teacher.obs_dim + teacher.act_dim, teacher.act_dim,
                  rng=np.random.default_rng((seed, 23)),
                  in_scale=tuple(OBS_SCALE) + (1.0,) * teacher.act_dim)
        sampler = TcnHistorySampler(datasets, tcn.history, label="action")
        info["offline_curve"] = train_tcn_on_histories(
            tcn, sampler, cfg, cfg.offline_updates, seed, quiet=quiet)
        from .correct import rollout_student, action_gap
        from .tcn_train import TcnBatchPolicy
        aggregate = list(datasets)
        info["gaps"] = []
        for rnd in range(cfg.correction_rounds):
            policy = TcnBatchPolicy(tcn, cfg.num_envs, head="action")
            rollout = rollout_student(policy, teacher, cfg.correction_timesteps,
                                      kinds=terrain_kinds, range_set=range_set,
                                      seed=seed * 1000 + rnd, num_envs=cfg.num_envs)
            info["gaps"].append(action_gap(rollout))
            aggregate.append(rollout)
            sampler = TcnHistorySampler(aggregate, tcn.history, label="action")
            train_tcn_on_histories(tcn, sampler, cfg, cfg.correction_updates,
                                   seed + rnd, quiet=quiet)
        return tcn_checkpoint(tcn, "tcn-student", meta), info

    # latent-transformer
    for ds in datasets:
        if any(t.latents is None for t in ds.trajectories):
            raise ValueError("latent-transformer needs a dataset collected with "
                             "record_latents=True")
    lat_spec = TransformerSpec(**{**tspec.to_dict(), "out_dim": teacher.latent_dim})
    model = new_student(lat_spec, seed)
    model, info["offline_curve"] = pretrain_offline(datasets, model, cfg, seed=seed,
                                                    label="latent", quiet=quiet)
    model, online = correct_online(model, teacher, cfg, kinds=terrain_kinds,
                                   range_set=range_set, seed=seed,
                                   base_datasets=datasets, head="latent",
                                   quiet=quiet)
    info.update(online)
    return transformer_checkpoint(model, "latent-transformer", meta,
                                  body=teacher), info
