"""Adversarial training loops: teacher, student, and feature distillation.

The conditional GAN objective follows the vanilla log-loss in its
numerically stable log-sigmoid form, with the non-saturating generator
variant; the reconstruction term is L1.  A student adds a distillation term
over trunk activations: either the negated alignment score between teacher
and student features (which needs no extra trainable layers and tolerates
differing channel counts), or an MSE baseline through learnable 1x1
projections.

Teacher features never receive gradients.  Because the teacher is frozen
throughout student training and the dataset is finite, teacher activations
are precomputed once per sample and reused across epochs; this changes
nothing numerically.

All loops are deterministic functions of (seed, config): batching order,
initialization and updates are all driven by explicitly keyed PCG streams.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .arch import Activation, Conv, GeneratorArch, arch_hash, build_resnet_template
from .engine import Adam, Tape, Var
from .errors import DivergenceError, TapMismatch
from .runtime import ExecModel, forward_arch, init_params, lift_params, load_checkpoint, save_checkpoint
from .tasks import SyntheticTask, batch_arrays

DEFAULT_LR = 2e-4
DEFAULT_BATCH = 8
ADAM_BETAS = (0.5, 0.999)

DESK_BASE_CH = 12
DESK_BLOCKS = 3
DESK_IMAGE = 32
DESK_FLOOR = 4


@dataclass
class LossWeights:
    lambda_adv: float = 1.0
    lambda_recon: float = 100.0
    lambda_dist: float = 1.0

    def __post_init__(self):
        if min(self.lambda_adv, self.lambda_recon, self.lambda_dist) < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass
class KDConfig:
    mode: str = "ka"  # "ka" | "mse" | "none"
    tap_points: list = None

    def __post_init__(self):
        if self.mode not in ("ka", "mse", "none"):
            raise ValueError(f"unknown distillation mode {self.mode!r}")


def default_tap_points(n_blocks: int) -> list:
    """Trunk entry plus the block outputs at thirds: four taps for 3+ blocks."""
    idx = sorted({math.ceil(n_blocks / 3), math.ceil(2 * n_blocks / 3), n_blocks})
    return ["head"] + [f"block{i}" for i in idx]


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    final: dict = field(default_factory=dict)
    seed: int = 0
    config_hash: str = ""
    wall_clock_s: float = 0.0

    def to_dict(self):
        return {
            "epochs": self.epochs,
            "final": self.final,
            "seed": int(self.seed),
            "config_hash": self.config_hash,
            "wall_clock_s": float(self.wall_clock_s),
        }


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# architectures around the generator


def desk_teacher_arch() -> GeneratorArch:
    """Default desk-scale teacher: six-branch blocks on 32x32 edge maps."""
    return build_resnet_template(
        DESK_BASE_CH, DESK_BLOCKS, 1, 3, "incres", "instance", input_hw=DESK_IMAGE, name="desk-teacher"
    )


def desk_task(seed: int = 7) -> SyntheticTask:
    return SyntheticTask(seed=seed, image_size=DESK_IMAGE)


def build_patch_discriminator(in_ch: int, input_hw: int = DESK_IMAGE) -> GeneratorArch:
    """Three-conv conditional patch discriminator emitting a logit grid."""
    head = [
        Conv(3, in_ch, 32, 2, "zero", bias=True),
        Activation("leaky_relu"),
        Conv(3, 32, 64, 2, "zero", bias=True),
        Activation("leaky_relu"),
        Conv(3, 64, 1, 1, "zero", bias=True),
    ]
    return GeneratorArch("patch-disc", (in_ch, input_hw, input_hw), head, [], tail=[])


# ---------------------------------------------------------------------------
# losses


def gan_d_loss(real_logits, fake_logits) -> Var:
    """-E[log D(real)] - E[log(1 - D(fake))] over patch logits."""
    real = real_logits if isinstance(real_logits, Var) else Var(np.asarray(real_logits))
    fake = fake_logits if isinstance(fake_logits, Var) else Var(np.asarray(fake_logits))
    return engine.add_scalars(engine.gan_logit_loss(real, True), engine.gan_logit_loss(fake, False))


def gan_g_loss(fake_logits) -> Var:
    """Non-saturating generator term: -E[log D(fake)]."""
    fake = fake_logits if isinstance(fake_logits, Var) else Var(np.asarray(fake_logits))
    return engine.gan_logit_loss(fake, True)


def adv_loss(disc: ExecModel, x: np.ndarray, y: np.ndarray, fake: np.ndarray):
    """Evaluate (loss_D, loss_G) for a conditional patch discriminator."""
    tape = Tape()
    zr, _, _ = disc.forward(tape, np.concatenate([x, y], 1), training=False, trainable=False)
    zf, _, _ = disc.forward(tape, np.concatenate([x, fake], 1), training=False, trainable=False)
    return float(gan_d_loss(zr, zf).value), float(gan_g_loss(zf).value)


def dist_loss(teacher_feats: dict, student_feats: dict, cfg: KDConfig, proj_vars: dict = None) -> Var:
    """Distillation term over matching tap points.

    Teacher entries are constants (n, p) or (n, c, h, w); student entries are
    Vars still on a tape.  In "ka" mode this is minus the summed alignment
    scores; in "mse" mode, mean squared error after the per-tap projection.
    """
    if cfg.mode == "none":
        return Var(np.zeros((), np.float64))
    taps = cfg.tap_points or sorted(student_feats)
    missing = [t for t in taps if t not in teacher_feats or t not in student_feats]
    if missing:
        raise TapMismatch(f"tap points missing from features: {missing}")
    terms = []
    for tap in taps:
        sf = student_feats[tap]
        if not isinstance(sf, Var):
            sf = Var(np.asarray(sf, np.float32))
        tf = teacher_feats[tap]
        tf = tf.value if isinstance(tf, Var) else np.asarray(tf)
        if cfg.mode == "ka":
            if sf.value.ndim == 4:
                sf = engine.flatten_features(sf)
            if tf.ndim == 4:
                tf = tf.reshape(tf.shape[0], -1)
            terms.append(engine.ka_score(sf, tf))
        else:
            w = proj_vars[f"proj.{tap}.w"]
            b = proj_vars[f"proj.{tap}.b"]
            projected = engine.conv2d(sf, w, b)
            terms.append(engine.mse_mean(projected, tf))
    total = engine.add_scalars(*terms)
    return engine.scale(total, -1.0) if cfg.mode == "ka" else total


# ---------------------------------------------------------------------------
# shared loop machinery


def _epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), 0x0E0C, int(epoch)))))
    return rng.permutation(n)


def _train_arrays(task: SyntheticTask):
    """Materialize the (deterministic) training set once per loop."""
    return batch_arrays([task.train_pair(i) for i in range(task.n_train)])

def _check_finite(step_losses: dict):
    for k, v in step_losses.items():
        if not np.isfinite(v):
            raise DivergenceError(f"{k} diverged to {v}")


def image_metrics(pred: np.ndarray, target: np.ndarray) -> dict:
    """L1 and PSNR over [-1, 1] images; PSNR capped at 99."""
    diff = pred.astype(np.float64) - target.astype(np.float64)
    l1 = float(np.mean(np.abs(diff)))
    mse = float(np.mean(diff * diff))
    psnr = 99.0 if mse == 0.0 else min(99.0, 10.0 * math.log10(4.0 / mse))
    return {"l1": l1, "psnr": float(psnr)}


def evaluate_model(gen: ExecModel, task: SyntheticTask, batch_size: int = DEFAULT_BATCH) -> dict:
    preds, targets = [], []
    for start in range(0, task.n_val, batch_size):
        pairs = [task.val_pair(i) for i in range(start, min(start + batch_size, task.n_val))]
        x, y = batch_arrays(pairs)
        preds.append(gen.predict(x))
        targets.append(y)
    return image_metrics(np.concatenate(preds), np.concatenate(targets))


def _epoch_means(records: list) -> dict:
    return {k: float(np.mean([r[k] for r in records])) for k in records[0]}


def _disc_step(disc, adam_d, x, target, fake_value):
    tape = Tape()
    dvars = lift_params(disc.params, tape, trainable=True)
    zr, _ = forward_arch(disc.arch, dvars, disc.params, Var(np.concatenate([x, target], 1), tape), True)
    zf, _ = forward_arch(disc.arch, dvars, disc.params, Var(np.concatenate([x, fake_value], 1), tape), True)
    loss_d = gan_d_loss(zr, zf)
    tape.backward(loss_d)
    adam_d.step(disc.params, {pid: v.grad for pid, v in dvars.items() if v.grad is not None})
    return float(loss_d.value)


# ---------------------------------------------------------------------------
# teacher


def train_teacher(
    arch: GeneratorArch,
    task: SyntheticTask,
    epochs: int,
    lr: float = DEFAULT_LR,
    seed: int = 0,
    weights: LossWeights = None,
    batch_size: int = DEFAULT_BATCH,
    out_dir=None,
):
    """Adversarial + L1 training from scratch; returns (gen, disc, report)."""
    t0 = time.perf_counter()
    weights = weights or LossWeights(lambda_dist=0.0)
    gen = ExecModel(arch, init_params(arch, seed))
    disc_arch = build_patch_discriminator(arch.input_shape[0] + 3, arch.input_shape[1])
    disc = ExecModel(disc_arch, init_params(disc_arch, seed + 0x0D15C))
    adam_g = Adam(lr, *ADAM_BETAS)
    adam_d = Adam(lr, *ADAM_BETAS)
    cfg = {
        "kind": "teacher",
        "arch": arch_hash(arch),
        "task": [task.seed, task.image_size, task.n_train, task.n_val],
        "epochs": epochs,
        "lr": lr,
        "batch_size": batch_size,
        "seed": seed,
        "weights": [weights.lambda_adv, weights.lambda_recon, weights.lambda_dist],
    }
    report = TrainReport(seed=seed, config_hash=config_hash(cfg))
    train_x, train_y = _train_arrays(task)
    for epoch in range(epochs):
        order = _epoch_order(seed, epoch, task.n_train)
        records = []
        for start in range(0, task.n_train, batch_size):
            idx = order[start : start + batch_size]
            x, y = train_x[idx], train_y[idx]
            # one generator forward per step: its detached value feeds the
            # discriminator update, the Var continues into the generator loss
            tape = Tape()
            fake, _, gvars = gen.forward(tape, x, training=True)
            loss_d = _disc_step(disc, adam_d, x, y, fake.value)
            z, _, _ = disc.forward(tape, engine.concat(Var(x, tape), fake), training=True, trainable=False)
            loss_adv = gan_g_loss(z)
            loss_recon = engine.l1_mean(fake, y)
            total = engine.weighted_sum([loss_adv, loss_recon], [weights.lambda_adv, weights.lambda_recon])
            tape.backward(total)
            adam_g.step(gen.params, {pid: v.grad for pid, v in gvars.items() if v.grad is not None})

            rec = {
                "loss_d": loss_d,
                "loss_g": float(loss_adv.value),
                "loss_recon": float(loss_recon.value),
                "loss_dist": 0.0,
            }
            _check_finite(rec)
            records.append(rec)
        report.epochs.append(_epoch_means(records))
    report.final = evaluate_model(gen, task, batch_size)
    report.wall_clock_s = time.perf_counter() - t0
    if out_dir is not None:
        save_checkpoint(out_dir, gen.arch, gen.params, disc.arch, disc.params, report.to_dict())
    return gen, disc, report


# ---------------------------------------------------------------------------
# student


def _teacher_cache(teacher: ExecModel, task: SyntheticTask, taps: list, want_taps: bool, want_outputs: bool, batch_size: int):
    """Precompute frozen-teacher activations for every training sample."""
    feats = {t: [] for t in taps} if want_taps else None
    outputs = [] if want_outputs else None
    if not want_taps and not want_outputs:
        return None, None
    for start in range(0, task.n_train, batch_size):
        pairs = [task.train_pair(i) for i in range(start, min(start + batch_size, task.n_train))]
        x, _ = batch_arrays(pairs)
        tape = Tape()
        out, tap_vars, _ = teacher.forward(tape, x, training=False, want_taps=want_taps, trainable=False)
        if want_taps:
            missing = [t for t in taps if t not in tap_vars]
            if missing:
                raise TapMismatch(f"teacher has no taps {missing}")
            for t in taps:
                feats[t].append(tap_vars[t].value.astype(np.float32))
        if want_outputs:
            outputs.append(out.value.astype(np.float32))
    feats = {t: np.concatenate(chunks) for t, chunks in feats.items()} if want_taps else None
    outputs = np.concatenate(outputs) if want_outputs else None
    return feats, outputs


def _init_projections(kd: KDConfig, teacher_arch: GeneratorArch, student_arch: GeneratorArch, seed: int):
    """1x1 convs mapping student tap channels to teacher tap channels.

    Every tap sits on the residual trunk, so the channel counts are the two
    archs' block widths.
    """
    tc = teacher_arch.blocks[0].channels
    sc = student_arch.blocks[0].channels
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), 0x9207))))
    proj = OrderedDict()
    for tap in kd.tap_points:
        proj[f"proj.{tap}.w"] = rng.standard_normal((tc, sc, 1, 1), dtype=np.float32) * 0.02
        proj[f"proj.{tap}.b"] = np.zeros(tc, np.float32)
    return proj


def train_student(
    teacher: ExecModel,
    teacher_disc: ExecModel,
    student_arch: GeneratorArch,
    task: SyntheticTask,
    weights: LossWeights = None,
    kd: KDConfig = None,
    epochs: int = 20,
    lr: float = DEFAULT_LR,
    seed: int = 0,
    paired_mode: str = "dataset",
    batch_size: int = DEFAULT_BATCH,
    out_dir=None,
):
    """Train a pruned student from scratch with an inherited discriminator.

    paired_mode "teacher_generated" replaces dataset targets with the frozen
    teacher's outputs (the paired-data reduction for unpaired tasks).
    """
    t0 = time.perf_counter()
    weights = weights or LossWeights()
    kd = kd or KDConfig(mode="ka")
    if kd.tap_points is None:
        kd.tap_points = default_tap_points(len(student_arch.blocks))
    if paired_mode not in ("dataset", "teacher_generated"):
        raise ValueError(f"unknown paired mode {paired_mode!r}")
    if len(student_arch.blocks) != len(teacher.arch.blocks):
        raise TapMismatch(
            f"student has {len(student_arch.blocks)} blocks, teacher {len(teacher.arch.blocks)}"
        )

    student = ExecModel(student_arch, init_params(student_arch, seed))
    disc = ExecModel(teacher_disc.arch.clone(), OrderedDict((k, v.copy()) for k, v in teacher_disc.params.items()))
    adam_g = Adam(lr, *ADAM_BETAS)
    adam_d = Adam(lr, *ADAM_BETAS)

    want_taps = kd.mode != "none"
    want_outputs = paired_mode == "teacher_generated"
    feats, teacher_outputs = _teacher_cache(teacher, task, kd.tap_points, want_taps, want_outputs, batch_size)

    trainable = OrderedDict(student.params)
    proj = None
    if kd.mode == "mse":
        proj = _init_projections(kd, teacher.arch, student.arch, seed)
        trainable.update(proj)

    cfg = {
        "kind": "student",
        "arch": arch_hash(student_arch),
        "teacher": arch_hash(teacher.arch),
        "task": [task.seed, task.image_size, task.n_train, task.n_val],
        "epochs": epochs,
        "lr": lr,
        "batch_size": batch_size,
        "seed": seed,
        "weights": [weights.lambda_adv, weights.lambda_recon, weights.lambda_dist],
        "kd_mode": kd.mode,
        "tap_points": kd.tap_points,
        "paired_mode": paired_mode,
    }
    report = TrainReport(seed=seed, config_hash=config_hash(cfg))

    train_x, train_y = _train_arrays(task)
    for epoch in range(epochs):
        order = _epoch_order(seed, epoch, task.n_train)
        records = []
        for start in range(0, task.n_train, batch_size):
            idx = order[start : start + batch_size]
            x, y = train_x[idx], train_y[idx]
            target = teacher_outputs[idx] if want_outputs else y

            tape = Tape()
            pvars = {
                pid: Var(arr, tape, needs_grad=True)
                for pid, arr in trainable.items()
                if not pid.endswith((".running_mean", ".running_var"))
            }
            fake, s_taps = forward_arch(student.arch, pvars, student.params, Var(x, tape), True, want_taps=want_taps)
            loss_d = _disc_step(disc, adam_d, x, target, fake.value)
            z, _, _ = disc.forward(tape, engine.concat(Var(x, tape), fake), training=True, trainable=False)
            loss_adv = gan_g_loss(z)
            loss_recon = engine.l1_mean(fake, target)
            if want_taps:
                t_feats = {t: feats[t][idx] for t in kd.tap_points}
                loss_dist = dist_loss(t_feats, s_taps, kd, pvars)
            else:
                loss_dist = Var(np.zeros((), np.float64))
            total = engine.weighted_sum(
                [loss_adv, loss_recon, loss_dist],
                [weights.lambda_adv, weights.lambda_recon, weights.lambda_dist],
            )
            tape.backward(total)
            adam_g.step(trainable, {pid: v.grad for pid, v in pvars.items() if v.grad is not None})

            rec = {
                "loss_d": loss_d,
                "loss_g": float(loss_adv.value),
                "loss_recon": float(loss_recon.value),
                "loss_dist": float(loss_dist.value),
            }
            _check_finite(rec)
            records.append(rec)
        report.epochs.append(_epoch_means(records))
    report.final = evaluate_model(student, task, batch_size)
    report.wall_clock_s = time.perf_counter() - t0
    if out_dir is not None:
        save_checkpoint(out_dir, student.arch, student.params, disc.arch, disc.params, report.to_dict())
    return student, disc, report


def evaluate(ckpt_dir, task: SyntheticTask) -> dict:
    """Deterministic validation metrics for a saved checkpoint."""
    arch, params, _, _ = load_checkpoint(ckpt_dir)
    return evaluate_model(ExecModel(arch, params), task)
