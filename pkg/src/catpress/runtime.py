"""Executing architecture IR on the tensor engine.

Parameters live in an ordered dict keyed by layer id (`head.0.w`,
`blocks.1.branches.3.layers.0.gamma`, ...).  Norm scale/shift vectors are
initialized from the arch itself, so the values the pruner reads off an arch
and the values the executor computes with are the same snapshot.

Checkpoints are a directory holding `arch.json`, `manifest.json` (parameter
ids, shapes, byte offsets, arch hash) and `weights.bin` (little-endian
float32, concatenated in manifest order); discriminator files carry a
`disc_` prefix.
"""

from __future__ import annotations

import json
import os
from collections import OrderedDict

import numpy as np

from . import engine
from .arch import (
    Activation,
    Conv,
    DepthwiseConv,
    GeneratorArch,
    IncResBlock,
    Norm,
    PlainResBlock,
    ResidualAdd,
    TransposedConv,
    arch_hash,
    iter_layers,
    load_arch,
    plain_body_alive,
    save_arch,
)
from .engine import Tape, Var
from .errors import ArchHashMismatch, SchemaError, ShapeError

WEIGHT_INIT_STD = 0.02


def init_params(arch: GeneratorArch, seed: int) -> "OrderedDict[str, np.ndarray]":
    """Fresh float32 parameters: convs ~ N(0, 0.02), norms from the arch."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), 0x1A17))))
    params: OrderedDict[str, np.ndarray] = OrderedDict()
    for lid, layer in iter_layers(arch):
        if isinstance(layer, Conv):
            shape = (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)
        elif isinstance(layer, TransposedConv):
            shape = (layer.in_ch, layer.out_ch, layer.kernel, layer.kernel)
        elif isinstance(layer, DepthwiseConv):
            shape = (layer.channels, layer.kernel, layer.kernel)
        elif isinstance(layer, Norm):
            params[f"{lid}.gamma"] = layer.gamma.copy()
            params[f"{lid}.beta"] = layer.beta.copy()
            if layer.kind == "batch" and layer.tracks_running_stats:
                params[f"{lid}.running_mean"] = np.zeros(layer.channels, np.float32)
                params[f"{lid}.running_var"] = np.ones(layer.channels, np.float32)
            continue
        else:
            continue
        params[f"{lid}.w"] = (rng.standard_normal(shape, dtype=np.float32) * WEIGHT_INIT_STD)
        if layer.bias:
            n_out = shape[1] if isinstance(layer, TransposedConv) else shape[0]
            params[f"{lid}.b"] = np.zeros(n_out, np.float32)
    return params


def is_buffer(pid: str) -> bool:
    return pid.endswith(".running_mean") or pid.endswith(".running_var")


def lift_params(params: dict, tape: Tape, trainable: bool = True) -> dict:
    """Wrap trainable entries in Vars sharing the underlying arrays."""
    return {
        pid: Var(arr, tape, needs_grad=trainable)
        for pid, arr in params.items()
        if not is_buffer(pid)
    }


def sync_arch_norms(arch: GeneratorArch, params: dict) -> GeneratorArch:
    """Return a copy of the arch with norm gamma/beta refreshed from params."""
    out = arch.clone()
    for lid, layer in iter_layers(out):
        if isinstance(layer, Norm):
            layer.gamma = params[f"{lid}.gamma"].copy()
            layer.beta = params[f"{lid}.beta"].copy()
    return out


# ---------------------------------------------------------------------------
# forward execution


def _run_layer(layer, lid, x, pvars, buffers, training, residual_input):
    if isinstance(layer, Conv):
        b = pvars.get(f"{lid}.b") if layer.bias else None
        return engine.conv2d(x, pvars[f"{lid}.w"], b, stride=layer.stride, pad_mode=layer.pad_mode)
    if isinstance(layer, DepthwiseConv):
        b = pvars.get(f"{lid}.b") if layer.bias else None
        return engine.depthwise_conv2d(x, pvars[f"{lid}.w"], b, pad_mode=layer.pad_mode)
    if isinstance(layer, TransposedConv):
        b = pvars.get(f"{lid}.b") if layer.bias else None
        return engine.transposed_conv2d(x, pvars[f"{lid}.w"], b, stride=layer.stride, output_pad=layer.output_pad)
    if isinstance(layer, Norm):
        gamma = pvars[f"{lid}.gamma"]
        beta = pvars[f"{lid}.beta"]
        if layer.kind == "instance":
            return engine.instance_norm(x, gamma, beta)
        rm = buffers.get(f"{lid}.running_mean")
        rv = buffers.get(f"{lid}.running_var")
        if rm is None:
            rm = np.zeros(layer.channels, np.float32)
            rv = np.ones(layer.channels, np.float32)
        return engine.batch_norm(x, gamma, beta, rm, rv, training, layer.tracks_running_stats)
    if isinstance(layer, Activation):
        return engine.ACTIVATION_OPS[layer.fn](x)
    if isinstance(layer, ResidualAdd):
        return engine.residual_add(x, residual_input)
    raise ShapeError(f"unknown layer {layer!r}")


def _run_seq(layers, prefix, x, pvars, buffers, training, residual_input=None):
    for li, layer in enumerate(layers):
        x = _run_layer(layer, f"{prefix}.{li}", x, pvars, buffers, training, residual_input)
    return x


def forward_arch(
    arch: GeneratorArch,
    pvars: dict,
    buffers: dict,
    x: Var,
    training: bool = True,
    want_taps: bool = False,
):
    """Run the full arch; optionally capture trunk activations for distillation.

    Taps: "head" is the activation entering the first block; "block{i}"
    (1-based) is each block's output.  Returns (output, taps).
    """
    taps = {}
    x = _run_seq(arch.head, "head", x, pvars, buffers, training)
    if want_taps:
        taps["head"] = x
    for bi, block in enumerate(arch.blocks):
        block_in = x
        if isinstance(block, IncResBlock):
            acc = block_in
            for ji, br in enumerate(block.branches):
                if not br.alive:
                    continue
                out = _run_seq(br.layers, f"blocks.{bi}.branches.{ji}.layers", block_in, pvars, buffers, training)
                acc = engine.residual_add(acc, out)
            x = acc
        else:
            if plain_body_alive(block):
                x = _run_seq(block.body, f"blocks.{bi}.body", block_in, pvars, buffers, training, residual_input=block_in)
            else:
                x = block_in
        if want_taps:
            taps[f"block{bi + 1}"] = x
    x = _run_seq(arch.tail, "tail", x, pvars, buffers, training)
    return x, taps


class ExecModel:
    """An arch bound to its parameter dict, runnable on a tape."""

    def __init__(self, arch: GeneratorArch, params: "OrderedDict[str, np.ndarray]"):
        self.arch = arch
        self.params = params

    @classmethod
    def initialized(cls, arch: GeneratorArch, seed: int) -> "ExecModel":
        return cls(arch, init_params(arch, seed))

    def forward(self, tape: Tape, x, training: bool = True, want_taps: bool = False, trainable: bool = True):
        xv = x if isinstance(x, Var) else Var(np.asarray(x, np.float32), tape)
        pvars = lift_params(self.params, tape, trainable)
        out, taps = forward_arch(self.arch, pvars, self.params, xv, training, want_taps)
        return out, taps, pvars

    def predict(self, x, training: bool = False):
        out, _, _ = self.forward(Tape(), x, training=training, trainable=False)
        return out.value


def count_exec_macs(arch: GeneratorArch, params: dict, input_shape: tuple) -> int:
    """Multiply count of one eval-mode forward pass at batch size 1."""
    c, h, w = input_shape
    tape = Tape(count_macs=True)
    x = Var(np.zeros((1, c, h, w), np.float32), tape)
    pvars = lift_params(params, tape, trainable=False)
    forward_arch(arch, pvars, params, x, training=False)
    return tape.mac_count


# ---------------------------------------------------------------------------
# parameter surgery (used when deriving student weights / equivalence checks)


def slice_params(arch: GeneratorArch, slices: dict, params: dict) -> "OrderedDict[str, np.ndarray]":
    """Restrict parameters to kept channels.

    `slices` maps layer id -> (in_keep, out_keep) index arrays (None = keep
    all), as produced by the pruner.  Norm-layer entries use out_keep.
    """
    out: OrderedDict[str, np.ndarray] = OrderedDict()
    for lid, layer in iter_layers(arch):
        keep = slices.get(lid)
        in_keep, out_keep = keep if keep is not None else (None, None)
        if isinstance(layer, Conv):
            w = params[f"{lid}.w"]
            if out_keep is not None:
                w = w[out_keep]
            if in_keep is not None:
                w = w[:, in_keep]
            out[f"{lid}.w"] = w.copy()
            if layer.bias:
                b = params[f"{lid}.b"]
                out[f"{lid}.b"] = (b[out_keep] if out_keep is not None else b).copy()
        elif isinstance(layer, TransposedConv):
            w = params[f"{lid}.w"]
            if in_keep is not None:
                w = w[in_keep]
            if out_keep is not None:
                w = w[:, out_keep]
            out[f"{lid}.w"] = w.copy()
            if layer.bias:
                b = params[f"{lid}.b"]
                out[f"{lid}.b"] = (b[out_keep] if out_keep is not None else b).copy()
        elif isinstance(layer, DepthwiseConv):
            w = params[f"{lid}.w"]
            out[f"{lid}.w"] = (w[out_keep] if out_keep is not None else w).copy()
            if layer.bias:
                b = params[f"{lid}.b"]
                out[f"{lid}.b"] = (b[out_keep] if out_keep is not None else b).copy()
        elif isinstance(layer, Norm):
            for suffix in ("gamma", "beta", "running_mean", "running_var"):
                pid = f"{lid}.{suffix}"
                if pid in params:
                    v = params[pid]
                    out[pid] = (v[out_keep] if out_keep is not None else v).copy()
    return out


def zero_masked_params(arch: GeneratorArch, slices: dict, params: dict, dead_prefixes=()) -> "OrderedDict[str, np.ndarray]":
    """Zero the complement of every keep-slice instead of removing it.

    Running a full arch with these parameters must match running the pruned
    arch with sliced parameters: silenced channels carry exact zeros.  Whole
    subgraphs removed from execution (dead branches/bodies) are zeroed in
    full via `dead_prefixes`.
    """
    out = OrderedDict((pid, arr.copy()) for pid, arr in params.items())
    for pid in out:
        if any(pid.startswith(prefix) for prefix in dead_prefixes):
            out[pid][...] = 0

    def drop(n, keep):
        mask = np.ones(n, bool)
        if keep is not None:
            mask[:] = False
            mask[keep] = True
        return ~mask

    for lid, layer in iter_layers(arch):
        keep = slices.get(lid)
        if keep is None:
            continue
        in_keep, out_keep = keep
        if isinstance(layer, Conv):
            w = out[f"{lid}.w"]
            w[drop(w.shape[0], out_keep)] = 0
            w[:, drop(w.shape[1], in_keep)] = 0
            if layer.bias:
                out[f"{lid}.b"][drop(w.shape[0], out_keep)] = 0
        elif isinstance(layer, TransposedConv):
            w = out[f"{lid}.w"]
            w[drop(w.shape[0], in_keep)] = 0
            w[:, drop(w.shape[1], out_keep)] = 0
            if layer.bias:
                out[f"{lid}.b"][drop(w.shape[1], out_keep)] = 0
        elif isinstance(layer, DepthwiseConv):
            w = out[f"{lid}.w"]
            w[drop(w.shape[0], out_keep)] = 0
            if layer.bias:
                out[f"{lid}.b"][drop(w.shape[0], out_keep)] = 0
        elif isinstance(layer, Norm):
            dead = drop(layer.channels, out_keep)
            out[f"{lid}.gamma"][dead] = 0
            out[f"{lid}.beta"][dead] = 0
    return out


# ---------------------------------------------------------------------------
# checkpoints


def _write_weights(dirpath, arch, params, prefix=""):
    manifest = {"format_version": 1, "arch_hash": arch_hash(arch), "dtype": "float32", "params": []}
    offset = 0
    chunks = []
    for pid, arr in params.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        manifest["params"].append(
            {"id": pid, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)}
        )
        chunks.append(data)
        offset += len(data)
    with open(os.path.join(dirpath, f"{prefix}weights.bin"), "wb") as f:
        f.write(b"".join(chunks))
    with open(os.path.join(dirpath, f"{prefix}manifest.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def _read_weights(dirpath, arch, prefix=""):
    with open(os.path.join(dirpath, f"{prefix}manifest.json"), "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("arch_hash") != arch_hash(arch):
        raise ArchHashMismatch(f"{prefix or 'gen '}manifest does not match {arch.name!r}")
    with open(os.path.join(dirpath, f"{prefix}weights.bin"), "rb") as f:
        blob = f.read()
    params: OrderedDict[str, np.ndarray] = OrderedDict()
    for entry in manifest["params"]:
        raw = blob[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(entry["shape"])
        params[entry["id"]] = arr.copy()
    return params


def save_checkpoint(dirpath, arch, params, disc_arch=None, disc_params=None, report: dict = None):
    """Write a checkpoint directory; norm vectors in arch.json are refreshed
    from the trained parameters first."""
    os.makedirs(dirpath, exist_ok=True)
    synced = sync_arch_norms(arch, params)
    save_arch(synced, os.path.join(dirpath, "arch.json"))
    _write_weights(dirpath, synced, params)
    if disc_arch is not None:
        save_arch(disc_arch, os.path.join(dirpath, "disc_arch.json"))
        _write_weights(dirpath, disc_arch, disc_params, prefix="disc_")
    if report is not None:
        with open(os.path.join(dirpath, "report.json"), "w", encoding="utf-8", newline="\n") as f:
            json.dump(report, f, sort_keys=True, indent=2)
            f.write("\n")


def load_checkpoint(dirpath):
    """Returns (arch, params, disc_arch | None, disc_params | None)."""
    arch_path = os.path.join(dirpath, "arch.json")
    if not os.path.exists(arch_path):
        raise SchemaError(f"no arch.json under {dirpath}")
    arch = load_arch(arch_path)
    params = _read_weights(dirpath, arch)
    disc_arch = disc_params = None
    disc_path = os.path.join(dirpath, "disc_arch.json")
    if os.path.exists(disc_path):
        disc_arch = load_arch(disc_path)
        disc_params = _read_weights(dirpath, disc_arch, prefix="disc_")
    return arch, params, disc_arch, disc_params
