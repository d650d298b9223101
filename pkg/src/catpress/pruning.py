"""One-step budget-constrained channel pruning.

The channel-importance signal is the magnitude of the per-channel scale
(gamma) in prunable normalization layers.  Given a MACs budget, a discrete
binary search over the sorted distinct scale magnitudes finds the smallest
threshold whose pruned cost fits the budget; the threshold is then applied
exactly once to materialize the student architecture.  No sparsity
regularization, no iterative prune/finetune loop.

Pruning rules:

* a channel is pruned iff |gamma| < tau (strict, so tau = 0 prunes nothing);
* pruning a norm channel removes the matching output channel of the conv in
  front of it and the input channel of whatever consumes it;
* inside a block, a branch (or plain body) whose funnel empties is removed
  from execution entirely;
* head/tail convs never drop below `floor` output channels: the floor-many
  largest-|gamma| channels are retained;
* the last head norm governs the residual trunk, so its keep-set propagates
  into every branch's final conv, every block-level norm, and the first
  tail conv.

The search probes costs with a count-only walk (`plan_macs`); nothing is
materialized until the final threshold is known.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

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
    layer_out_shape,
    plain_body_alive,
    validate,
)
from .errors import BudgetInfeasible, NoPrunableNorms, ShapeError
from .macs import arch_macs


@dataclass
class PruneBudget:
    target_macs: int
    floor: int = 8
    input_shape: tuple = None  # defaults to the arch's own input shape

    def __post_init__(self):
        if self.target_macs <= 0:
            raise ValueError("target_macs must be positive")
        if self.floor < 1:
            raise ValueError("floor must be >= 1")


@dataclass
class PruneResult:
    threshold: float
    masks: dict  # prunable-norm layer id -> boolean keep mask
    achieved_macs: int
    pruned_channel_count: int
    removed_branch_count: int
    target_macs: int
    budget_vacuous: bool
    wall_clock_ms: int
    arch: GeneratorArch = None
    slices: dict = field(default_factory=dict, repr=False)

    def report_dict(self) -> dict:
        return {
            "threshold": float(self.threshold),
            "target_macs": int(self.target_macs),
            "achieved_macs": int(self.achieved_macs),
            "pruned_channels": int(self.pruned_channel_count),
            "removed_branches": int(self.removed_branch_count),
            "budget_vacuous": bool(self.budget_vacuous),
            "wall_clock_ms": int(self.wall_clock_ms),
        }


# ---------------------------------------------------------------------------
# scale collection


def iter_prunable_norms(arch: GeneratorArch):
    """Yield (layer_id, norm, floor_protected); head/tail norms are protected."""
    for part, seq in (("head", arch.head), ("tail", arch.tail)):
        for li, layer in enumerate(seq):
            if isinstance(layer, Norm) and layer.prunable:
                yield f"{part}.{li}", layer, True
    for bi, block in enumerate(arch.blocks):
        if isinstance(block, IncResBlock):
            for ji, br in enumerate(block.branches):
                for li, layer in enumerate(br.layers):
                    if isinstance(layer, Norm) and layer.prunable:
                        yield f"blocks.{bi}.branches.{ji}.layers.{li}", layer, False
        else:
            for li, layer in enumerate(block.body):
                if isinstance(layer, Norm) and layer.prunable:
                    yield f"blocks.{bi}.body.{li}", layer, False


def collect_scales(arch: GeneratorArch) -> np.ndarray:
    """Ascending distinct |gamma| values over prunable norms, 0 prepended."""
    values = []
    for _, norm, _ in iter_prunable_norms(arch):
        values.append(np.abs(norm.gamma.astype(np.float64)))
    if not values:
        raise NoPrunableNorms("architecture has no prunable normalization layers")
    scales = np.unique(np.concatenate(values))
    if scales.size == 0 or scales[0] != 0.0:
        scales = np.concatenate([[0.0], scales])
    return scales


# ---------------------------------------------------------------------------
# the pruning plan: a keep mask per prunable norm at a given threshold


def _keep_mask(norm: Norm, tau: float, floor: int, protected: bool) -> np.ndarray:
    mag = np.abs(norm.gamma.astype(np.float64))
    mask = mag >= tau
    if protected:
        want = min(floor, norm.channels)
        if int(mask.sum()) < want:
            order = np.argsort(-mag, kind="stable")
            mask = np.zeros(norm.channels, bool)
            mask[order[:want]] = True
    return mask


def _build_plan(arch: GeneratorArch, tau: float, floor: int) -> dict:
    return {
        lid: _keep_mask(norm, tau, floor, protected)
        for lid, norm, protected in iter_prunable_norms(arch)
    }


def _walk_seq(layers, plan, prefix, in_keep, in_ch, trunk_keep=None, block_ch=None):
    """Resolve per-layer keep-sets through one conv/norm/activation sequence.

    Keep-sets are index arrays into the original channel space; None means
    keep everything.  A conv's output set comes from the prunable norm that
    directly follows it; inside a block, layers landing on the block's
    channel count and not governed by a prunable norm land on the trunk
    keep-set instead.  Yields (index, layer, in_keep, in_ch, out_keep, out_ch).
    """
    cur_keep, cur_ch = in_keep, in_ch
    n = len(layers)
    for i, layer in enumerate(layers):
        if isinstance(layer, (Conv, TransposedConv)):
            out_keep, out_ch = None, layer.out_ch
            nxt = f"{prefix}.{i + 1}"
            if i + 1 < n and isinstance(layers[i + 1], Norm) and nxt in plan:
                out_keep = np.flatnonzero(plan[nxt])
                out_ch = int(out_keep.size)
            elif trunk_keep is not None and layer.out_ch == block_ch:
                out_keep, out_ch = trunk_keep, len(trunk_keep) if trunk_keep is not None else block_ch
            yield i, layer, cur_keep, cur_ch, out_keep, out_ch
            cur_keep, cur_ch = out_keep, out_ch
        elif isinstance(layer, DepthwiseConv):
            yield i, layer, cur_keep, cur_ch, cur_keep, cur_ch
        elif isinstance(layer, Norm):
            if trunk_keep is not None and layer.channels == block_ch and not layer.prunable:
                cur_keep, cur_ch = trunk_keep, len(trunk_keep)
            yield i, layer, cur_keep, cur_ch, cur_keep, cur_ch
        else:
            yield i, layer, cur_keep, cur_ch, cur_keep, cur_ch


def _pruned_layer_macs(layer, in_ch, out_ch, in_shape) -> int:
    c, h, w = in_shape
    if isinstance(layer, (Conv, TransposedConv)):
        _, oh, ow = layer_out_shape(layer, in_shape)
        return layer.kernel**2 * in_ch * out_ch * oh * ow
    if isinstance(layer, DepthwiseConv):
        _, oh, ow = layer_out_shape(layer, in_shape)
        return layer.kernel**2 * out_ch * oh * ow
    if isinstance(layer, Norm):
        return 0 if layer.tracks_running_stats else 2 * out_ch * h * w
    return 0


def _body_mid_count(layers, plan, prefix):
    for li, layer in enumerate(layers):
        if isinstance(layer, Norm) and layer.prunable:
            return int(plan[f"{prefix}.{li}"].sum())
    return None


def plan_macs(arch: GeneratorArch, tau: float, floor: int, input_shape: tuple = None) -> int:
    """Analytic MACs after pruning at tau, without materializing the arch."""
    if input_shape is None:
        input_shape = tuple(arch.input_shape)
    plan = _build_plan(arch, tau, floor)
    total = 0
    shape = tuple(input_shape)
    cur_ch = input_shape[0]
    trunk_keep = None
    for _, layer, _, in_ch, out_keep, out_ch in _walk_seq(arch.head, plan, "head", None, cur_ch):
        total += _pruned_layer_macs(layer, in_ch, out_ch, shape)
        shape = layer_out_shape(layer, shape)
        trunk_keep, cur_ch = out_keep, out_ch
    trunk_ch = cur_ch
    for bi, block in enumerate(arch.blocks):
        if isinstance(block, IncResBlock):
            for ji, br in enumerate(block.branches):
                if not br.alive:
                    continue
                prefix = f"blocks.{bi}.branches.{ji}.layers"
                if _body_mid_count(br.layers, plan, prefix) == 0:
                    continue
                bshape = shape
                for _, layer, _, in_ch, _, out_ch in _walk_seq(
                    br.layers, plan, prefix, trunk_keep, trunk_ch, trunk_keep, block.channels
                ):
                    total += _pruned_layer_macs(layer, in_ch, out_ch, bshape)
                    bshape = layer_out_shape(layer, bshape)
        else:
            prefix = f"blocks.{bi}.body"
            if not plain_body_alive(block) or _body_mid_count(block.body, plan, prefix) == 0:
                continue
            bshape = shape
            for _, layer, _, in_ch, _, out_ch in _walk_seq(
                block.body, plan, prefix, trunk_keep, trunk_ch, trunk_keep, block.channels
            ):
                total += _pruned_layer_macs(layer, in_ch, out_ch, bshape)
                bshape = layer_out_shape(layer, bshape)
    for _, layer, _, in_ch, _, out_ch in _walk_seq(arch.tail, plan, "tail", trunk_keep, trunk_ch):
        total += _pruned_layer_macs(layer, in_ch, out_ch, shape)
        shape = layer_out_shape(layer, shape)
    return int(total)


# ---------------------------------------------------------------------------
# materialization


def _slice_norm(norm: Norm, keep) -> Norm:
    if keep is None:
        return Norm(norm.kind, norm.channels, norm.gamma.copy(), norm.beta.copy(), norm.tracks_running_stats, norm.prunable)
    idx = np.asarray(keep)
    return Norm(
        norm.kind,
        int(idx.size),
        norm.gamma[idx].copy(),
        norm.beta[idx].copy(),
        norm.tracks_running_stats,
        norm.prunable,
    )


def _rebuild_seq(layers, plan, prefix, in_keep, in_ch, slices, trunk_keep=None, block_ch=None):
    """Materialize one sequence under the plan; records per-layer slices."""
    new_layers = []
    out_keep, out_ch = in_keep, in_ch
    for i, layer, cur_keep, cur_ch, nxt_keep, nxt_ch in _walk_seq(
        layers, plan, prefix, in_keep, in_ch, trunk_keep, block_ch
    ):
        lid = f"{prefix}.{i}"
        if isinstance(layer, Conv):
            new_layers.append(Conv(layer.kernel, cur_ch, nxt_ch, layer.stride, layer.pad_mode, layer.bias))
            slices[lid] = (cur_keep, nxt_keep)
        elif isinstance(layer, TransposedConv):
            new_layers.append(TransposedConv(layer.kernel, cur_ch, nxt_ch, layer.stride, layer.output_pad, layer.bias))
            slices[lid] = (cur_keep, nxt_keep)
        elif isinstance(layer, DepthwiseConv):
            new_layers.append(DepthwiseConv(layer.kernel, cur_ch, layer.stride, layer.pad_mode, layer.bias))
            slices[lid] = (cur_keep, cur_keep)
        elif isinstance(layer, Norm):
            new_layers.append(_slice_norm(layer, nxt_keep))
            slices[lid] = (None, nxt_keep)
        elif isinstance(layer, Activation):
            new_layers.append(Activation(layer.fn))
        else:
            new_layers.append(ResidualAdd())
        out_keep, out_ch = nxt_keep, nxt_ch
    return new_layers, out_keep, out_ch


def apply_threshold_full(arch: GeneratorArch, tau: float, floor: int = 8):
    """Materialize the pruned arch; returns (arch, masks, per-layer slices)."""
    if tau < 0:
        raise ValueError("threshold must be >= 0")
    plan = _build_plan(arch, tau, floor)
    slices: dict = {}
    head, trunk_keep, trunk_ch = _rebuild_seq(arch.head, plan, "head", None, arch.input_shape[0], slices)
    new_blocks = []
    for bi, block in enumerate(arch.blocks):
        if isinstance(block, IncResBlock):
            new_branches = []
            for ji, br in enumerate(block.branches):
                prefix = f"blocks.{bi}.branches.{ji}.layers"
                new_layers, _, _ = _rebuild_seq(
                    br.layers, plan, prefix, trunk_keep, trunk_ch, slices, trunk_keep, block.channels
                )
                mid = _body_mid_count(br.layers, plan, prefix)
                mid = 0 if mid is None else (mid if br.alive else 0)
                new_branches.append(type(br)(br.op_type, br.kernel, mid, mid > 0, new_layers))
            new_blocks.append(IncResBlock(trunk_ch, new_branches))
        else:
            prefix = f"blocks.{bi}.body"
            new_body, _, _ = _rebuild_seq(
                block.body, plan, prefix, trunk_keep, trunk_ch, slices, trunk_keep, block.channels
            )
            new_blocks.append(PlainResBlock(trunk_ch, new_body))
    tail, _, _ = _rebuild_seq(arch.tail, plan, "tail", trunk_keep, trunk_ch, slices)
    pruned = GeneratorArch(arch.name, tuple(arch.input_shape), head, new_blocks, tail)
    errors = validate(pruned)
    if errors:
        raise ShapeError(f"pruned arch failed validation: {errors[0]}")
    return pruned, plan, slices


def apply_threshold(arch: GeneratorArch, tau: float, floor: int = 8):
    """Prune every channel with |gamma| < tau; returns (pruned_arch, masks)."""
    pruned, masks, _ = apply_threshold_full(arch, tau, floor)
    return pruned, masks


def dead_body_prefixes(arch: GeneratorArch, masks: dict) -> list:
    """Layer-id prefixes of branches/bodies whose funnel emptied.

    Everything under these prefixes is removed from execution wholesale, so
    an equivalence reference must zero all of their parameters (the final
    norm's shift included), not just the per-channel slices.
    """
    dead = []
    for bi, block in enumerate(arch.blocks):
        if isinstance(block, IncResBlock):
            for ji, br in enumerate(block.branches):
                prefix = f"blocks.{bi}.branches.{ji}.layers"
                mid = _body_mid_count(br.layers, masks, prefix)
                if not br.alive or (mid is not None and mid == 0):
                    dead.append(prefix)
        else:
            prefix = f"blocks.{bi}.body"
            mid = _body_mid_count(block.body, masks, prefix)
            if not plain_body_alive(block) or (mid is not None and mid == 0):
                dead.append(prefix)
    return dead


# ---------------------------------------------------------------------------
# threshold search


def search_threshold(arch: GeneratorArch, budget: PruneBudget):
    """Smallest candidate threshold whose pruned cost meets the budget.

    Candidates are the distinct scale magnitudes (plus 0, and a sentinel
    just above the maximum that empties every unprotected norm).  Pruned
    cost is non-increasing in the threshold, so a discrete binary search
    finds the leftmost feasible candidate exactly.

    Returns (tau, budget_vacuous); raises BudgetInfeasible when even the
    sentinel threshold cannot meet the budget.
    """
    input_shape = budget.input_shape or tuple(arch.input_shape)
    scales = collect_scales(arch)
    candidates = np.concatenate([scales, [np.nextafter(scales[-1], np.inf)]])
    target = int(budget.target_macs)

    def feasible(idx: int) -> bool:
        return plan_macs(arch, float(candidates[idx]), budget.floor, input_shape) <= target

    lo, hi = 0, len(candidates) - 1
    if not feasible(hi):
        floor_macs = plan_macs(arch, float(candidates[-1]), budget.floor, input_shape)
        raise BudgetInfeasible(
            f"budget {target} below the fully pruned cost {floor_macs} (floor={budget.floor})"
        )
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid + 1
    tau = float(candidates[lo])
    return tau, lo == 0


def prune(arch: GeneratorArch, budget: PruneBudget) -> PruneResult:
    """Search the threshold, then apply it exactly once."""
    t0 = time.perf_counter()
    input_shape = budget.input_shape or tuple(arch.input_shape)
    tau, vacuous = search_threshold(arch, budget)
    pruned, masks, slices = apply_threshold_full(arch, tau, budget.floor)
    achieved = arch_macs(pruned, input_shape).total
    pruned_channels = int(sum(int((~m).sum()) for m in masks.values()))
    removed = 0
    for orig, new in zip(arch.blocks, pruned.blocks):
        if isinstance(orig, IncResBlock):
            removed += sum(1 for a, b in zip(orig.branches, new.branches) if a.alive and not b.alive)
        elif plain_body_alive(orig) and not plain_body_alive(new):
            removed += 1
    return PruneResult(
        threshold=tau,
        masks=masks,
        achieved_macs=int(achieved),
        pruned_channel_count=pruned_channels,
        removed_branch_count=removed,
        target_macs=int(budget.target_macs),
        budget_vacuous=vacuous,
        wall_clock_ms=int((time.perf_counter() - t0) * 1000),
        arch=pruned,
        slices=slices,
    )
