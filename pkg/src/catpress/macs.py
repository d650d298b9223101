"""Analytic multiply-accumulate cost model over the architecture IR.

Counting conventions:

* Conv / DepthwiseConv: kernel^2 * (channel product) * output pixels.
* TransposedConv: counted at *output* resolution (kernel^2 * in * out *
  H_out * W_out).  This matches what the executor actually does -- a direct
  convolution over the zero-stuffed input -- so execution-counted multiplies
  and this model agree exactly, and the classic resnet generator lands on
  its well-known ~56.8e9 figure at 3x256x256.
* Norm layers that track running statistics cost nothing (foldable into the
  preceding conv at inference).  Untracked norms recompute mean and variance
  per forward pass: 2 * c * h * w.
* Bias adds, activations and residual adds are free (multiply-accumulate
  convention).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .arch import (
    Activation,
    Conv,
    DepthwiseConv,
    GeneratorArch,
    IncResBlock,
    LayerSpec,
    Norm,
    ResidualAdd,
    TransposedConv,
    layer_out_shape,
    plain_body_alive,
)
from .errors import ShapeError


@dataclass
class CostBreakdown:
    layers: list = field(default_factory=list)  # (layer_id, macs)
    total: int = 0

    def add(self, layer_id: str, macs: int):
        self.layers.append((layer_id, int(macs)))
        self.total += int(macs)

    def to_dict(self):
        return {
            "total": int(self.total),
            "layers": [{"id": lid, "macs": int(m)} for lid, m in self.layers],
        }


def layer_macs(layer: LayerSpec, in_shape: tuple) -> int:
    """MACs of a single layer given its (c, h, w) input shape."""
    c, h, w = in_shape
    if h < 1 or w < 1 or c < 0:
        raise ShapeError(f"bad input shape {in_shape}")
    if isinstance(layer, Conv):
        if layer.in_ch != c:
            raise ShapeError(f"conv expects {layer.in_ch} channels, got {c}")
        _, oh, ow = layer_out_shape(layer, in_shape)
        return layer.kernel * layer.kernel * layer.in_ch * layer.out_ch * oh * ow
    if isinstance(layer, DepthwiseConv):
        if layer.channels != c:
            raise ShapeError(f"depthwise conv expects {layer.channels} channels, got {c}")
        _, oh, ow = layer_out_shape(layer, in_shape)
        return layer.kernel * layer.kernel * layer.channels * oh * ow
    if isinstance(layer, TransposedConv):
        if layer.in_ch != c:
            raise ShapeError(f"transposed conv expects {layer.in_ch} channels, got {c}")
        _, oh, ow = layer_out_shape(layer, in_shape)
        return layer.kernel * layer.kernel * layer.in_ch * layer.out_ch * oh * ow
    if isinstance(layer, Norm):
        if layer.channels != c:
            raise ShapeError(f"norm expects {layer.channels} channels, got {c}")
        if layer.tracks_running_stats:
            return 0
        return 2 * c * h * w
    if isinstance(layer, (Activation, ResidualAdd)):
        return 0
    raise ShapeError(f"unknown layer {layer!r}")


def _seq_macs(layers, in_shape, scope, cost: CostBreakdown) -> tuple:
    shape = in_shape
    for li, layer in enumerate(layers):
        cost.add(f"{scope}.{li}", layer_macs(layer, shape))
        shape = layer_out_shape(layer, shape)
    return shape


def arch_macs(arch: GeneratorArch, input_shape: tuple = None) -> CostBreakdown:
    """Shape-propagated cost of a full generator; dead branches cost nothing."""
    if input_shape is None:
        input_shape = tuple(arch.input_shape)
    cost = CostBreakdown()
    shape = _seq_macs(arch.head, tuple(input_shape), "head", cost)
    for bi, block in enumerate(arch.blocks):
        if isinstance(block, IncResBlock):
            for ji, br in enumerate(block.branches):
                if not br.alive:
                    continue
                _seq_macs(br.layers, shape, f"blocks.{bi}.branches.{ji}.layers", cost)
        else:
            if plain_body_alive(block):
                _seq_macs(block.body, shape, f"blocks.{bi}.body", cost)
        # block output shape equals its input shape (residual structure)
    _seq_macs(arch.tail, shape, "tail", cost)
    return cost
