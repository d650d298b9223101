"""Architecture intermediate representation for resnet-style image generators.

The IR is a plain layer graph: a `head` (stem plus downsampling convs), a run
of residual blocks, and a `tail` (upsampling plus output conv).  Residual
blocks come in two flavours: the classic two-conv `PlainResBlock`, and the
six-branch `IncResBlock` that mixes conventional and depthwise convolutions
at kernel sizes 1/3/5.  Normalization layers carry their per-channel scale
(gamma) and shift (beta) vectors inline, because channel pruning reads the
scale magnitudes straight off the architecture.

Values are immutable by convention: everything that rewrites an arch
(pruning, slicing) builds a new one.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

from .errors import ChannelUnderflow, ParseError, SchemaError

FORMAT_VERSION = 1

PAD_MODES = ("zero", "reflect")
NORM_KINDS = ("batch", "instance")
ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid")
BRANCH_OP_TYPES = ("conventional", "depthwise")
BRANCH_KERNELS = (1, 3, 5)


def _f32(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1:
        raise SchemaError("gamma/beta must be one-dimensional", "gamma")
    return arr


class _DictEq:
    """Equality through the canonical dict form (exact, including floats)."""

    def to_dict(self) -> dict:  # pragma: no cover - overridden
        raise NotImplementedError

    def __eq__(self, other):
        if not isinstance(other, self.__class__):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None


@dataclass(eq=False)
class Conv(_DictEq):
    kernel: int
    in_ch: int
    out_ch: int
    stride: int = 1
    pad_mode: str = "zero"
    bias: bool = True

    def to_dict(self):
        return {
            "kind": "conv",
            "kernel": self.kernel,
            "in_ch": self.in_ch,
            "out_ch": self.out_ch,
            "stride": self.stride,
            "pad_mode": self.pad_mode,
            "bias": self.bias,
        }


@dataclass(eq=False)
class DepthwiseConv(_DictEq):
    kernel: int
    channels: int
    stride: int = 1
    pad_mode: str = "zero"
    bias: bool = True

    def to_dict(self):
        return {
            "kind": "depthwise_conv",
            "kernel": self.kernel,
            "channels": self.channels,
            "stride": self.stride,
            "pad_mode": self.pad_mode,
            "bias": self.bias,
        }


@dataclass(eq=False)
class TransposedConv(_DictEq):
    """Stride-2 fractionally strided conv; padding is kernel//2, like the
    downsampling convs it mirrors."""

    kernel: int
    in_ch: int
    out_ch: int
    stride: int = 2
    output_pad: int = 1
    bias: bool = True

    def to_dict(self):
        return {
            "kind": "transposed_conv",
            "kernel": self.kernel,
            "in_ch": self.in_ch,
            "out_ch": self.out_ch,
            "stride": self.stride,
            "output_pad": self.output_pad,
            "bias": self.bias,
        }


@dataclass(eq=False)
class Norm(_DictEq):
    kind: str  # "batch" | "instance"
    channels: int
    gamma: np.ndarray = None
    beta: np.ndarray = None
    tracks_running_stats: bool = False
    prunable: bool = False

    def __post_init__(self):
        if self.gamma is None:
            self.gamma = np.ones(self.channels, dtype=np.float32)
        else:
            self.gamma = _f32(self.gamma)
        if self.beta is None:
            self.beta = np.zeros(self.channels, dtype=np.float32)
        else:
            self.beta = _f32(self.beta)

    def to_dict(self):
        return {
            "kind": "norm",
            "norm_kind": self.kind,
            "channels": self.channels,
            "gamma": [float(v) for v in self.gamma],
            "beta": [float(v) for v in self.beta],
            "tracks_running_stats": self.tracks_running_stats,
            "prunable": self.prunable,
        }


@dataclass(eq=False)
class Activation(_DictEq):
    fn: str = "relu"

    def to_dict(self):
        return {"kind": "activation", "fn": self.fn}


@dataclass(eq=False)
class ResidualAdd(_DictEq):
    """Marks the end of a residual body; execution adds the block input."""

    def to_dict(self):
        return {"kind": "residual_add"}


LayerSpec = Union[Conv, DepthwiseConv, TransposedConv, Norm, Activation, ResidualAdd]


@dataclass(eq=False)
class Branch(_DictEq):
    op_type: str  # "conventional" | "depthwise"
    kernel: int
    mid_ch: int
    alive: bool
    layers: list = field(default_factory=list)

    def to_dict(self):
        return {
            "op_type": self.op_type,
            "kernel": self.kernel,
            "mid_ch": self.mid_ch,
            "alive": self.alive,
            "layers": [l.to_dict() for l in self.layers],
        }


@dataclass(eq=False)
class IncResBlock(_DictEq):
    channels: int
    branches: list = field(default_factory=list)  # exactly 6

    def to_dict(self):
        return {
            "kind": "incres",
            "channels": self.channels,
            "branches": [b.to_dict() for b in self.branches],
        }


@dataclass(eq=False)
class PlainResBlock(_DictEq):
    channels: int
    body: list = field(default_factory=list)

    def to_dict(self):
        return {
            "kind": "plain_res",
            "channels": self.channels,
            "body": [l.to_dict() for l in self.body],
        }


Block = Union[IncResBlock, PlainResBlock]


def plain_body_alive(block: PlainResBlock) -> bool:
    """A plain body whose internal width was pruned to zero is a passthrough."""
    for layer in block.body:
        if isinstance(layer, Conv):
            return layer.out_ch > 0
    return True


@dataclass(eq=False)
class GeneratorArch(_DictEq):
    name: str
    input_shape: tuple  # (channels, height, width)
    head: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    tail: list = field(default_factory=list)

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "input_shape": list(self.input_shape),
            "head": [l.to_dict() for l in self.head],
            "blocks": [b.to_dict() for b in self.blocks],
            "tail": [l.to_dict() for l in self.tail],
        }

    def clone(self) -> "GeneratorArch":
        return from_dict(self.to_dict())


# ---------------------------------------------------------------------------
# templates


def _branch(op_type: str, kernel: int, c: int, mid: int, norm: str, tracks: bool) -> Branch:
    if op_type == "conventional":
        layers = [
            Conv(kernel, c, mid, 1, "zero", bias=False),
            Norm(norm, mid, tracks_running_stats=tracks, prunable=True),
            Activation("relu"),
            Conv(kernel, mid, c, 1, "zero", bias=False),
            Norm(norm, c, tracks_running_stats=tracks, prunable=False),
        ]
    else:
        layers = [
            Conv(1, c, mid, 1, "zero", bias=False),
            Norm(norm, mid, tracks_running_stats=tracks, prunable=True),
            Activation("relu"),
            DepthwiseConv(kernel, mid, 1, "zero", bias=False),
            Norm(norm, mid, tracks_running_stats=tracks, prunable=False),
            Activation("relu"),
            Conv(1, mid, c, 1, "zero", bias=False),
            Norm(norm, c, tracks_running_stats=tracks, prunable=False),
        ]
    return Branch(op_type, kernel, mid, alive=mid > 0, layers=layers)


def make_incres_block(channels: int, norm: str = "instance", tracks: bool = False) -> IncResBlock:
    """Six-branch block: {conventional, depthwise} x kernel {1, 3, 5}.

    Every branch funnels through mid channels equal to channels // 6, one
    share per operation, so the block stays in the same cost regime as the
    two-conv block it replaces.
    """
    mid = channels // 6
    if mid < 1:
        raise ChannelUnderflow(f"incres block needs channels >= 6, got {channels}")
    branches = [
        _branch(op, k, channels, mid, norm, tracks)
        for op in BRANCH_OP_TYPES
        for k in BRANCH_KERNELS
    ]
    return IncResBlock(channels, branches)


def make_plain_block(channels: int, norm: str = "instance", tracks: bool = False) -> PlainResBlock:
    body = [
        Conv(3, channels, channels, 1, "zero", bias=False),
        Norm(norm, channels, tracks_running_stats=tracks, prunable=True),
        Activation("relu"),
        Conv(3, channels, channels, 1, "zero", bias=False),
        Norm(norm, channels, tracks_running_stats=tracks, prunable=False),
        ResidualAdd(),
    ]
    return PlainResBlock(channels, body)


def build_resnet_template(
    base_ch: int,
    n_blocks: int,
    in_ch: int,
    out_ch: int,
    block_kind: str,
    norm: str = "instance",
    input_hw: int = 256,
    name: str = None,
) -> GeneratorArch:
    """Standard encoder/resnet/decoder generator.

    7x7 stem (reflect pad) -> two stride-2 3x3 convs doubling channels ->
    n_blocks residual blocks at 4*base_ch -> two stride-2 transposed convs
    halving channels -> 7x7 output conv -> tanh.  Every conv except the
    output one is followed by Norm + ReLU.
    """
    if block_kind not in ("plain", "incres"):
        raise ValueError(f"unknown block kind {block_kind!r}")
    if norm not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {norm!r}")
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    for label, v in (("base_ch", base_ch), ("in_ch", in_ch), ("out_ch", out_ch)):
        if v < 1:
            raise ChannelUnderflow(f"{label} must be >= 1, got {v}")
    tracks = norm == "batch"
    c1, c2, c4 = base_ch, 2 * base_ch, 4 * base_ch

    def cna(kernel, cin, cout, stride, pad):
        return [
            Conv(kernel, cin, cout, stride, pad, bias=False),
            Norm(norm, cout, tracks_running_stats=tracks, prunable=True),
            Activation("relu"),
        ]

    head = (
        cna(7, in_ch, c1, 1, "reflect")
        + cna(3, c1, c2, 2, "zero")
        + cna(3, c2, c4, 2, "zero")
    )
    if block_kind == "incres":
        blocks = [make_incres_block(c4, norm, tracks) for _ in range(n_blocks)]
    else:
        blocks = [make_plain_block(c4, norm, tracks) for _ in range(n_blocks)]
    tail = [
        TransposedConv(3, c4, c2, 2, 1, bias=False),
        Norm(norm, c2, tracks_running_stats=tracks, prunable=True),
        Activation("relu"),
        TransposedConv(3, c2, c1, 2, 1, bias=False),
        Norm(norm, c1, tracks_running_stats=tracks, prunable=True),
        Activation("relu"),
        Conv(7, c1, out_ch, 1, "reflect", bias=True),
        Activation("tanh"),
    ]
    if name is None:
        name = f"{block_kind}-resnet-b{base_ch}-n{n_blocks}"
    return GeneratorArch(name, (in_ch, input_hw, input_hw), head, blocks, tail)


# ---------------------------------------------------------------------------
# traversal and shape propagation


def iter_layers(arch: GeneratorArch) -> Iterator[tuple]:
    """Yield (layer_id, layer) over the whole arch in execution order."""
    for i, layer in enumerate(arch.head):
        yield f"head.{i}", layer
    for bi, block in enumerate(arch.blocks):
        if isinstance(block, IncResBlock):
            for ji, branch in enumerate(block.branches):
                for li, layer in enumerate(branch.layers):
                    yield f"blocks.{bi}.branches.{ji}.layers.{li}", layer
        else:
            for li, layer in enumerate(block.body):
                yield f"blocks.{bi}.body.{li}", layer
    for i, layer in enumerate(arch.tail):
        yield f"tail.{i}", layer


def conv_out_hw(h: int, w: int, kernel: int, stride: int) -> tuple:
    pad = kernel // 2
    return (h + 2 * pad - kernel) // stride + 1, (w + 2 * pad - kernel) // stride + 1


def tconv_out_hw(h: int, w: int, kernel: int, stride: int, output_pad: int) -> tuple:
    pad = kernel // 2
    return (
        (h - 1) * stride - 2 * pad + kernel + output_pad,
        (w - 1) * stride - 2 * pad + kernel + output_pad,
    )


def layer_out_shape(layer: LayerSpec, in_shape: tuple) -> tuple:
    """Propagate a (c, h, w) shape through one layer."""
    c, h, w = in_shape
    if isinstance(layer, Conv):
        oh, ow = conv_out_hw(h, w, layer.kernel, layer.stride)
        return (layer.out_ch, oh, ow)
    if isinstance(layer, DepthwiseConv):
        oh, ow = conv_out_hw(h, w, layer.kernel, layer.stride)
        return (layer.channels, oh, ow)
    if isinstance(layer, TransposedConv):
        oh, ow = tconv_out_hw(h, w, layer.kernel, layer.stride, layer.output_pad)
        return (layer.out_ch, oh, ow)
    return (c, h, w)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationError:
    code: str
    layer_id: str
    message: str

    def __str__(self):
        return f"{self.code} at {self.layer_id}: {self.message}"


def _check_seq(layers, in_ch, scope, errors, allow_residual=False):
    """Channel-check one layer sequence; returns the output channel count."""
    cur = in_ch
    prev = None
    for li, layer in enumerate(layers):
        lid = f"{scope}.{li}"
        if isinstance(layer, Conv):
            if layer.kernel < 1 or layer.kernel % 2 == 0:
                errors.append(ValidationError("BadKernel", lid, f"kernel {layer.kernel} must be odd and >= 1"))
            if layer.stride not in (1, 2):
                errors.append(ValidationError("BadStride", lid, f"stride {layer.stride}"))
            if layer.pad_mode not in PAD_MODES:
                errors.append(ValidationError("BadPadMode", lid, layer.pad_mode))
            if layer.in_ch != cur:
                errors.append(ValidationError("ChannelMismatch", lid, f"in_ch {layer.in_ch} != incoming {cur}"))
            cur = layer.out_ch
        elif isinstance(layer, DepthwiseConv):
            if layer.kernel < 1 or layer.kernel % 2 == 0:
                errors.append(ValidationError("BadKernel", lid, f"kernel {layer.kernel} must be odd and >= 1"))
            if layer.stride != 1:
                errors.append(ValidationError("BadStride", lid, "depthwise stride must be 1"))
            if layer.channels != cur:
                errors.append(ValidationError("ChannelMismatch", lid, f"channels {layer.channels} != incoming {cur}"))
            cur = layer.channels
        elif isinstance(layer, TransposedConv):
            if layer.stride != 2:
                errors.append(ValidationError("BadStride", lid, "transposed stride must be 2"))
            if layer.in_ch != cur:
                errors.append(ValidationError("ChannelMismatch", lid, f"in_ch {layer.in_ch} != incoming {cur}"))
            cur = layer.out_ch
        elif isinstance(layer, Norm):
            if layer.kind not in NORM_KINDS:
                errors.append(ValidationError("BadNormKind", lid, layer.kind))
            if layer.channels != cur:
                errors.append(ValidationError("ChannelMismatch", lid, f"channels {layer.channels} != incoming {cur}"))
            if len(layer.gamma) != layer.channels:
                errors.append(ValidationError("GammaLengthMismatch", lid, f"gamma has {len(layer.gamma)} entries for {layer.channels} channels"))
            if len(layer.beta) != layer.channels:
                errors.append(ValidationError("GammaLengthMismatch", lid, f"beta has {len(layer.beta)} entries for {layer.channels} channels"))
            if layer.prunable:
                ok = isinstance(prev, (Conv, DepthwiseConv, TransposedConv))
                if ok:
                    prod_out = prev.channels if isinstance(prev, DepthwiseConv) else prev.out_ch
                    ok = prod_out == layer.channels
                if not ok:
                    errors.append(ValidationError("OrphanPrunableNorm", lid, "prunable norm must directly follow a conv producing its channels"))
        elif isinstance(layer, Activation):
            if layer.fn not in ACTIVATIONS:
                errors.append(ValidationError("BadActivation", lid, layer.fn))
        elif isinstance(layer, ResidualAdd):
            if not allow_residual:
                errors.append(ValidationError("UnexpectedResidual", lid, "residual_add outside a plain block body"))
            if cur != in_ch:
                errors.append(ValidationError("ChannelMismatch", lid, f"residual add joins {cur} to input {in_ch}"))
        else:
            errors.append(ValidationError("UnknownLayer", lid, repr(layer)))
        prev = layer
    return cur


def validate(arch: GeneratorArch) -> list:
    """Return all structural errors; an empty list means the arch is well formed."""
    errors: list = []
    in_ch = arch.input_shape[0]
    cur = _check_seq(arch.head, in_ch, "head", errors)
    for bi, block in enumerate(arch.blocks):
        scope = f"blocks.{bi}"
        if block.channels != cur:
            errors.append(ValidationError("ChannelMismatch", scope, f"block channels {block.channels} != incoming {cur}"))
        if isinstance(block, IncResBlock):
            if len(block.branches) != 6:
                errors.append(ValidationError("BranchCount", scope, f"{len(block.branches)} branches, expected 6"))
            for ji, br in enumerate(block.branches):
                bscope = f"{scope}.branches.{ji}.layers"
                if br.alive != (br.mid_ch > 0):
                    errors.append(ValidationError("AliveMismatch", bscope, f"alive={br.alive} with mid_ch={br.mid_ch}"))
                if br.mid_ch < 0:
                    errors.append(ValidationError("ChannelMismatch", bscope, f"mid_ch {br.mid_ch} < 0"))
                n_prunable = sum(1 for l in br.layers if isinstance(l, Norm) and l.prunable)
                if br.alive and n_prunable != 1:
                    errors.append(ValidationError("OrphanPrunableNorm", bscope, f"{n_prunable} prunable norms in branch, expected 1"))
                out = _check_seq(br.layers, block.channels, bscope, errors)
                if br.alive and out != block.channels:
                    errors.append(ValidationError("ChannelMismatch", bscope, f"branch output {out} != block channels {block.channels}"))
        else:
            out = _check_seq(block.body, block.channels, f"{scope}.body", errors, allow_residual=True)
            if out != block.channels:
                errors.append(ValidationError("ChannelMismatch", f"{scope}.body", f"body output {out} != block channels {block.channels}"))
    _check_seq(arch.tail, cur, "tail", errors)
    # spatial sanity along the main trunk
    shape = tuple(arch.input_shape)
    for part, seq in (("head", arch.head), ("tail", arch.tail)):
        for li, layer in enumerate(seq):
            shape = layer_out_shape(layer, shape)
            if shape[1] < 1 or shape[2] < 1:
                errors.append(ValidationError("SpatialUnderflow", f"{part}.{li}", f"spatial collapsed to {shape[1]}x{shape[2]}"))
                break
        if errors and errors[-1].code == "SpatialUnderflow":
            break
    return errors


# ---------------------------------------------------------------------------
# serialization


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise SchemaError(f"missing key {key!r} in {where}", key)
    return d[key]


_LAYER_FIELDS = {
    "conv": {"kind", "kernel", "in_ch", "out_ch", "stride", "pad_mode", "bias"},
    "depthwise_conv": {"kind", "kernel", "channels", "stride", "pad_mode", "bias"},
    "transposed_conv": {"kind", "kernel", "in_ch", "out_ch", "stride", "output_pad", "bias"},
    "norm": {"kind", "norm_kind", "channels", "gamma", "beta", "tracks_running_stats", "prunable"},
    "activation": {"kind", "fn"},
    "residual_add": {"kind"},
}


def layer_from_dict(d: dict, where: str = "layer") -> LayerSpec:
    if not isinstance(d, dict):
        raise SchemaError(f"{where} must be an object", where)
    kind = _require(d, "kind", where)
    if kind not in _LAYER_FIELDS:
        raise SchemaError(f"unknown layer kind {kind!r}", f"{where}.kind")
    extra = set(d) - _LAYER_FIELDS[kind]
    if extra:
        raise SchemaError(f"unexpected keys {sorted(extra)} in {where}", where)
    try:
        if kind == "conv":
            return Conv(
                int(_require(d, "kernel", where)),
                int(_require(d, "in_ch", where)),
                int(_require(d, "out_ch", where)),
                int(_require(d, "stride", where)),
                str(_require(d, "pad_mode", where)),
                bool(_require(d, "bias", where)),
            )
        if kind == "depthwise_conv":
            return DepthwiseConv(
                int(_require(d, "kernel", where)),
                int(_require(d, "channels", where)),
                int(_require(d, "stride", where)),
                str(_require(d, "pad_mode", where)),
                bool(_require(d, "bias", where)),
            )
        if kind == "transposed_conv":
            return TransposedConv(
                int(_require(d, "kernel", where)),
                int(_require(d, "in_ch", where)),
                int(_require(d, "out_ch", where)),
                int(_require(d, "stride", where)),
                int(_require(d, "output_pad", where)),
                bool(_require(d, "bias", where)),
            )
        if kind == "norm":
            norm_kind = str(_require(d, "norm_kind", where))
            if norm_kind not in NORM_KINDS:
                raise SchemaError(f"unknown norm kind {norm_kind!r}", f"{where}.norm_kind")
            return Norm(
                norm_kind,
                int(_require(d, "channels", where)),
                _f32(_require(d, "gamma", where)),
                _f32(_require(d, "beta", where)),
                bool(_require(d, "tracks_running_stats", where)),
                bool(_require(d, "prunable", where)),
            )
        if kind == "activation":
            fn = str(_require(d, "fn", where))
            if fn not in ACTIVATIONS:
                raise SchemaError(f"unknown activation {fn!r}", f"{where}.fn")
            return Activation(fn)
        return ResidualAdd()
    except (TypeError, ValueError) as e:
        raise SchemaError(f"bad value in {where}: {e}", where)


def block_from_dict(d: dict, where: str) -> Block:
    kind = _require(d, "kind", where)
    if kind == "incres":
        channels = int(_require(d, "channels", where))
        branches = []
        for ji, bd in enumerate(_require(d, "branches", where)):
            bw = f"{where}.branches.{ji}"
            op_type = str(_require(bd, "op_type", bw))
            if op_type not in BRANCH_OP_TYPES:
                raise SchemaError(f"unknown op_type {op_type!r}", f"{bw}.op_type")
            layers = [
                layer_from_dict(ld, f"{bw}.layers.{li}")
                for li, ld in enumerate(_require(bd, "layers", bw))
            ]
            branches.append(
                Branch(
                    op_type,
                    int(_require(bd, "kernel", bw)),
                    int(_require(bd, "mid_ch", bw)),
                    bool(_require(bd, "alive", bw)),
                    layers,
                )
            )
        return IncResBlock(channels, branches)
    if kind == "plain_res":
        channels = int(_require(d, "channels", where))
        body = [
            layer_from_dict(ld, f"{where}.body.{li}")
            for li, ld in enumerate(_require(d, "body", where))
        ]
        return PlainResBlock(channels, body)
    raise SchemaError(f"unknown block kind {kind!r}", f"{where}.kind")


def from_dict(d: dict) -> GeneratorArch:
    if not isinstance(d, dict):
        raise SchemaError("top level must be an object")
    version = _require(d, "format_version", "top")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {version!r}", "format_version")
    shape = _require(d, "input_shape", "top")
    if not (isinstance(shape, (list, tuple)) and len(shape) == 3):
        raise SchemaError("input_shape must be [c, h, w]", "input_shape")
    extra = set(d) - {"format_version", "name", "input_shape", "head", "blocks", "tail"}
    if extra:
        raise SchemaError(f"unexpected top-level keys {sorted(extra)}")
    return GeneratorArch(
        name=str(_require(d, "name", "top")),
        input_shape=tuple(int(v) for v in shape),
        head=[layer_from_dict(ld, f"head.{i}") for i, ld in enumerate(_require(d, "head", "top"))],
        blocks=[block_from_dict(bd, f"blocks.{i}") for i, bd in enumerate(_require(d, "blocks", "top"))],
        tail=[layer_from_dict(ld, f"tail.{i}") for i, ld in enumerate(_require(d, "tail", "top"))],
    )


def serialize(arch: GeneratorArch) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(arch.to_dict(), sort_keys=True, indent=2) + "\n"


def deserialize(text: str) -> GeneratorArch:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno)
    return from_dict(d)


def arch_hash(arch: GeneratorArch) -> str:
    return hashlib.sha256(serialize(arch).encode("utf-8")).hexdigest()


def save_arch(arch: GeneratorArch, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize(arch))


def load_arch(path) -> GeneratorArch:
    with open(path, "r", encoding="utf-8") as f:
        return deserialize(f.read())
