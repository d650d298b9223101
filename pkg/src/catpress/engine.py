"""Minimal deterministic tensor executor with reverse-mode differentiation.

Tensors are plain numpy arrays in (n, c, h, w) layout, float32 by default
(float64 works everywhere for shadow-precision checks).  A `Tape` records
backward closures in execution order; `backward` replays them in reverse.
Gradients accumulate on `Var` handles, so any intermediate activation kept
around by the caller doubles as a gradient tap.

Convolutions run through the JIT kernels in `kernels`; transposed
convolution is executed literally as a direct convolution over the
zero-stuffed input, which keeps its multiply count equal to the analytic
cost model.  Everything else is vectorized numpy with float64 accumulation
where statistics are involved.

Everything here is deterministic: same inputs, same seed, same bytes out.
"""

from __future__ import annotations

import os

import numpy as np

from . import kernels
from .errors import ShapeError, TapeConsumed

CHECK_FINITE = bool(os.environ.get("CATPRESS_DEBUG_FINITE"))

NORM_EPS = 1e-5
BN_MOMENTUM = 0.1
LOGIT_CLAMP = 30.0


class Tape:
    """Ordered record of executed ops plus an optional multiply counter."""

    def __init__(self, count_macs: bool = False):
        self._ops = []
        self._consumed = False
        self.mac_count = 0 if count_macs else None

    def record(self, fn):
        self._ops.append(fn)

    def add_macs(self, n: int):
        if self.mac_count is not None:
            self.mac_count += int(n)

    def backward(self, loss: "Var"):
        """Seed d(loss)/d(loss) = 1 and replay all ops in reverse."""
        if self._consumed:
            raise TapeConsumed("backward() already ran on this tape")
        self._consumed = True
        if loss.value.size != 1:
            raise ShapeError("backward needs a scalar loss")
        loss.grad = np.ones_like(loss.value)
        for fn in reversed(self._ops):
            fn()


class Var:
    """A tensor plus its gradient accumulator."""

    __slots__ = ("value", "grad", "tape", "needs_grad")

    def __init__(self, value, tape: Tape = None, needs_grad: bool = False):
        self.value = np.asarray(value)
        self.grad = None
        self.tape = tape
        self.needs_grad = needs_grad

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        return self.grad

    def accum(self, g: np.ndarray, own: bool = False):
        """Add g into the gradient; `own` hands over a freshly built array."""
        if g.dtype != self.value.dtype:
            g = g.astype(self.value.dtype)
            own = True
        if self.grad is None:
            self.grad = g if own else g.copy()
        else:
            self.grad += g


def _finite(x: np.ndarray):
    if CHECK_FINITE and not np.isfinite(x).all():
        raise FloatingPointError("non-finite value at op boundary")


def _out(tape, value, needs):
    _finite(value)
    return Var(value, tape, needs)


def constant(value, tape: Tape = None) -> Var:
    return Var(np.asarray(value), tape, needs_grad=False)


def parameter(value, tape: Tape) -> Var:
    return Var(np.asarray(value), tape, needs_grad=True)


# ---------------------------------------------------------------------------
# padding and layout ops


def _reflect_idx(n: int, lo: int, hi: int) -> np.ndarray:
    idx = np.arange(-lo, n + hi)
    idx = np.abs(idx)
    idx = np.where(idx >= n, 2 * (n - 1) - idx, idx)
    return idx


def pad2d(x: Var, pads: tuple, mode: str = "zero") -> Var:
    """Pad the two trailing axes by (top, bottom, left, right)."""
    top, bottom, left, right = pads
    if top == bottom == left == right == 0:
        return x
    n, c, h, w = x.value.shape
    tape = x.tape
    if mode == "zero":
        value = np.zeros((n, c, h + top + bottom, w + left + right), x.value.dtype)
        value[:, :, top : top + h, left : left + w] = x.value
        out = _out(tape, value, x.needs_grad)
        if out.needs_grad:

            def bwd():
                x.accum(out.grad[:, :, top : top + h, left : left + w])

            tape.record(bwd)
        return out
    if mode == "reflect":
        if top >= h or bottom >= h or left >= w or right >= w:
            raise ShapeError("reflect pad wider than the input")
        iy = _reflect_idx(h, top, bottom)
        ix = _reflect_idx(w, left, right)
        value = x.value[:, :, iy[:, None], ix[None, :]]
        out = _out(tape, value, x.needs_grad)
        if out.needs_grad:

            def bwd():
                g = out.grad
                # fold rows, then columns, back onto their source positions
                rows = np.zeros((n, c, h, g.shape[3]), g.dtype)
                for t, s in enumerate(iy):
                    rows[:, :, s, :] += g[:, :, t, :]
                dx = x.ensure_grad()
                for t, s in enumerate(ix):
                    dx[:, :, :, s] += rows[:, :, :, t]

            tape.record(bwd)
        return out
    raise ShapeError(f"unknown pad mode {mode!r}")


def zero_stuff(x: Var, stride: int) -> Var:
    """Insert stride-1 zeros between pixels (fractional-stride upsampling)."""
    n, c, h, w = x.value.shape
    value = np.zeros((n, c, (h - 1) * stride + 1, (w - 1) * stride + 1), x.value.dtype)
    value[:, :, ::stride, ::stride] = x.value
    out = _out(x.tape, value, x.needs_grad)
    if out.needs_grad:

        def bwd():
            x.accum(out.grad[:, :, ::stride, ::stride])

        x.tape.record(bwd)
    return out


def flatten_features(x: Var) -> Var:
    """(n, c, h, w) -> (n, c*h*w), channel-major then row-major spatial."""
    n = x.value.shape[0]
    value = x.value.reshape(n, -1)
    out = _out(x.tape, value, x.needs_grad)
    if out.needs_grad:

        def bwd():
            x.accum(out.grad.reshape(x.value.shape))

        x.tape.record(bwd)
    return out


def concat(a: Var, b: Var, axis: int = 1) -> Var:
    tape = a.tape or b.tape
    value = np.concatenate([a.value, b.value], axis=axis)
    needs = a.needs_grad or b.needs_grad
    out = _out(tape, value, needs)
    if needs:
        na = a.value.shape[axis]

        def bwd():
            g = out.grad
            sl = [slice(None)] * g.ndim
            if a.needs_grad:
                sl[axis] = slice(0, na)
                a.ensure_grad()[...] += g[tuple(sl)]
            if b.needs_grad:
                sl[axis] = slice(na, None)
                b.ensure_grad()[...] += g[tuple(sl)]

        tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# convolutions


def _to_nhwc(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.transpose(0, 2, 3, 1))


def _to_nchw(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.transpose(0, 3, 1, 2))


def conv2d_valid(x: Var, w: Var, b: Var = None, stride: int = 1) -> Var:
    """Direct convolution, no padding; w is (out_ch, in_ch, k, k)."""
    n, ci, h, ww = x.value.shape
    co, ci2, kh, kw = w.value.shape
    if ci != ci2:
        raise ShapeError(f"conv weight expects {ci2} input channels, got {ci}")
    if h < kh or ww < kw:
        raise ShapeError(f"input {h}x{ww} smaller than kernel {kh}x{kw}")
    ho = (h - kh) // stride + 1
    wo = (ww - kw) // stride + 1
    tape = x.tape or w.tape
    xh = _to_nhwc(x.value)
    wh = np.ascontiguousarray(w.value.transpose(2, 3, 1, 0))  # (kh, kw, ci, co)
    bias = b.value if b is not None else np.zeros(co, x.value.dtype)
    oh = np.empty((n, ho, wo, co), x.value.dtype)
    if co >= ci or ci == 0:
        kernels.conv_fwd_oc(xh, wh, bias, oh, stride)
    else:
        kernels.conv_fwd_ci(xh, np.ascontiguousarray(wh.transpose(0, 1, 3, 2)), bias, oh, stride)
    value = _to_nchw(oh)
    if tape is not None:
        tape.add_macs(kh * kw * ci * co * ho * wo * n)
    needs = x.needs_grad or w.needs_grad or (b is not None and b.needs_grad)
    out = _out(tape, value, needs)
    if needs:

        def bwd():
            gh = _to_nhwc(out.grad)
            if x.needs_grad:
                dxh = np.zeros_like(xh)
                if ci >= co:
                    kernels.conv_bwd_x_ci(gh, np.ascontiguousarray(wh.transpose(0, 1, 3, 2)), dxh, stride)
                else:
                    kernels.conv_bwd_x_oc(gh, wh, dxh, stride)
                x.accum(_to_nchw(dxh), own=True)
            if w.needs_grad or (b is not None and b.needs_grad):
                db = np.zeros(co, w.value.dtype)
                if ci >= co:
                    dwh = np.zeros((kh, kw, co, ci), w.value.dtype)
                    kernels.conv_bwd_w_ci(gh, xh, dwh, db, stride)
                    dw = dwh.transpose(2, 3, 0, 1)
                else:
                    dwh = np.zeros_like(wh)
                    kernels.conv_bwd_w_oc(gh, xh, dwh, db, stride)
                    dw = dwh.transpose(3, 2, 0, 1)
                if w.needs_grad:
                    w.accum(np.ascontiguousarray(dw), own=True)
                if b is not None and b.needs_grad:
                    b.accum(db, own=True)

        tape.record(bwd)
    return out


def conv2d(x: Var, w: Var, b: Var = None, stride: int = 1, pad_mode: str = "zero") -> Var:
    """Same-style conv: pads kernel//2 on each side, then runs valid."""
    k = w.value.shape[2]
    p = k // 2
    return conv2d_valid(pad2d(x, (p, p, p, p), pad_mode), w, b, stride)


def depthwise_conv2d(x: Var, w: Var, b: Var = None, pad_mode: str = "zero") -> Var:
    """Per-channel conv, stride 1; w is (channels, k, k)."""
    n, c, h, ww = x.value.shape
    c2, kh, kw = w.value.shape
    if c != c2:
        raise ShapeError(f"depthwise weight expects {c2} channels, got {c}")
    p = kh // 2
    xp = pad2d(x, (p, p, p, p), pad_mode)
    ho = xp.value.shape[2] - kh + 1
    wo = xp.value.shape[3] - kw + 1
    tape = xp.tape or w.tape
    xh = _to_nhwc(xp.value)
    wh = np.ascontiguousarray(w.value.transpose(1, 2, 0))  # (kh, kw, c)
    bias = b.value if b is not None else np.zeros(c, x.value.dtype)
    oh = np.empty((n, ho, wo, c), x.value.dtype)
    kernels.dwconv_fwd(xh, wh, bias, oh)
    value = _to_nchw(oh)
    if tape is not None:
        tape.add_macs(kh * kw * c * ho * wo * n)
    needs = xp.needs_grad or w.needs_grad or (b is not None and b.needs_grad)
    out = _out(tape, value, needs)
    if needs:

        def bwd():
            gh = _to_nhwc(out.grad)
            if xp.needs_grad:
                dxh = np.zeros_like(xh)
                kernels.dwconv_bwd_x(gh, wh, dxh)
                xp.accum(_to_nchw(dxh), own=True)
            if w.needs_grad or (b is not None and b.needs_grad):
                dwh = np.zeros_like(wh)
                db = np.zeros(c, w.value.dtype)
                kernels.dwconv_bwd_w(gh, xh, dwh, db)
                if w.needs_grad:
                    w.accum(np.ascontiguousarray(dwh.transpose(2, 0, 1)), own=True)
                if b is not None and b.needs_grad:
                    b.accum(db, own=True)

        tape.record(bwd)
    return out


def _flip_transpose_weight(w: Var) -> Var:
    """(in, out, k, k) transposed-conv weight -> equivalent forward-conv weight."""
    value = np.ascontiguousarray(w.value.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    out = _out(w.tape, value, w.needs_grad)
    if w.needs_grad:

        def bwd():
            w.ensure_grad()[...] += out.grad.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]

        w.tape.record(bwd)
    return out


def transposed_conv2d(x: Var, w: Var, b: Var = None, stride: int = 2, output_pad: int = 1) -> Var:
    """Fractionally strided conv: zero-stuff, pad, then direct convolution.

    Padding follows the kernel//2 convention of the downsampling convs, so a
    kernel-3 / output_pad-1 layer exactly doubles the spatial size.
    """
    k = w.value.shape[2]
    p = k // 2
    lo = k - 1 - p
    hi = k - 1 - p + output_pad
    stuffed = zero_stuff(x, stride)
    padded = pad2d(stuffed, (lo, hi, lo, hi), "zero")
    return conv2d_valid(padded, _flip_transpose_weight(w), b, stride=1)


# ---------------------------------------------------------------------------
# normalization


def _cshape(x: np.ndarray) -> tuple:
    return (1, x.shape[1], 1, 1)


def _norm_backward(tape, x, gamma, beta, out, x_hat, inv_std, stat_axes, param_axes):
    """Shared backward for batch-stat normalization.

    stat_axes are the axes the statistics were computed over; param_axes are
    the reduction axes for the (per-channel, batch-shared) affine params.
    Statistics reduce in float64; elementwise math stays in storage dtype.
    """
    dtype = x.value.dtype

    def bwd():
        g = out.grad
        if gamma.needs_grad:
            gamma.ensure_grad()[...] += np.sum(g * x_hat, axis=param_axes, dtype=np.float64).astype(gamma.value.dtype)
        if beta is not None and beta.needs_grad:
            beta.ensure_grad()[...] += np.sum(g, axis=param_axes, dtype=np.float64).astype(beta.value.dtype)
        if x.needs_grad:
            gg = g * gamma.value.reshape(_cshape(x.value))
            mean_gg = np.mean(gg, axis=stat_axes, keepdims=True, dtype=np.float64).astype(dtype)
            mean_ggx = np.mean(gg * x_hat, axis=stat_axes, keepdims=True, dtype=np.float64).astype(dtype)
            x.ensure_grad()[...] += inv_std * (gg - mean_gg - x_hat * mean_ggx)

    tape.record(bwd)


def _standardize(xv: np.ndarray, axes: tuple, eps: float):
    """(x - mean) * inv_std with float64 statistics, storage-dtype output."""
    dtype = xv.dtype
    mean = np.mean(xv, axis=axes, keepdims=True, dtype=np.float64).astype(dtype)
    centered = xv - mean
    var = np.mean(np.square(centered), axis=axes, keepdims=True, dtype=np.float64)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(dtype)
    return centered * inv_std, inv_std, mean, var


def instance_norm(x: Var, gamma: Var, beta: Var, eps: float = NORM_EPS) -> Var:
    """Per-(sample, channel) standardization over h, w, then affine."""
    n, c, h, w = x.value.shape
    x2 = np.ascontiguousarray(x.value).reshape(n, c, h * w)
    value = np.empty_like(x2)
    x_hat = np.empty_like(x2)
    inv_std = np.empty((n, c), x.value.dtype)
    kernels.inorm_fwd(x2, gamma.value, beta.value, value, x_hat, inv_std, eps)
    tape = x.tape or gamma.tape
    if tape is not None:
        tape.add_macs(2 * n * c * h * w)
    needs = x.needs_grad or gamma.needs_grad or beta.needs_grad
    out = _out(tape, value.reshape(x.value.shape), needs)
    if needs:

        def bwd():
            g2 = np.ascontiguousarray(out.grad).reshape(n, c, h * w)
            dgamma = np.zeros(c, np.float64)
            dbeta = np.zeros(c, np.float64)
            want_dx = x.needs_grad
            if want_dx:
                buf = x.ensure_grad()
                through = buf.flags.c_contiguous
                dx2 = buf.reshape(n, c, h * w) if through else np.zeros((n, c, h * w), x.value.dtype)
            else:
                through = True
                dx2 = np.zeros((0, 0, 0), x.value.dtype)
            kernels.inorm_bwd(g2, x_hat, inv_std, gamma.value, dgamma, dbeta, dx2, want_dx)
            if want_dx and not through:
                x.grad += dx2.reshape(x.value.shape)
            if gamma.needs_grad:
                gamma.accum(dgamma, own=True)
            if beta.needs_grad:
                beta.accum(dbeta, own=True)

        tape.record(bwd)
    return out


def batch_norm(
    x: Var,
    gamma: Var,
    beta: Var,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    tracks_running_stats: bool = True,
    momentum: float = BN_MOMENTUM,
    eps: float = NORM_EPS,
) -> Var:
    """Channel standardization over (n, h, w); tracked stats serve eval mode."""
    axes = (0, 2, 3)
    dtype = x.value.dtype
    use_batch_stats = training or not tracks_running_stats
    if use_batch_stats:
        x_hat, inv_std, mean, var = _standardize(x.value, axes, eps)
        if training and tracks_running_stats:
            running_mean[...] = ((1 - momentum) * running_mean + momentum * mean.ravel().astype(np.float64)).astype(running_mean.dtype)
            running_var[...] = ((1 - momentum) * running_var + momentum * var.ravel()).astype(running_var.dtype)
    else:
        mean = running_mean.astype(dtype).reshape(_cshape(x.value))
        inv_std = (1.0 / np.sqrt(running_var.astype(np.float64) + eps)).astype(dtype).reshape(_cshape(x.value))
        x_hat = (x.value - mean) * inv_std
    value = x_hat * gamma.value.reshape(_cshape(x.value)) + beta.value.reshape(_cshape(x.value))
    tape = x.tape or gamma.tape
    if tape is not None:
        n, c, h, w = x.value.shape
        tape.add_macs(0 if (tracks_running_stats and not training) else 2 * n * c * h * w)
    needs = x.needs_grad or gamma.needs_grad or beta.needs_grad
    out = _out(tape, value, needs)
    if needs:
        if use_batch_stats:
            _norm_backward(tape, x, gamma, beta, out, x_hat, inv_std, axes, axes)
        else:

            def bwd():
                g = out.grad
                if gamma.needs_grad:
                    gamma.ensure_grad()[...] += np.sum(g * x_hat, axis=axes, dtype=np.float64).astype(gamma.value.dtype)
                if beta.needs_grad:
                    beta.ensure_grad()[...] += np.sum(g, axis=axes, dtype=np.float64).astype(beta.value.dtype)
                if x.needs_grad:
                    x.ensure_grad()[...] += g * gamma.value.reshape(_cshape(x.value)) * inv_std

            tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# activations and elementwise


def relu(x: Var) -> Var:
    value = np.maximum(x.value, 0)
    out = _out(x.tape, value, x.needs_grad)
    if out.needs_grad:

        def bwd():
            x.accum(out.grad * (x.value > 0), own=True)

        x.tape.record(bwd)
    return out


def leaky_relu(x: Var, alpha: float = 0.2) -> Var:
    value = np.where(x.value > 0, x.value, x.value * np.asarray(alpha, x.value.dtype))
    out = _out(x.tape, value, x.needs_grad)
    if out.needs_grad:

        def bwd():
            slope = np.where(x.value > 0, np.asarray(1, x.value.dtype), np.asarray(alpha, x.value.dtype))
            x.accum(out.grad * slope, own=True)

        x.tape.record(bwd)
    return out


def tanh(x: Var) -> Var:
    value = np.tanh(x.value)
    out = _out(x.tape, value, x.needs_grad)
    if out.needs_grad:

        def bwd():
            x.accum(out.grad * (1 - value * value), own=True)

        x.tape.record(bwd)
    return out


def sigmoid(x: Var) -> Var:
    value = (1.0 / (1.0 + np.exp(-x.value.astype(np.float64)))).astype(x.value.dtype)
    out = _out(x.tape, value, x.needs_grad)
    if out.needs_grad:

        def bwd():
            x.ensure_grad()[...] += out.grad * value * (1 - value)

        x.tape.record(bwd)
    return out


ACTIVATION_OPS = {"relu": relu, "leaky_relu": leaky_relu, "tanh": tanh, "sigmoid": sigmoid}


def residual_add(a: Var, b: Var) -> Var:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"residual add shapes differ: {a.value.shape} vs {b.value.shape}")
    tape = a.tape or b.tape
    out = _out(tape, a.value + b.value, a.needs_grad or b.needs_grad)
    if out.needs_grad:

        def bwd():
            if a.needs_grad:
                a.accum(out.grad)
            if b.needs_grad:
                b.accum(out.grad)

        tape.record(bwd)
    return out


# ---------------------------------------------------------------------------
# scalar losses


def _scalar(tape, value, needs) -> Var:
    return _out(tape, np.asarray(value, dtype=np.float64), needs)


def l1_mean(pred: Var, target) -> Var:
    """Mean absolute difference against a constant target."""
    tv = target.value if isinstance(target, Var) else np.asarray(target)
    diff = pred.value.astype(np.float64) - tv.astype(np.float64)
    out = _scalar(pred.tape, np.mean(np.abs(diff)), pred.needs_grad)
    if out.needs_grad:

        def bwd():
            g = float(out.grad) / diff.size
            pred.ensure_grad()[...] += (np.sign(diff) * g).astype(pred.value.dtype)

        pred.tape.record(bwd)
    return out


def mse_mean(pred: Var, target) -> Var:
    """Mean squared difference against a constant target."""
    tv = target.value if isinstance(target, Var) else np.asarray(target)
    diff = pred.value.astype(np.float64) - tv.astype(np.float64)
    out = _scalar(pred.tape, np.mean(diff * diff), pred.needs_grad)
    if out.needs_grad:

        def bwd():
            g = 2.0 * float(out.grad) / diff.size
            pred.ensure_grad()[...] += (diff * g).astype(pred.value.dtype)

        pred.tape.record(bwd)
    return out


def gan_logit_loss(logits: Var, target_real: bool, clamp: float = LOGIT_CLAMP) -> Var:
    """-mean(log sigmoid(z)) when real, -mean(log(1 - sigmoid(z))) when fake.

    Computed in log-sigmoid form on logits clamped to +-clamp.
    """
    with np.errstate(invalid="ignore"):
        z = np.clip(logits.value.astype(np.float64), -clamp, clamp)
        if target_real:
            value = np.mean(np.logaddexp(0.0, -z))
        else:
            value = np.mean(np.logaddexp(0.0, z))
    out = _scalar(logits.tape, value, logits.needs_grad)
    if out.needs_grad:

        def bwd():
            sig = 1.0 / (1.0 + np.exp(-z))
            local = sig - 1.0 if target_real else sig
            gate = np.abs(logits.value) < clamp
            g = float(out.grad) / z.size
            logits.ensure_grad()[...] += (local * gate * g).astype(logits.value.dtype)

        logits.tape.record(bwd)
    return out


def ka_score(student: Var, teacher, centered: bool = False) -> Var:
    """Alignment between a student feature matrix and constant teacher features."""
    from . import align

    tv = teacher.value if isinstance(teacher, Var) else np.asarray(teacher)
    value = float(align.ka_gram(student.value, tv, centered=centered))
    out = _scalar(student.tape, value, student.needs_grad)
    if out.needs_grad:

        def bwd():
            gx, _ = align.ka_grad(student.value, tv, centered=centered)
            student.ensure_grad()[...] += (gx * float(out.grad)).astype(student.value.dtype)

        student.tape.record(bwd)
    return out


def scale(x: Var, c: float) -> Var:
    out = _out(x.tape, x.value * c, x.needs_grad)
    if out.needs_grad:

        def bwd():
            x.ensure_grad()[...] += out.grad * c

        x.tape.record(bwd)
    return out


def add_scalars(*terms: Var) -> Var:
    tape = next((t.tape for t in terms if t.tape is not None), None)
    value = sum(float(t.value) for t in terms)
    needs = any(t.needs_grad for t in terms)
    out = _scalar(tape, value, needs)
    if needs:

        def bwd():
            for t in terms:
                if t.needs_grad:
                    t.ensure_grad()[...] += out.grad.astype(t.value.dtype)

        tape.record(bwd)
    return out


def weighted_sum(terms, weights) -> Var:
    """sum_i w_i * t_i over scalar Vars; the Eq-style loss combiner."""
    return add_scalars(*[scale(t, w) for t, w in zip(terms, weights)])


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Standard bias-corrected Adam; state keyed by parameter id."""

    def __init__(self, lr: float = 2e-4, beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params: dict, grads: dict):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for pid, p in params.items():
            g = grads.get(pid)
            if g is None:
                continue
            if pid not in self.m:
                self.m[pid] = np.zeros_like(p)
                self.v[pid] = np.zeros_like(p)
            m = self.m[pid]
            v = self.v[pid]
            m[...] = b1 * m + (1.0 - b1) * g
            v[...] = b2 * v + (1.0 - b2) * (g * g)
            p[...] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def sgd_adam_step(params: dict, grads: dict, lr: float, beta1: float = 0.5, beta2: float = 0.999, state: Adam = None) -> Adam:
    """One Adam update over a parameter dict; returns the carried state."""
    if state is None:
        state = Adam(lr, beta1, beta2)
    state.lr = lr
    state.step(params, grads)
    return state
