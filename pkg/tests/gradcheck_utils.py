"""Finite-difference gradient checking against the tape engine.

The oracle is plain central differencing of a scalar-valued rebuild of the
op; nothing from the engine's backward path is reused.
"""

import numpy as np

from catpress.engine import Tape, Var


def fd_gradient(fn, x: np.ndarray, eps: float) -> np.ndarray:
    """Central differences of scalar fn() w.r.t. x, mutating x in place."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = fn()
        x[i] = old - eps
        fm = fn()
        x[i] = old
        g[i] = (fp - fm) / (2.0 * eps)
    return g


def check_op(build, arrays, eps, rtol):
    """build(*vars) -> scalar Var.  Returns the worst relative error."""
    tape = Tape()
    vs = [Var(a, tape, needs_grad=True) for a in arrays]
    loss = build(*vs)
    tape.backward(loss)

    def value():
        return float(build(*[Var(a, Tape()) for a in arrays]).value)

    worst = 0.0
    for v, a in zip(vs, arrays):
        analytic = v.grad if v.grad is not None else np.zeros_like(a)
        numeric = fd_gradient(value, a, eps)
        scale = np.max(np.abs(numeric))
        if scale == 0:
            err = np.max(np.abs(analytic))
        else:
            err = np.max(np.abs(analytic - numeric)) / scale
        worst = max(worst, float(err))
    return worst


def op_cases(dtype, rng, instances):
    """(name, build, arrays) triples covering every differentiable op."""
    import catpress.engine as E

    def R(*shape):
        return rng.standard_normal(shape).astype(dtype)

    def away_from_kinks(a, margin=0.25):
        a = a.copy()
        a[np.abs(a) < margin] += np.sign(a[np.abs(a) < margin] + 0.5) * margin
        return a

    for _ in range(instances):
        x = R(2, 2, 5, 5)
        w = R(3, 2, 3, 3)
        b = R(3)
        proj = R(2, 3, 5, 5)
        yield "conv2d", (lambda x_, w_, b_: E.mse_mean(E.conv2d(x_, w_, b_), proj)), (x.copy(), w.copy(), b.copy())

        wci = R(2, 4, 3, 3)
        xci = R(2, 4, 5, 5)
        proj_ci = R(2, 2, 3, 3)
        yield "conv2d_s2", (lambda x_, w_: E.mse_mean(E.conv2d(x_, w_, None, stride=2, pad_mode="reflect"), proj_ci)), (xci.copy(), wci.copy())

        wd = R(2, 3, 3)
        projd = R(2, 2, 5, 5)
        yield "depthwise_conv2d", (lambda x_, w_, b_: E.mse_mean(E.depthwise_conv2d(x_, w_, b_), projd)), (x.copy(), wd.copy(), R(2))

        wt = R(2, 3, 3, 3)
        projt = R(2, 3, 10, 10)
        yield "transposed_conv2d", (lambda x_, w_, b_: E.mse_mean(E.transposed_conv2d(x_, w_, b_), projt)), (x.copy(), wt.copy(), R(3))

        g2 = R(2)
        b2 = R(2)
        projn = R(2, 2, 5, 5)
        yield "instance_norm", (lambda x_, g_, b_: E.mse_mean(E.instance_norm(x_, g_, b_), projn)), (x.copy(), g2.copy(), b2.copy())

        rm = np.zeros(2, dtype)
        rv = np.ones(2, dtype)
        yield "batch_norm", (lambda x_, g_, b_: E.mse_mean(E.batch_norm(x_, g_, b_, rm, rv, True), projn)), (x.copy(), g2.copy(), b2.copy())

        xr = away_from_kinks(R(2, 3, 4, 4))
        projr = R(2, 3, 4, 4)
        yield "relu", (lambda x_: E.mse_mean(E.relu(x_), projr)), (xr.copy(),)
        yield "leaky_relu", (lambda x_: E.mse_mean(E.leaky_relu(x_), projr)), (xr.copy(),)
        yield "tanh", (lambda x_: E.mse_mean(E.tanh(x_), projr)), (xr.copy(),)
        yield "sigmoid", (lambda x_: E.mse_mean(E.sigmoid(x_), projr)), (xr.copy(),)

        a1 = R(2, 3, 4, 4)
        cat_proj = R(2, 6, 4, 4)
        yield "residual_add", (lambda a_, b_: E.mse_mean(E.residual_add(a_, b_), projr)), (a1.copy(), R(2, 3, 4, 4))
        yield "concat", (lambda a_, b_: E.mse_mean(E.concat(a_, b_), cat_proj)), (a1.copy(), R(2, 3, 4, 4))

        flat_proj = R(2, 48)
        yield "flatten_features", (lambda x_: E.mse_mean(E.flatten_features(x_), flat_proj)), (a1.copy(),)

        target = R(2, 3, 4, 4)
        diff = R(2, 3, 4, 4)
        diff = diff + np.where(diff >= 0, 0.3, -0.3).astype(dtype)  # keep |pred-target| off the L1 kink
        pred = target + diff
        yield "l1_mean", (lambda p_: E.l1_mean(p_, target)), (pred.copy(),)
        yield "mse_mean", (lambda p_: E.mse_mean(p_, target)), (pred.copy(),)

        z = R(2, 1, 4, 4) * 2
        yield "gan_logit_real", (lambda z_: E.gan_logit_loss(z_, True)), (z.copy(),)
        yield "gan_logit_fake", (lambda z_: E.gan_logit_loss(z_, False)), (z.copy(),)

        xs = R(3, 8)
        xt = rng.standard_normal((3, 6)).astype(dtype)
        yield "ka_score", (lambda s_: E.ka_score(s_, xt)), (xs.copy(),)

        pads = R(2, 2, 4, 4)
        projp = R(2, 2, 8, 6)
        yield "pad_reflect", (lambda x_: E.mse_mean(E.pad2d(x_, (2, 2, 1, 1), "reflect"), projp)), (pads.copy(),)
