"""JIT-compiled direct-convolution loops.

These are the only hot loops in the executor.  They implement plain direct
convolution -- no im2col buffers, no FFT -- so the number of scalar
multiplies each call performs is exactly the product of its loop extents,
which is what the multiply-count accounting relies on.

Arrays arrive channels-last (the op wrappers transpose at the boundary):
with tiny spatial sizes the only long, contiguous axis is the channel one,
so every kernel reduces or broadcasts along it.  Two forward variants exist
because the profitable inner axis flips with the channel ratio: one runs
the output-channel loop innermost, the other the input-channel loop.

Everything is single-threaded with a fixed accumulation order per output
element, so results are bit-identical across runs and thread settings.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

warnings.filterwarnings("ignore", message=".*TBB.*")

import numba
from numba import njit

_JIT = dict(fastmath=True, cache=True)


def _configure_threads():
    """CATPRESS_THREADS caps worker threads; the kernels themselves are
    single-threaded, so this only bounds auxiliary numba parallelism."""
    cap = os.environ.get("CATPRESS_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        return
    try:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ValueError:
        pass


_configure_threads()


@njit(**_JIT)
def conv_fwd_oc(x, w, b, out, stride):
    """x (n,h,w,ci), w (kh,kw,ci,co), out (n,ho,wo,co); inner loop over co."""
    n, _, _, ci = x.shape
    kh, kw, _, co = w.shape
    _, ho, wo, _ = out.shape
    for nn in range(n):
        for i in range(ho):
            for j in range(wo):
                orow = out[nn, i, j]
                for o in range(co):
                    orow[o] = b[o]
                for u in range(kh):
                    xr = x[nn, i * stride + u]
                    for v in range(kw):
                        xrow = xr[j * stride + v]
                        for c in range(ci):
                            xv = xrow[c]
                            wrow = w[u, v, c]
                            for o in range(co):
                                orow[o] += xv * wrow[o]


@njit(**_JIT)
def conv_fwd_ci(x, w, b, out, stride):
    """Same contract, w (kh,kw,co,ci); inner dot over ci."""
    n, _, _, ci = x.shape
    kh, kw, co, _ = w.shape
    _, ho, wo, _ = out.shape
    for nn in range(n):
        for i in range(ho):
            for j in range(wo):
                orow = out[nn, i, j]
                for o in range(co):
                    acc = b[o]
                    for u in range(kh):
                        xr = x[nn, i * stride + u]
                        for v in range(kw):
                            xrow = xr[j * stride + v]
                            wrow = w[u, v, o]
                            for c in range(ci):
                                acc += xrow[c] * wrow[c]
                    orow[o] = acc


@njit(**_JIT)
def conv_bwd_x_oc(g, w, dx, stride):
    """g (n,ho,wo,co), w (kh,kw,ci,co); accumulate into dx (n,h,w,ci).

    Inner dot over co; profitable when co >= ci.
    """
    n, ho, wo, co = g.shape
    kh, kw, ci, _ = w.shape
    for nn in range(n):
        for i in range(ho):
            for j in range(wo):
                grow = g[nn, i, j]
                for u in range(kh):
                    dxr = dx[nn, i * stride + u]
                    for v in range(kw):
                        dxrow = dxr[j * stride + v]
                        for c in range(ci):
                            wrow = w[u, v, c]
                            acc = dxrow[c]
                            for o in range(co):
                                acc += grow[o] * wrow[o]
                            dxrow[c] = acc


@njit(**_JIT)
def conv_bwd_x_ci(g, w, dx, stride):
    """Same contract with w (kh,kw,co,ci); inner loop over ci."""
    n, ho, wo, co = g.shape
    kh, kw, _, ci = w.shape
    for nn in range(n):
        for i in range(ho):
            for j in range(wo):
                grow = g[nn, i, j]
                for u in range(kh):
                    dxr = dx[nn, i * stride + u]
                    for v in range(kw):
                        dxrow = dxr[j * stride + v]
                        for o in range(co):
                            gv = grow[o]
                            wrow = w[u, v, o]
                            for c in range(ci):
                                dxrow[c] += gv * wrow[c]


@njit(**_JIT)
def conv_bwd_w_oc(g, x, dw, db, stride):
    """dw (kh,kw,ci,co) and db (co,) from g (n,ho,wo,co), x (n,h,w,ci)."""
    n, ho, wo, co = g.shape
    kh, kw, ci, _ = dw.shape
    for nn in range(n):
        for i in range(ho):
            for j in range(wo):
                grow = g[nn, i, j]
                for o in range(co):
                    db[o] += grow[o]
                for u in range(kh):
                    xr = x[nn, i * stride + u]
                    for v in range(kw):
                        xrow = xr[j * stride + v]
                        for c in range(ci):
                            xv = xrow[c]
                            dwrow = dw[u, v, c]
                            for o in range(co):
                                dwrow[o] += xv * grow[o]


@njit(**_JIT)
def conv_bwd_w_ci(g, x, dw, db, stride):
    """Variant accumulating dw (kh,kw,co,ci); inner loop over ci."""
    n, ho, wo, co = g.shape
    kh, kw, _, ci = dw.shape
    for nn in range(n):
        for i in range(ho):
            for j in range(wo):
                grow = g[nn, i, j]
                for o in range(co):
                    db[o] += grow[o]
                for u in range(kh):
                    xr = x[nn, i * stride + u]
                    for v in range(kw):
                        xrow = xr[j * stride + v]
                        for o in range(co):
                            gv = grow[o]
                            dwrow = dw[u, v, o]
                            for c in range(ci):
                                dwrow[c] += gv * xrow[c]


@njit(**_JIT)
def dwconv_fwd(x, w, b, out):
    """Per-channel conv, stride 1: x (n,h,w,c), w (kh,kw,c), out (n,ho,wo,c)."""
    n, _, _, c = x.shape
    kh, kw, _ = w.shape
    _, ho, wo, _ = out.shape
    for nn in range(n):
        for i in range(ho):
            for j in range(wo):
                orow = out[nn, i, j]
                for cc in range(c):
                    orow[cc] = b[cc]
                for u in range(kh):
                    xr = x[nn, i + u]
                    for v in range(kw):
                        xrow = xr[j + v]
                        wrow = w[u, v]
                        for cc in range(c):
                            orow[cc] += xrow[cc] * wrow[cc]


@njit(**_JIT)
def dwconv_bwd_x(g, w, dx):
    n, ho, wo, c = g.shape
    kh, kw, _ = w.shape
    for nn in range(n):
        for i in range(ho):
            for j in range(wo):
                grow = g[nn, i, j]
                for u in range(kh):
                    dxr = dx[nn, i + u]
                    for v in range(kw):
                        dxrow = dxr[j + v]
                        wrow = w[u, v]
                        for cc in range(c):
                            dxrow[cc] += grow[cc] * wrow[cc]


@njit(**_JIT)
def dwconv_bwd_w(g, x, dw, db):
    n, ho, wo, c = g.shape
    kh, kw, _ = dw.shape
    for nn in range(n):
        for i in range(ho):
            for j in range(wo):
                grow = g[nn, i, j]
                for cc in range(c):
                    db[cc] += grow[cc]
                for u in range(kh):
                    xr = x[nn, i + u]
                    for v in range(kw):
                        xrow = xr[j + v]
                        dwrow = dw[u, v]
                        for cc in range(c):
                            dwrow[cc] += xrow[cc] * grow[cc]


@njit(**_JIT)
def inorm_fwd(x2, gamma, beta, out2, xhat2, inv_std2, eps):
    """Instance norm over flattened spatial rows: x2 is (n, c, h*w).

    Statistics accumulate in float64 regardless of storage dtype; the
    standardized activations and 1/std are saved for the backward pass.
    """
    n, c, hw = x2.shape
    for i in range(n):
        for j in range(c):
            row = x2[i, j]
            s = 0.0
            for k in range(hw):
                s += row[k]
            mean = s / hw
            v = 0.0
            for k in range(hw):
                d = row[k] - mean
                v += d * d
            inv = 1.0 / np.sqrt(v / hw + eps)
            inv_std2[i, j] = inv
            gm = gamma[j]
            bt = beta[j]
            orow = out2[i, j]
            hrow = xhat2[i, j]
            for k in range(hw):
                xh = (row[k] - mean) * inv
                hrow[k] = xh
                orow[k] = gm * xh + bt


@njit(**_JIT)
def inorm_bwd(g2, xhat2, inv_std2, gamma, dgamma, dbeta, dx2, want_dx):
    """Backward companion of inorm_fwd; dgamma/dbeta are float64 buffers."""
    n, c, hw = g2.shape
    for i in range(n):
        for j in range(c):
            grow = g2[i, j]
            hrow = xhat2[i, j]
            sg = 0.0
            sgx = 0.0
            for k in range(hw):
                sg += grow[k]
                sgx += grow[k] * hrow[k]
            dgamma[j] += sgx
            dbeta[j] += sg
            if want_dx:
                gm = gamma[j] * inv_std2[i, j]
                mg = sg / hw
                mgx = sgx / hw
                drow = dx2[i, j]
                for k in range(hw):
                    drow[k] += gm * (grow[k] - mg - hrow[k] * mgx)
