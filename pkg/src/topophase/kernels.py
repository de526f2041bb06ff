"""Hot numerical kernels.

Every kernel has two implementations with identical signatures: a numba
``@njit`` loop version (``*_nb``) and a vectorised numpy version
(``*_np``).  The public name is bound to one of them at import time
according to :data:`topophase._accel.USE_NUMBA`; both stay importable so
tests and ``benchmarks/bench_kernels.py`` can compare them directly.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

TWO_PI = 2.0 * np.pi

# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15).
# Kronrod nodes in decreasing order; the Gauss nodes are xgk[1::2].
XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point node/weight vectors, used by the numpy path
NODES15 = np.concatenate([-XGK[:-1], XGK[::-1]])
WK15 = np.concatenate([WGK[:-1], WGK[::-1]])
WG15 = np.zeros(15)
WG15[1:7:2] = WG[:3]
WG15[7] = WG[3]
WG15[9:14:2] = WG[2::-1]

MAX_DEPTH = 60


# --------------------------------------------------------------------------
# planar Coulomb kernel: E(p) = sum_i q_i (p - r_i) / (2 pi |p - r_i|^2)

@njit
def coulomb_field_nb(points, src, q):
    n = points.shape[0]
    out = np.zeros((n, 2))
    for i in range(n):
        ex = 0.0
        ey = 0.0
        for k in range(src.shape[0]):
            dx = points[i, 0] - src[k, 0]
            dy = points[i, 1] - src[k, 1]
            w = q[k] / (TWO_PI * (dx * dx + dy * dy))
            ex += w * dx
            ey += w * dy
        out[i, 0] = ex
        out[i, 1] = ey
    return out


def coulomb_field_np(points, src, q):
    if src.shape[0] == 0:
        return np.zeros((points.shape[0], 2))
    d = points[:, None, :] - src[None, :, :]
    w = q[None, :] / (TWO_PI * np.einsum("pki,pki->pk", d, d))
    return np.einsum("pk,pki->pi", w, d)


# --------------------------------------------------------------------------
# adaptive Gauss-Kronrod line integral of (E2, -E1) . dr over straight segments

@njit
def _gk15_segment(ax, ay, dx, dy, t0, t1, src, q):
    half = 0.5 * (t1 - t0)
    mid = 0.5 * (t1 + t0)
    resk = 0.0
    resg = 0.0
    for j in range(15):
        if j < 7:
            x = -XGK[j]
            wk = WGK[j]
        else:
            x = XGK[14 - j]
            wk = WGK[14 - j]
        t = mid + half * x
        px = ax + t * dx
        py = ay + t * dy
        ex = 0.0
        ey = 0.0
        for k in range(src.shape[0]):
            rx = px - src[k, 0]
            ry = py - src[k, 1]
            w = q[k] / (TWO_PI * (rx * rx + ry * ry))
            ex += w * rx
            ey += w * ry
        f = ey * dx - ex * dy
        resk += wk * f
        # Gauss nodes sit at odd Kronrod positions (j == 7 is the centre)
        if j % 2 == 1:
            if j < 7:
                resg += WG[(j - 1) // 2] * f
            else:
                resg += WG[(13 - j) // 2] * f
    return resk * half, resg * half


@njit
def segment_integrals_nb(a, b, src, q, tol_density, max_intervals):
    nseg = a.shape[0]
    vals = np.zeros(nseg)
    errs = np.zeros(nseg)
    converged = True
    lo = np.empty(MAX_DEPTH + 2)
    hi = np.empty(MAX_DEPTH + 2)
    depth = np.empty(MAX_DEPTH + 2, dtype=np.int64)
    used = 0
    for s in range(nseg):
        ax = a[s, 0]
        ay = a[s, 1]
        dx = b[s, 0] - ax
        dy = b[s, 1] - ay
        seg_len = np.sqrt(dx * dx + dy * dy)
        top = 0
        lo[0] = 0.0
        hi[0] = 1.0
        depth[0] = 0
        while top >= 0:
            t0 = lo[top]
            t1 = hi[top]
            d = depth[top]
            top -= 1
            used += 1
            k, g = _gk15_segment(ax, ay, dx, dy, t0, t1, src, q)
            err = abs(k - g)
            allowed = tol_density * seg_len * (t1 - t0)
            if err <= allowed or err <= 50.0 * 2.2e-16 * abs(k):
                vals[s] += k
                errs[s] += err
            elif d >= MAX_DEPTH or used >= max_intervals:
                vals[s] += k
                errs[s] += err
                converged = False
            else:
                tm = 0.5 * (t0 + t1)
                top += 1
                lo[top] = tm
                hi[top] = t1
                depth[top] = d + 1
                top += 1
                lo[top] = t0
                hi[top] = tm
                depth[top] = d + 1
    return vals, errs, converged


def segment_integrals_np(a, b, src, q, tol_density, max_intervals):
    nseg = a.shape[0]
    vals = np.zeros(nseg)
    errs = np.zeros(nseg)
    d = b - a
    seg_len = np.hypot(d[:, 0], d[:, 1])
    idx = np.arange(nseg)
    t0 = np.zeros(nseg)
    t1 = np.ones(nseg)
    level = np.zeros(nseg, dtype=np.int64)
    used = 0
    converged = True
    while idx.size:
        used += idx.size
        half = 0.5 * (t1 - t0)
        mid = 0.5 * (t1 + t0)
        t = mid[:, None] + half[:, None] * NODES15[None, :]
        pts = a[idx][:, None, :] + t[:, :, None] * d[idx][:, None, :]
        e = coulomb_field_np(pts.reshape(-1, 2), src, q).reshape(idx.size, 15, 2)
        f = e[:, :, 1] * d[idx, 0][:, None] - e[:, :, 0] * d[idx, 1][:, None]
        k = (f @ WK15) * half
        g = (f @ WG15) * half
        err = np.abs(k - g)
        allowed = tol_density * seg_len[idx] * (t1 - t0)
        done = (err <= allowed) | (err <= 50.0 * 2.2e-16 * np.abs(k))
        stuck = ~done & ((level >= MAX_DEPTH) | (used >= max_intervals))
        if stuck.any():
            converged = False
        take = done | stuck
        np.add.at(vals, idx[take], k[take])
        np.add.at(errs, idx[take], err[take])
        keep = ~take
        idx, t0, t1, mid, level = idx[keep], t0[keep], t1[keep], mid[keep], level[keep]
        idx = np.concatenate([idx, idx])
        t0, t1 = np.concatenate([t0, mid]), np.concatenate([mid, t1])
        level = np.concatenate([level, level]) + 1
    return vals, errs, converged


# --------------------------------------------------------------------------
# pointwise spinor mixing: out[b, i] = sum_terms v * coef[k] * psi[b, j]
# (sparse 4x4 matrices as (k, i, j, v) term lists)

@njit
def spinor_mix_nb(psi, coefs, tk, ti, tj, tv):
    nb, nc, ny, nx = psi.shape
    out = np.zeros_like(psi)
    nt = tk.shape[0]
    for bb in range(nb):
        for t in range(nt):
            i, j, k, v = ti[t], tj[t], tk[t], tv[t]
            for y in range(ny):
                for x in range(nx):
                    out[bb, i, y, x] += v * coefs[k, y, x] * psi[bb, j, y, x]
    return out


def spinor_mix_np(psi, coefs, tk, ti, tj, tv):
    out = np.zeros_like(psi)
    for k, i, j, v in zip(tk, ti, tj, tv):
        out[:, i] += (v * coefs[k]) * psi[:, j]
    return out


if USE_NUMBA:
    coulomb_field = coulomb_field_nb
    segment_integrals = segment_integrals_nb
    spinor_mix = spinor_mix_nb
else:
    coulomb_field = coulomb_field_np
    segment_integrals = segment_integrals_np
    spinor_mix = spinor_mix_np


def sparse_terms(mats, tol=0.0):
    """Flatten a stack of 4x4 matrices into (k, i, j, value) term arrays."""
    mats = np.asarray(mats, dtype=complex)
    k, i, j = np.nonzero(np.abs(mats) > tol)
    return (k.astype(np.int64), i.astype(np.int64), j.astype(np.int64),
            mats[k, i, j].astype(complex))
