"""Hot numeric kernels.

Set ``CDORATE_NUMBA=0`` in the environment to run everything on the plain
numpy path; by default the kernels are compiled with numba when it is
importable.  The grid scan and the codebook encoder have separate loop
(numba) and vectorized (numpy) implementations, both always importable so
they can be cross-checked and benchmarked.  The Lagrangian inner solver is
one source that is either jitted or run as ordinary numpy code.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _flag_enabled() -> bool:
    return os.environ.get("CDORATE_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _flag_enabled()

LN2 = float(np.log(2.0))
CMIN = 1e-100  # floor on channel entries; keeps 1/c and p**-1.5 finite


def maybe_njit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def _always_njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


# --------------------------------------------------------------------------
# Lagrangian inner solver: minimize I(V;Y) + lam * d(pxv @ c) over
# row-stochastic c.  kind: 0 = BW, 1 = ID, 2 = expected letter.
# --------------------------------------------------------------------------


@maybe_njit
def mi_bits(pv, c):
    q = np.dot(pv, c)
    t = pv.reshape(-1, 1) * c * np.log(c / q.reshape(1, -1))
    return max(t.sum() / LN2, 0.0)


@maybe_njit
def dist_value(kind, pxy, pxz, w, letter):
    if kind == 0:
        s = np.sqrt(pxz * pxy).sum()
        return max(1.0 - s * s, 0.0)
    if kind == 1:
        r = pxy.sum(axis=1).reshape(-1, 1) * w
        if np.any((r > 0) & (pxy <= 0)):
            return np.inf
        rr = np.where(r > 0, r, 1.0)
        pp = np.where(pxy > 0, pxy, 1.0)
        return max(np.where(r > 0, r * np.log(rr / pp), 0.0).sum() / LN2, 0.0)
    return (pxy * letter).sum()


@maybe_njit
def dist_grad(kind, pxy, pxz, w, letter):
    if kind == 0:
        s = np.sqrt(pxz * pxy).sum()
        pp = np.where(pxy > 0, pxy, 1.0)
        return -s * np.sqrt(pxz / pp)
    if kind == 1:
        m = pxy.sum(axis=1)
        mm = np.where(m > 0, m, 1.0)
        pp = np.where(pxy > 0, pxy, 1.0)
        ww = np.where(w > 0, w, 1.0)
        wlogw = (w * np.log(ww)).sum(axis=1)
        wlogp = (w * np.log(pp)).sum(axis=1)
        g = (np.log(mm) + 1.0 + wlogw - wlogp).reshape(-1, 1) - mm.reshape(-1, 1) * w / pp
        return np.where(m.reshape(-1, 1) > 0, g, 0.0) / LN2
    return letter.copy()


@maybe_njit
def dist_hess(kind, pxy, pxz, w, letter):
    """Hessian of the distortion in the flattened (row-major) pxy entries."""
    mx, ny = pxy.shape
    n = mx * ny
    h = np.zeros((n, n))
    if kind == 0:
        s = np.sqrt(pxz * pxy).sum()
        pp = np.where(pxy > 0, pxy, 1.0).ravel()
        ref = pxz.ravel()
        a = np.sqrt(ref / pp)
        h = -0.5 * np.outer(a, a)
        for i in range(n):
            h[i, i] += 0.5 * s * np.sqrt(ref[i]) / (pp[i] * np.sqrt(pp[i]))
        return h
    if kind == 1:
        m = pxy.sum(axis=1)
        for x in range(mx):
            if m[x] <= 0:
                continue
            for j in range(ny):
                pj = pxy[x, j] if pxy[x, j] > 0 else 1.0
                for k in range(ny):
                    pk = pxy[x, k] if pxy[x, k] > 0 else 1.0
                    v = 1.0 / m[x] - w[x, k] / pk - w[x, j] / pj
                    if j == k:
                        v += m[x] * w[x, j] / (pj * pj)
                    h[x * ny + j, x * ny + k] = v / LN2
    return h


@maybe_njit
def lagrangian_value(kind, pv, pxv, pxz, w, letter, lam, c):
    f = mi_bits(pv, c)
    if lam > 0:
        f += lam * dist_value(kind, np.dot(pxv, c), pxz, w, letter)
    return f


@maybe_njit
def _normalize_rows(c, active, fallback):
    out = c.copy()
    for v in range(c.shape[0]):
        if not active[v]:
            out[v] = fallback[v]
            continue
        row = np.maximum(c[v], CMIN)
        out[v] = row / row.sum()
        out[v] = np.maximum(out[v], CMIN)
        out[v] = out[v] / out[v].sum()
    return out


@maybe_njit
def _newton_direction(kind, pv, pxv, pxz, w, letter, lam, c, active):
    nv, ny = c.shape
    n = nv * ny
    q = np.dot(pv, c)
    pxy = np.dot(pxv, c)
    g = (pv.reshape(-1, 1) * np.log(c / q.reshape(1, -1)) / LN2).ravel()
    h = np.zeros((n, n))
    for v in range(nv):
        for y in range(ny):
            h[v * ny + y, v * ny + y] += pv[v] / c[v, y] / LN2
    for v in range(nv):
        for u in range(nv):
            for y in range(ny):
                h[v * ny + y, u * ny + y] -= pv[v] * pv[u] / q[y] / LN2
    if lam > 0:
        gp = dist_grad(kind, pxy, pxz, w, letter)
        g += lam * np.dot(pxv.T, gp).ravel()
        if kind != 2:
            k = np.kron(pxv, np.eye(ny))
            h += lam * np.dot(k.T, np.dot(dist_hess(kind, pxy, pxz, w, letter), k))
    for v in range(nv):
        if not active[v]:
            for y in range(ny):
                g[v * ny + y] = 0.0
    scale = 1.0
    for i in range(n):
        scale = max(scale, abs(h[i, i]))
    kkt = np.zeros((n + nv, n + nv))
    kkt[:n, :n] = h
    for i in range(n):
        kkt[i, i] += 1e-13 * scale
    for v in range(nv):
        for y in range(ny):
            kkt[n + v, v * ny + y] = 1.0
            kkt[v * ny + y, n + v] = 1.0
    rhs = np.zeros(n + nv)
    rhs[:n] = -g
    sol = np.linalg.solve(kkt, rhs)
    # project onto zero-row-sum directions; the solve leaves rounding residue
    step = sol[:n].reshape(nv, ny).copy()
    gm = g.reshape(nv, ny).copy()
    for v in range(nv):
        if active[v]:
            step[v] -= step[v].mean()
            gm[v] -= gm[v].mean()
        else:
            step[v] = 0.0
            gm[v] = 0.0
    return step, -(gm * step).sum()


@maybe_njit
def lagrangian_kernel(kind, pv, pxv, pxz, w, letter, lam, c0,
                      max_iters, obj_tol, eta0, mult_iters, trace):
    """Damped multiplicative updates, then equality-constrained Newton.

    Returns (channel, objective, iterations, converged, trace_length).
    ``trace`` receives the objective after every accepted step; it never
    increases.
    """
    nv, ny = c0.shape
    active = pv > 0
    pvs = np.where(active, pv, 1.0)
    c = _normalize_rows(c0, active, c0)
    f = lagrangian_value(kind, pv, pxv, pxz, w, letter, lam, c)
    trace[0] = f
    nt = 1
    it = 0
    switch_tol = max(obj_tol, 1e-7)
    while it < mult_iters and it < max_iters:
        it += 1
        q = np.dot(pv, c)
        gc = np.dot(pxv.T, dist_grad(kind, np.dot(pxv, c), pxz, w, letter))
        z = np.log(q).reshape(1, -1) - lam * LN2 * gc / pvs.reshape(-1, 1)
        for v in range(nv):
            z[v] -= z[v].max()
        target = _normalize_rows(np.exp(z), active, c)
        accepted = False
        fn = f
        cn = c
        eta = eta0
        while eta > 1e-12:
            cn = _normalize_rows((1.0 - eta) * c + eta * target, active, c)
            fn = lagrangian_value(kind, pv, pxv, pxz, w, letter, lam, cn)
            if fn < f:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        df = f - fn
        c = cn
        f = fn
        if nt < trace.size:
            trace[nt] = f
            nt += 1
        if df < switch_tol:
            break

    converged = False
    while it < max_iters:
        it += 1
        step, dec = _newton_direction(kind, pv, pxv, pxz, w, letter, lam, c, active)
        if not np.all(np.isfinite(step)):
            break
        if dec <= 1e-22:
            converged = True
            break
        t = 1.0
        for v in range(nv):
            for y in range(ny):
                if step[v, y] < 0:
                    t = min(t, -0.99 * c[v, y] / step[v, y])
        accepted = False
        fn = f
        cn = c
        while t > 1e-14:
            cn = _normalize_rows(c + t * step, active, c)
            fn = lagrangian_value(kind, pv, pxv, pxz, w, letter, lam, cn)
            if fn < f and fn <= f - 1e-4 * t * dec:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # remaining decrease is below what F can resolve
            converged = dec < max(2.0 * obj_tol, 1e-12)
            break
        df = f - fn
        c = cn
        f = fn
        if nt < trace.size:
            trace[nt] = f
            nt += 1
        if df < obj_tol and dec < 1e-12:
            converged = True
            break
    return c, f, it, converged, nt


# --------------------------------------------------------------------------
# Brute-force grid scan over binary-output channels (|V| <= 2, |Y| = 2).
# --------------------------------------------------------------------------


def _scan_grid_loops(kind, pv, pxv, pxz, w, letter, limit, n):
    nv = pv.size
    mx = pxv.shape[0]
    best = np.inf
    best_a = -1
    best_b = -1
    nb = n if nv == 2 else 1
    for ia in range(n):
        a = ia / (n - 1)
        for ib in range(nb):
            b = ib / (n - 1) if nv == 2 else 0.0
            p1 = pv[1] if nv == 2 else 0.0
            q0 = pv[0] * a + p1 * b
            q1 = pv[0] * (1.0 - a) + p1 * (1.0 - b)
            info = 0.0
            if pv[0] > 0:
                if a > 0:
                    info += pv[0] * a * np.log(a / q0)
                if a < 1:
                    info += pv[0] * (1.0 - a) * np.log((1.0 - a) / q1)
            if p1 > 0:
                if b > 0:
                    info += p1 * b * np.log(b / q0)
                if b < 1:
                    info += p1 * (1.0 - b) * np.log((1.0 - b) / q1)
            info = max(info / LN2, 0.0)
            if info >= best:
                continue
            d = 0.0
            if kind == 0:
                s = 0.0
                for x in range(mx):
                    u1 = pxv[x, 1] if nv == 2 else 0.0
                    y0 = pxv[x, 0] * a + u1 * b
                    y1 = pxv[x, 0] * (1.0 - a) + u1 * (1.0 - b)
                    s += np.sqrt(pxz[x, 0] * y0) + np.sqrt(pxz[x, 1] * y1)
                d = max(1.0 - s * s, 0.0)
            elif kind == 1:
                for x in range(mx):
                    u1 = pxv[x, 1] if nv == 2 else 0.0
                    y0 = pxv[x, 0] * a + u1 * b
                    y1 = pxv[x, 0] * (1.0 - a) + u1 * (1.0 - b)
                    m = y0 + y1
                    r0 = m * w[x, 0]
                    r1 = m * w[x, 1]
                    if r0 > 0:
                        d = d + r0 * np.log(r0 / y0) if y0 > 0 else np.inf
                    if r1 > 0:
                        d = d + r1 * np.log(r1 / y1) if y1 > 0 else np.inf
                d = max(d / LN2, 0.0)
            else:
                for x in range(mx):
                    u1 = pxv[x, 1] if nv == 2 else 0.0
                    y0 = pxv[x, 0] * a + u1 * b
                    y1 = pxv[x, 0] * (1.0 - a) + u1 * (1.0 - b)
                    d += y0 * letter[x, 0] + y1 * letter[x, 1]
            if d <= limit:
                best = info
                best_a = ia
                best_b = ib
    return best, best_a, best_b


scan_grid_numba = _always_njit(_scan_grid_loops)


def _xlogx_ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(num > 0, num * np.log(num / den), 0.0)


def scan_grid_numpy(kind, pv, pxv, pxz, w, letter, limit, n):
    """Vectorized twin of the loop scan: one numpy pass per first-row value."""
    nv = pv.size
    grid = np.arange(n) / (n - 1)
    b = grid if nv == 2 else np.zeros(1)
    p1 = pv[1] if nv == 2 else 0.0
    u1 = pxv[:, 1:2] if nv == 2 else np.zeros((pxv.shape[0], 1))
    best, best_a, best_b = np.inf, -1, -1
    for ia in range(n):
        a = grid[ia]
        q0 = pv[0] * a + p1 * b
        q1 = pv[0] * (1.0 - a) + p1 * (1.0 - b)
        info = np.zeros_like(b)
        if pv[0] > 0:
            info = info + pv[0] * (_xlogx_ratio(a, q0) + _xlogx_ratio(1.0 - a, q1))
        if p1 > 0:
            info = info + p1 * (_xlogx_ratio(b, q0) + _xlogx_ratio(1.0 - b, q1))
        info = np.maximum(info / LN2, 0.0)
        y0 = pxv[:, 0:1] * a + u1 * b  # (M, nb)
        y1 = pxv[:, 0:1] * (1.0 - a) + u1 * (1.0 - b)
        if kind == 0:
            s = (np.sqrt(pxz[:, 0:1] * y0) + np.sqrt(pxz[:, 1:2] * y1)).sum(axis=0)
            d = np.maximum(1.0 - s * s, 0.0)
        elif kind == 1:
            m = y0 + y1
            r0 = m * w[:, 0:1]
            r1 = m * w[:, 1:2]
            bad = ((r0 > 0) & (y0 <= 0)) | ((r1 > 0) & (y1 <= 0))
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(r0 > 0, r0 * np.log(r0 / y0), 0.0) + np.where(
                    r1 > 0, r1 * np.log(r1 / y1), 0.0
                )
            d = np.where(bad.any(axis=0), np.inf, np.maximum(t.sum(axis=0) / LN2, 0.0))
        else:
            d = (y0 * letter[:, 0:1] + y1 * letter[:, 1:2]).sum(axis=0)
        ok = np.flatnonzero((d <= limit) & (info < best))
        if ok.size:
            j = ok[np.argmin(info[ok])]
            best, best_a, best_b = float(info[j]), ia, int(j) if nv == 2 else 0
    return best, best_a, best_b


# --------------------------------------------------------------------------
# Codebook encoder: index of the word whose empirical joint with v is
# closest (max-abs deviation) to the target; ties go to the lowest index.
# --------------------------------------------------------------------------


def _encode_loops(v, words, target):
    k_words, length = words.shape
    nv, ny = target.shape
    best = np.inf
    best_k = 0
    counts = np.zeros((nv, ny))
    for k in range(k_words):
        counts[:, :] = 0.0
        for i in range(length):
            counts[v[i], words[k, i]] += 1.0
        dev = 0.0
        for a in range(nv):
            for b in range(ny):
                e = abs(counts[a, b] / length - target[a, b])
                if e > dev:
                    dev = e
        if dev < best:
            best = dev
            best_k = k
    return best_k, best


encode_numba = _always_njit(_encode_loops)


def encode_numpy(v, words, target):
    nv, ny = target.shape
    length = words.shape[1]
    codes = v[None, :] * ny + words
    dev = np.zeros(words.shape[0])
    for cell in range(nv * ny):
        frac = (codes == cell).sum(axis=1) / length
        dev = np.maximum(dev, np.abs(frac - target.flat[cell]))
    k = int(np.argmin(dev))
    return k, float(dev[k])


scan_grid = scan_grid_numba if USE_NUMBA else scan_grid_numpy
encode_argmin = encode_numba if USE_NUMBA else encode_numpy
