"""Hot numeric kernels: numba-compiled with a pure-numpy fallback lane.

Lane selection: numba is used when importable unless the environment variable
``ACFLOW_NUMBA`` is set to ``0``/``false``/``off``.  Both lanes implement the
same node-level semantics; results agree to floating-point roundoff but are
not bitwise identical across lanes (summation order differs).

Kernels take the *clamped* neighbor table: a missing lattice neighbor points
back at the node itself, so its difference term vanishes.  This realizes the
Neumann mirror (ghost value = center value) branch-free, and makes the stencil
the exact negative gradient of the forward-difference Dirichlet energy.
"""
from __future__ import annotations

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("ACFLOW_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


_HAVE_NUMBA = False
if _numba_requested():
    try:
        import numba
        from numba import njit, prange
        # workqueue: always available, static chunking, run-to-run deterministic
        numba.config.THREADING_LAYER = "workqueue"
        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _HAVE_NUMBA = False


def active_lane() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"


# reassociation + FMA only; keep NaN/inf semantics for the blowup detector
_FASTMATH = {"contract", "reassoc", "arcp"}


# ----------------------------------------------------------------------------
# numpy lane
# ----------------------------------------------------------------------------

def laplacian_np(values, nbc, inv_h2):
    return (values[nbc] - values[:, None, :]).sum(axis=1) * inv_h2


def _power_table(values, emax):
    """(emax+1, N, n) array of integer powers via cumulative products."""
    pw = np.empty((emax + 1,) + values.shape)
    pw[0] = 1.0
    for e in range(1, emax + 1):
        pw[e] = pw[e - 1] * values
    return pw


def poly_eval_np(values, exps, coeffs):
    pw = _power_table(values, int(exps.max()) if exps.size else 0)
    n = values.shape[1]
    out = np.zeros(values.shape[0])
    for e, c in zip(exps, coeffs):
        term = np.full(values.shape[0], c)
        for d in range(n):
            if e[d]:
                term = term * pw[e[d], :, d]
        out += term
    return out


def poly_grad_np(values, exps, coeffs):
    pw = _power_table(values, int(exps.max()) if exps.size else 0)
    n = values.shape[1]
    out = np.zeros_like(values)
    for e, c in zip(exps, coeffs):
        for d in range(n):
            if e[d] == 0:
                continue
            term = np.full(values.shape[0], c * e[d])
            for d2 in range(n):
                p = e[d2] - (1 if d2 == d else 0)
                if p:
                    term = term * pw[p, :, d2]
            out[:, d] += term
    return out


def poly_hess_np(values, exps, coeffs):
    n = values.shape[1]
    out = np.zeros((values.shape[0], n, n))
    for e, c in zip(exps, coeffs):
        for d1 in range(n):
            for d2 in range(n):
                if d2 == d1:
                    if e[d1] < 2:
                        continue
                    ed = e.copy()
                    ed[d1] -= 2
                    out[:, d1, d1] += c * e[d1] * (e[d1] - 1) * np.prod(values ** ed, axis=1)
                else:
                    if e[d1] == 0 or e[d2] == 0:
                        continue
                    ed = e.copy()
                    ed[d1] -= 1
                    ed[d2] -= 1
                    out[:, d1, d2] += c * e[d1] * e[d2] * np.prod(values ** ed, axis=1)
    return out


def energy_parts_np(values, nbc, exps, coeffs, inv_h2):
    """Per-node energy density partials (forward edges + nodal potential)."""
    parts = poly_eval_np(values, exps, coeffs)
    ndirs = nbc.shape[1] // 2
    for d in range(ndirs):
        diff = values[nbc[:, 2 * d]] - values
        parts += 0.5 * inv_h2 * (diff * diff).sum(axis=1)
    return parts


def flow_step_np(values, nbc, exps, coeffs, dt, inv_h2, clamp_m):
    parts = energy_parts_np(values, nbc, exps, coeffs, inv_h2)
    lap = (values[nbc] - values[:, None, :]).sum(axis=1) * inv_h2
    new = values + dt * (lap - poly_grad_np(values, exps, coeffs))
    norms = np.linalg.norm(new, axis=1)
    max_norm = float(norms.max()) if norms.size else 0.0
    if clamp_m > 0.0:
        over = norms > clamp_m
        if np.any(over):
            new[over] *= (clamp_m / norms[over])[:, None]
    return new, max_norm, parts


def residual_inf_np(values, nbc, exps, coeffs, inv_h2):
    lap = (values[nbc] - values[:, None, :]).sum(axis=1) * inv_h2
    r = lap - poly_grad_np(values, exps, coeffs)
    return float(np.linalg.norm(r, axis=1).max())


def interp_np(values, points, idmap, box_shape, lo, h):
    """Multilinear interpolation with weight renormalization over present nodes."""
    npts, n = points.shape
    m = values.shape[1]
    t = points / h - lo
    c = np.floor(t).astype(np.int64)
    c = np.clip(c, 0, np.asarray(box_shape) - 2)
    frac = t - c
    out = np.zeros((npts, m))
    wsum = np.zeros(npts)
    strides = np.ones(n, dtype=np.int64)
    for d in range(n - 2, -1, -1):
        strides[d] = strides[d + 1] * box_shape[d + 1]
    for corner in range(1 << n):
        offs = np.array([(corner >> d) & 1 for d in range(n)], dtype=np.int64)
        flat = ((c + offs) * strides).sum(axis=1)
        ids = idmap[flat]
        w = np.prod(np.where(offs == 1, frac, 1.0 - frac), axis=1)
        ok = ids >= 0
        wsum += np.where(ok, w, 0.0)
        out[ok] += w[ok, None] * values[ids[ok]]
    wsum = np.where(wsum <= 0.0, 1.0, wsum)
    return out / wsum[:, None]


# ----------------------------------------------------------------------------
# numba lane
# ----------------------------------------------------------------------------

if _HAVE_NUMBA:

    _NT = numba.config.NUMBA_NUM_THREADS

    @njit(cache=True, inline="always")
    def _poly_w(u, exps, coeffs):
        acc = 0.0
        for k in range(coeffs.shape[0]):
            p = coeffs[k]
            for d in range(u.shape[0]):
                x = u[d]
                for _ in range(exps[k, d]):
                    p *= x
            acc += p
        return acc

    @njit(cache=True, inline="always")
    def _poly_g_comp(u, exps, coeffs, d):
        acc = 0.0
        for k in range(coeffs.shape[0]):
            ed = exps[k, d]
            if ed == 0:
                continue
            p = coeffs[k] * ed
            for d2 in range(u.shape[0]):
                e2 = exps[k, d2]
                if d2 == d:
                    e2 -= 1
                x = u[d2]
                for _ in range(e2):
                    p *= x
            acc += p
        return acc

    @njit(cache=True)
    def laplacian_nb(values, nbc, inv_h2):
        nnodes, m = values.shape
        ncols = nbc.shape[1]
        out = np.empty_like(values)
        for i in range(nnodes):
            for d in range(m):
                acc = 0.0
                for col in range(ncols):
                    acc += values[nbc[i, col], d] - values[i, d]
                out[i, d] = acc * inv_h2
        return out

    @njit(cache=True, parallel=True, fastmath=_FASTMATH)
    def _step2d_nb(values, nbc, exps, coeffs, dt, inv_h2, clamp_m, emax):
        nnodes = values.shape[0]
        nterms = coeffs.shape[0]
        new = np.empty_like(values)
        maxes = np.zeros(nnodes)
        parts = np.empty(nnodes)
        scratch = np.empty((_NT, 2, 32))    # padded rows: no false sharing
        for i in prange(nnodes):
            tid = numba.get_thread_id()
            pu = scratch[tid, 0]
            pv = scratch[tid, 1]
            u = values[i, 0]
            v = values[i, 1]
            pu[0] = 1.0
            pv[0] = 1.0
            for e in range(1, emax + 1):
                pu[e] = pu[e - 1] * u
                pv[e] = pv[e - 1] * v
            w = 0.0
            gu = 0.0
            gv = 0.0
            for k in range(nterms):
                c = coeffs[k]
                e0 = exps[k, 0]
                e1 = exps[k, 1]
                w += c * pu[e0] * pv[e1]
                if e0 > 0:
                    gu += c * e0 * pu[e0 - 1] * pv[e1]
                if e1 > 0:
                    gv += c * e1 * pu[e0] * pv[e1 - 1]
            acc0 = 0.0
            acc1 = 0.0
            edge = 0.0
            for dd in range(2):
                jf = nbc[i, 2 * dd]
                jb = nbc[i, 2 * dd + 1]
                d0 = values[jf, 0] - u
                d1 = values[jf, 1] - v
                acc0 += d0 + (values[jb, 0] - u)
                acc1 += d1 + (values[jb, 1] - v)
                edge += 0.5 * inv_h2 * (d0 * d0 + d1 * d1)
            nv0 = u + dt * (acc0 * inv_h2 - gu)
            nv1 = v + dt * (acc1 * inv_h2 - gv)
            parts[i] = edge + w
            nrm = np.sqrt(nv0 * nv0 + nv1 * nv1)
            maxes[i] = nrm
            if clamp_m > 0.0 and nrm > clamp_m:
                s = clamp_m / nrm
                nv0 *= s
                nv1 *= s
            new[i, 0] = nv0
            new[i, 1] = nv1
        max_norm = 0.0
        for i in range(nnodes):
            if maxes[i] > max_norm:
                max_norm = maxes[i]
        return new, max_norm, parts

    @njit(cache=True, parallel=True)
    def _step_generic_nb(values, nbc, exps, coeffs, dt, inv_h2, clamp_m):
        nnodes, m = values.shape
        ndirs = nbc.shape[1] // 2
        new = np.empty_like(values)
        maxes = np.zeros(nnodes)
        parts = np.empty(nnodes)
        for i in prange(nnodes):
            edge = 0.0
            nrm2 = 0.0
            for d in range(m):
                cen = values[i, d]
                acc = 0.0
                for dd in range(ndirs):
                    diff = values[nbc[i, 2 * dd], d] - cen
                    acc += diff + (values[nbc[i, 2 * dd + 1], d] - cen)
                    edge += 0.5 * inv_h2 * diff * diff
                val = cen + dt * (acc * inv_h2 - _poly_g_comp(values[i], exps, coeffs, d))
                new[i, d] = val
                nrm2 += val * val
            parts[i] = edge + _poly_w(values[i], exps, coeffs)
            nrm = np.sqrt(nrm2)
            maxes[i] = nrm
            if clamp_m > 0.0 and nrm > clamp_m:
                s = clamp_m / nrm
                for d in range(m):
                    new[i, d] *= s
        max_norm = 0.0
        for i in range(nnodes):
            if maxes[i] > max_norm:
                max_norm = maxes[i]
        return new, max_norm, parts

    def flow_step_nb(values, nbc, exps, coeffs, dt, inv_h2, clamp_m):
        if values.shape[1] == 2:
            return _step2d_nb(values, nbc, exps, coeffs, dt, inv_h2, clamp_m,
                              int(exps.max()) if exps.size else 0)
        return _step_generic_nb(values, nbc, exps, coeffs, dt, inv_h2, clamp_m)

    @njit(cache=True, parallel=True)
    def residual_inf_nb(values, nbc, exps, coeffs, inv_h2):
        nnodes, m = values.shape
        ncols = nbc.shape[1]
        worst = np.zeros(nnodes)
        for i in prange(nnodes):
            nrm2 = 0.0
            for d in range(m):
                acc = 0.0
                for col in range(ncols):
                    acc += values[nbc[i, col], d] - values[i, d]
                r = acc * inv_h2 - _poly_g_comp(values[i], exps, coeffs, d)
                nrm2 += r * r
            worst[i] = nrm2
        out = 0.0
        for i in range(nnodes):
            if worst[i] > out:
                out = worst[i]
        return np.sqrt(out)

    @njit(cache=True)
    def energy_parts_nb(values, nbc, exps, coeffs, inv_h2):
        nnodes, m = values.shape
        ndirs = nbc.shape[1] // 2
        parts = np.empty(nnodes)
        for i in range(nnodes):
            edge = 0.0
            for d in range(m):
                for dd in range(ndirs):
                    diff = values[nbc[i, 2 * dd], d] - values[i, d]
                    edge += 0.5 * inv_h2 * diff * diff
            parts[i] = edge + _poly_w(values[i], exps, coeffs)
        return parts

    @njit(cache=True)
    def poly_eval_nb(values, exps, coeffs):
        out = np.empty(values.shape[0])
        for i in range(values.shape[0]):
            out[i] = _poly_w(values[i], exps, coeffs)
        return out

    @njit(cache=True)
    def poly_grad_nb(values, exps, coeffs):
        nnodes, m = values.shape
        out = np.empty_like(values)
        for i in range(nnodes):
            for d in range(m):
                out[i, d] = _poly_g_comp(values[i], exps, coeffs, d)
        return out

    @njit(cache=True, parallel=True)
    def interp_nb(values, points, idmap, box_shape, lo, h):
        npts, n = points.shape
        m = values.shape[1]
        out = np.zeros((npts, m))
        strides = np.ones(n, dtype=np.int64)
        for d in range(n - 2, -1, -1):
            strides[d] = strides[d + 1] * box_shape[d + 1]
        for p in prange(npts):
            cell = np.empty(n, dtype=np.int64)
            frac = np.empty(n)
            for d in range(n):
                t = points[p, d] / h - lo[d]
                c = int(np.floor(t))
                if c < 0:
                    c = 0
                if c > box_shape[d] - 2:
                    c = box_shape[d] - 2
                cell[d] = c
                frac[d] = t - c
            wsum = 0.0
            for corner in range(1 << n):
                flat = 0
                w = 1.0
                for d in range(n):
                    bit = (corner >> d) & 1
                    flat += (cell[d] + bit) * strides[d]
                    w *= frac[d] if bit == 1 else 1.0 - frac[d]
                node = idmap[flat]
                if node >= 0:
                    wsum += w
                    for comp in range(m):
                        out[p, comp] += w * values[node, comp]
            if wsum > 0.0:
                for comp in range(m):
                    out[p, comp] /= wsum
        return out


# ----------------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------------

if _HAVE_NUMBA:
    laplacian = laplacian_nb
    flow_step = flow_step_nb
    residual_inf = residual_inf_nb
    energy_parts = energy_parts_nb
    poly_eval = poly_eval_nb
    poly_grad = poly_grad_nb
    interp = interp_nb
else:
    laplacian = laplacian_np
    flow_step = flow_step_np
    residual_inf = residual_inf_np
    energy_parts = energy_parts_np
    poly_eval = poly_eval_np
    poly_grad = poly_grad_np
    interp = interp_np

poly_hess = poly_hess_np  # diagnostics only; never on the hot path


def energy_sum(values, nbc, exps, coeffs, inv_h2) -> float:
    """J / h^n via per-node partials and deterministic pairwise summation."""
    return float(np.sum(energy_parts(values, nbc, exps, coeffs, inv_h2)))
