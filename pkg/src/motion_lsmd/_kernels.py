"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The active backend is chosen once at import time from the environment
flag ``MOTION_LSMD_NUMBA`` (default on; set to ``0`` to force numpy).
Both backends stay importable so tests and the benchmark can compare
them directly.
"""

from __future__ import annotations

import os

import numpy as np


def _env_flag(name: str, default: bool) -> bool:
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.strip().lower() not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# non-negative lasso coordinate descent
#
# minimize ||t - X g||^2 + lam * sum(g)   subject to g >= 0
#
# Per-coordinate closed form on the residual r = t - X g:
#   g_k <- max(0, g_k + (2 x_k.r - lam) / (2 ||x_k||^2))
# Columns with ||x_k|| = 0 are pinned to 0.
# ---------------------------------------------------------------------------

def _cd_nn_lasso_loop(X, t, lam, tol, max_iter):
    d, n = X.shape
    gamma = np.zeros(n)
    resid = t.copy()
    colsq = np.zeros(n)
    for k in range(n):
        acc = 0.0
        for i in range(d):
            acc += X[i, k] * X[i, k]
        colsq[k] = acc
    sweeps = 0
    for sweep in range(max_iter):
        sweeps = sweep + 1
        max_change = 0.0
        for k in range(n):
            ck = colsq[k]
            if ck <= 0.0:
                continue
            dot = 0.0
            for i in range(d):
                dot += X[i, k] * resid[i]
            new = gamma[k] + (2.0 * dot - lam) / (2.0 * ck)
            if new < 0.0:
                new = 0.0
            delta = new - gamma[k]
            if delta != 0.0:
                for i in range(d):
                    resid[i] -= X[i, k] * delta
                gamma[k] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
        if max_change < tol:
            break
    return gamma, resid, sweeps


def _cd_nn_lasso_numpy(X, t, lam, tol, max_iter):
    d, n = X.shape
    gamma = np.zeros(n)
    resid = t.astype(np.float64).copy()
    colsq = np.einsum("ij,ij->j", X, X)
    sweeps = 0
    for sweep in range(max_iter):
        sweeps = sweep + 1
        max_change = 0.0
        for k in range(n):
            ck = colsq[k]
            if ck <= 0.0:
                continue
            new = gamma[k] + (2.0 * float(X[:, k] @ resid) - lam) / (2.0 * ck)
            if new < 0.0:
                new = 0.0
            delta = new - gamma[k]
            if delta != 0.0:
                resid -= X[:, k] * delta
                gamma[k] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
        if max_change < tol:
            break
    return gamma, resid, sweeps


# ---------------------------------------------------------------------------
# Gram-form coordinate descent for the same problem
#
# Same update rule written against G = X'X, c = X't and tt = t.t, which
# the appearance model caches per dictionary. Returns the squared
# residual instead of the residual vector.
# ---------------------------------------------------------------------------

def _cd_nn_lasso_gram_loop(G, c, tt, lam, tol, max_iter):
    n = G.shape[0]
    gamma = np.zeros(n)
    q = np.zeros(n)  # G @ gamma
    sweeps = 0
    for sweep in range(max_iter):
        sweeps = sweep + 1
        max_change = 0.0
        for k in range(n):
            gkk = G[k, k]
            if gkk <= 0.0:
                continue
            new = gamma[k] + (2.0 * (c[k] - q[k]) - lam) / (2.0 * gkk)
            if new < 0.0:
                new = 0.0
            delta = new - gamma[k]
            if delta != 0.0:
                for j in range(n):
                    q[j] += G[j, k] * delta
                gamma[k] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
        if max_change < tol:
            break
    resid_sq = tt
    for k in range(n):
        resid_sq += gamma[k] * (q[k] - 2.0 * c[k])
    if resid_sq < 0.0:
        resid_sq = 0.0
    return gamma, resid_sq, sweeps


def _cd_nn_lasso_gram_numpy(G, c, tt, lam, tol, max_iter):
    n = G.shape[0]
    gamma = np.zeros(n)
    q = np.zeros(n)
    sweeps = 0
    for sweep in range(max_iter):
        sweeps = sweep + 1
        max_change = 0.0
        for k in range(n):
            gkk = G[k, k]
            if gkk <= 0.0:
                continue
            new = gamma[k] + (2.0 * (c[k] - q[k]) - lam) / (2.0 * gkk)
            if new < 0.0:
                new = 0.0
            delta = new - gamma[k]
            if delta != 0.0:
                q += G[:, k] * delta
                gamma[k] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
        if max_change < tol:
            break
    resid_sq = float(tt + gamma @ (q - 2.0 * c))
    return gamma, max(resid_sq, 0.0), sweeps


# ---------------------------------------------------------------------------
# per-position block coding residuals (generative appearance model)
# ---------------------------------------------------------------------------

def _make_block_residuals(gram_cd):
    def _block_residuals(grams, dicts, blocks, lam, tol, max_iter):
        # grams: (P, m, m); dicts: (P, d, m); blocks: (P, d)
        P = dicts.shape[0]
        d = dicts.shape[1]
        m = dicts.shape[2]
        out = np.empty(P)
        for p in range(P):
            y = blocks[p]
            nrm = 0.0
            for i in range(d):
                nrm += y[i] * y[i]
            nrm = np.sqrt(nrm)
            if nrm <= 0.0:
                out[p] = 0.0  # zero block reconstructs exactly
                continue
            c = np.zeros(m)
            for j in range(m):
                acc = 0.0
                for i in range(d):
                    acc += dicts[p, i, j] * y[i]
                c[j] = acc / nrm
            _gamma, resid_sq, _sweeps = gram_cd(grams[p], c, 1.0, lam, tol, max_iter)
            out[p] = np.sqrt(resid_sq)
        return out

    return _block_residuals


# ---------------------------------------------------------------------------
# bilinear sampling with zero padding outside the image
# ---------------------------------------------------------------------------

def _bilinear_loop(pixels, rows, cols):
    h, w = pixels.shape
    oh, ow = rows.shape
    out = np.zeros((oh, ow))
    for u in range(oh):
        for v in range(ow):
            r = rows[u, v]
            c = cols[u, v]
            r0 = int(np.floor(r))
            c0 = int(np.floor(c))
            fr = r - r0
            fc = c - c0
            acc = 0.0
            if 0 <= r0 < h:
                if 0 <= c0 < w:
                    acc += pixels[r0, c0] * (1.0 - fr) * (1.0 - fc)
                if 0 <= c0 + 1 < w:
                    acc += pixels[r0, c0 + 1] * (1.0 - fr) * fc
            if 0 <= r0 + 1 < h:
                if 0 <= c0 < w:
                    acc += pixels[r0 + 1, c0] * fr * (1.0 - fc)
                if 0 <= c0 + 1 < w:
                    acc += pixels[r0 + 1, c0 + 1] * fr * fc
            out[u, v] = acc
    return out


def _bilinear_numpy(pixels, rows, cols):
    h, w = pixels.shape
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = rows - r0
    fc = cols - c0

    def fetch(ri, ci):
        valid = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
        vals = pixels[np.clip(ri, 0, h - 1), np.clip(ci, 0, w - 1)]
        return np.where(valid, vals, 0.0)

    out = fetch(r0, c0) * (1.0 - fr) * (1.0 - fc)
    out = out + fetch(r0, c0 + 1) * (1.0 - fr) * fc
    out = out + fetch(r0 + 1, c0) * fr * (1.0 - fc)
    out = out + fetch(r0 + 1, c0 + 1) * fr * fc
    return out


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

NUMBA_REQUESTED = _env_flag("MOTION_LSMD_NUMBA", True)
NUMBA_ACTIVE = False

_block_residuals_numpy = _make_block_residuals(_cd_nn_lasso_gram_numpy)

if NUMBA_REQUESTED:
    try:
        from numba import njit

        _cd_nn_lasso_jit = njit(cache=True, nogil=True)(_cd_nn_lasso_loop)
        _cd_nn_lasso_gram_jit = njit(cache=True, nogil=True)(_cd_nn_lasso_gram_loop)
        _bilinear_jit = njit(cache=True, nogil=True)(_bilinear_loop)
        _block_residuals_jit = njit(nogil=True)(
            _make_block_residuals(_cd_nn_lasso_gram_jit)
        )
        NUMBA_ACTIVE = True
    except ImportError:
        NUMBA_ACTIVE = False

if NUMBA_ACTIVE:
    cd_nn_lasso = _cd_nn_lasso_jit
    cd_nn_lasso_gram = _cd_nn_lasso_gram_jit
    bilinear_sample = _bilinear_jit
    block_residuals = _block_residuals_jit
else:
    cd_nn_lasso = _cd_nn_lasso_numpy
    cd_nn_lasso_gram = _cd_nn_lasso_gram_numpy
    bilinear_sample = _bilinear_numpy
    block_residuals = _block_residuals_numpy


def backend_name() -> str:
    return "numba" if NUMBA_ACTIVE else "numpy"
