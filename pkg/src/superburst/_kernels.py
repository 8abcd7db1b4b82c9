"""Numerical backends for the two hot loops.

Only two pieces of the package are hot enough to care about: filling the
N x N pair-coupling matrices from positions, and assembling the
elementwise part of the pairwise-correlation derivatives (everything
except the handful of matrix products, which stay on BLAS either way).
Each has a pure-numpy twin and a numba twin; SUPERBURST_BACKEND picks
between them ("numpy", "numba", or "auto" to take numba when available).
Both twins produce bitwise-identical results only where the operation
order matches; tests pin agreement to 1e-15 relative instead.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via SUPERBURST_BACKEND=numpy
    numba = None
    HAS_NUMBA = False


def active_backend() -> str:
    """Resolve the SUPERBURST_BACKEND env flag to "numpy" or "numba"."""
    choice = os.environ.get("SUPERBURST_BACKEND", "auto").lower()
    if choice not in ("auto", "numpy", "numba"):
        raise ValueError(f"SUPERBURST_BACKEND={choice!r}; use auto, numpy or numba")
    if choice == "numba" and not HAS_NUMBA:
        raise RuntimeError("SUPERBURST_BACKEND=numba but numba is not installed")
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    return choice


# ---------------------------------------------------------------------------
# pair-coupling fill


def _pair_couplings_numpy(positions: np.ndarray, k0: float,
                          proj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dissipative and coherent pair couplings over the whole array.

    proj[j, l] = |d . rhat_jl|^2 precomputed by the caller (it depends on
    the channel polarization, possibly complex). Diagonals are set to the
    single-atom values: gamma_jj = 1, J_jj = 0.
    """
    dr = positions[:, None, :] - positions[None, :, :]
    u = k0 * np.sqrt(np.einsum("jlk,jlk->jl", dr, dr))
    np.fill_diagonal(u, 1.0)  # placeholder, diagonal overwritten below
    a = 1.0 - proj
    b = 1.0 - 3.0 * proj
    su, cu = np.sin(u), np.cos(u)
    gamma = 1.5 * (a * su / u + b * (cu / u**2 - su / u**3))
    jmat = -0.75 * (a * cu / u - b * (su / u**2 + cu / u**3))
    np.fill_diagonal(gamma, 1.0)
    np.fill_diagonal(jmat, 0.0)
    return gamma, jmat


if HAS_NUMBA:

    @numba.njit(cache=True)
    def _pair_couplings_numba(positions, k0, proj):  # pragma: no cover
        n = positions.shape[0]
        gamma = np.empty((n, n))
        jmat = np.empty((n, n))
        for j in range(n):
            gamma[j, j] = 1.0
            jmat[j, j] = 0.0
            for l in range(j + 1, n):
                dx = positions[j, 0] - positions[l, 0]
                dy = positions[j, 1] - positions[l, 1]
                dz = positions[j, 2] - positions[l, 2]
                u = k0 * math.sqrt(dx * dx + dy * dy + dz * dz)
                a = 1.0 - proj[j, l]
                b = 1.0 - 3.0 * proj[j, l]
                su = math.sin(u)
                cu = math.cos(u)
                g = 1.5 * (a * su / u + b * (cu / u**2 - su / u**3))
                jj = -0.75 * (a * cu / u - b * (su / u**2 + cu / u**3))
                gamma[j, l] = g
                gamma[l, j] = g
                jmat[j, l] = jj
                jmat[l, j] = jj
        return gamma, jmat


def pair_couplings(positions: np.ndarray, k0: float,
                   proj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if active_backend() == "numba":
        return _pair_couplings_numba(positions, k0, proj)
    return _pair_couplings_numpy(positions, k0, proj)


# ---------------------------------------------------------------------------
# elementwise assembly of the pairwise-correlation derivatives
#
# The integrator precomputes the six matrix products on BLAS and hands the
# kernels everything elementwise. Argument conventions, all (N, N) unless
# noted: at/bt/ct (N,) populations; e/f/g real symmetric pairs; q/p/r
# complex coherence pairs; A/B/C complex couplings (J + i gamma / 2 style
# combination built in cumulant.py) with zero diagonals; gf/gg/gh real
# dissipative couplings with zero diagonals; Kq = conj(A) @ q, Lq = q @ A,
# and likewise for (B, p) and (C, r).


def _four_level_rhs_numpy(at, bt, ct, e, f, g, q, p, r,
                          A, B, C, gf, gg, gh, Kq, Lq, Kp, Lp, Kr, Lr,
                          beta_f, beta_g):
    imq = (A * q).imag
    imp = (B * p).imag
    imr = (C * r).imag
    m = imq + imp + imr
    w = m.sum(axis=1)
    wa = imq.sum(axis=1)
    wb = imp.sum(axis=1)

    dat = -at + 2.0 * w
    dbt = beta_f * at - 2.0 * wa
    dct = beta_g * at - 2.0 * wb

    wm = w[:, None] - m
    cross = wm * at[None, :]
    de = -2.0 * e + 2.0 * (cross + cross.T)
    np.fill_diagonal(de, 0.0)

    df = -f + beta_f * e + 2.0 * imq + 2.0 * wm * bt[None, :] \
        - 2.0 * at[:, None] * (wa[None, :] - imq.T)
    dg = -g + beta_g * e + 2.0 * imp + 2.0 * wm * ct[None, :] \
        - 2.0 * at[:, None] * (wb[None, :] - imp.T)
    np.fill_diagonal(df, 0.0)
    np.fill_diagonal(dg, 0.0)

    dq = -q + gf * e - 1j * (A * f) + 1j * (np.conj(A) * f.T) \
        + 1j * ((bt - at)[:, None] * Kq + (at - bt)[None, :] * Lq)
    dp = -p + gg * e - 1j * (B * g) + 1j * (np.conj(B) * g.T) \
        + 1j * ((ct - at)[:, None] * Kp + (at - ct)[None, :] * Lp)
    ht = 1.0 - at - bt - ct
    s = at[:, None] - e - f - g
    dr = -r + gh * e - 1j * (C * s) + 1j * (np.conj(C) * s.T) \
        + 1j * ((ht - at)[:, None] * Kr + (at - ht)[None, :] * Lr)
    np.fill_diagonal(dq, 0.0)
    np.fill_diagonal(dp, 0.0)
    np.fill_diagonal(dr, 0.0)
    return dat, dbt, dct, de, df, dg, dq, dp, dr


if HAS_NUMBA:

    @numba.njit(cache=True)
    def _four_level_rhs_numba(at, bt, ct, e, f, g, q, p, r,
                              A, B, C, gf, gg, gh, Kq, Lq, Kp, Lp, Kr, Lr,
                              beta_f, beta_g):  # pragma: no cover
        n = at.shape[0]
        imq = np.empty((n, n))
        imp = np.empty((n, n))
        imr = np.empty((n, n))
        w = np.zeros(n)
        wa = np.zeros(n)
        wb = np.zeros(n)
        for j in range(n):
            for l in range(n):
                iq = (A[j, l] * q[j, l]).imag
                ip = (B[j, l] * p[j, l]).imag
                ir = (C[j, l] * r[j, l]).imag
                imq[j, l] = iq
                imp[j, l] = ip
                imr[j, l] = ir
                w[j] += iq + ip + ir
                wa[j] += iq
                wb[j] += ip

        dat = np.empty(n)
        dbt = np.empty(n)
        dct = np.empty(n)
        for j in range(n):
            dat[j] = -at[j] + 2.0 * w[j]
            dbt[j] = beta_f * at[j] - 2.0 * wa[j]
            dct[j] = beta_g * at[j] - 2.0 * wb[j]

        de = np.empty((n, n))
        df = np.empty((n, n))
        dg = np.empty((n, n))
        dq = np.empty((n, n), dtype=np.complex128)
        dp = np.empty((n, n), dtype=np.complex128)
        dr = np.empty((n, n), dtype=np.complex128)
        for j in range(n):
            de[j, j] = 0.0
            df[j, j] = 0.0
            dg[j, j] = 0.0
            dq[j, j] = 0.0
            dp[j, j] = 0.0
            dr[j, j] = 0.0
            htj = 1.0 - at[j] - bt[j] - ct[j]
            for l in range(n):
                if l == j:
                    continue
                wmjl = w[j] - imq[j, l] - imp[j, l] - imr[j, l]
                wmlj = w[l] - imq[l, j] - imp[l, j] - imr[l, j]
                de[j, l] = -2.0 * e[j, l] + 2.0 * (wmjl * at[l] + wmlj * at[j])
                df[j, l] = -f[j, l] + beta_f * e[j, l] + 2.0 * imq[j, l] \
                    + 2.0 * wmjl * bt[l] - 2.0 * at[j] * (wa[l] - imq[l, j])
                dg[j, l] = -g[j, l] + beta_g * e[j, l] + 2.0 * imp[j, l] \
                    + 2.0 * wmjl * ct[l] - 2.0 * at[j] * (wb[l] - imp[l, j])
                htl = 1.0 - at[l] - bt[l] - ct[l]
                sjl = at[j] - e[j, l] - f[j, l] - g[j, l]
                slj = at[l] - e[l, j] - f[l, j] - g[l, j]
                dq[j, l] = -q[j, l] + gf[j, l] * e[j, l] \
                    - 1j * (A[j, l] * f[j, l]) \
                    + 1j * (np.conj(A[j, l]) * f[l, j]) \
                    + 1j * ((bt[j] - at[j]) * Kq[j, l] + (at[l] - bt[l]) * Lq[j, l])
                dp[j, l] = -p[j, l] + gg[j, l] * e[j, l] \
                    - 1j * (B[j, l] * g[j, l]) \
                    + 1j * (np.conj(B[j, l]) * g[l, j]) \
                    + 1j * ((ct[j] - at[j]) * Kp[j, l] + (at[l] - ct[l]) * Lp[j, l])
                dr[j, l] = -r[j, l] + gh[j, l] * e[j, l] \
                    - 1j * (C[j, l] * sjl) \
                    + 1j * (np.conj(C[j, l]) * slj) \
                    + 1j * ((htj - at[j]) * Kr[j, l] + (at[l] - htl) * Lr[j, l])
        return dat, dbt, dct, de, df, dg, dq, dp, dr


def four_level_rhs(*args):
    if active_backend() == "numba":
        return _four_level_rhs_numba(*args)
    return _four_level_rhs_numpy(*args)


def _two_level_rhs_numpy(at, e, p, B, gg, Kp, Lp):
    imp = (B * p).imag
    w = imp.sum(axis=1)

    dat = -at + 2.0 * w

    wm = w[:, None] - imp
    cross = wm * at[None, :]
    de = -2.0 * e + 2.0 * (cross + cross.T)
    np.fill_diagonal(de, 0.0)

    dp = -p + gg * e - 1j * B * (at[:, None] - e) \
        + 1j * np.conj(B) * (at[None, :] - e) \
        + 1j * ((1.0 - 2.0 * at)[:, None] * Kp + (2.0 * at - 1.0)[None, :] * Lp)
    np.fill_diagonal(dp, 0.0)
    return dat, de, dp


if HAS_NUMBA:

    @numba.njit(cache=True)
    def _two_level_rhs_numba(at, e, p, B, gg, Kp, Lp):  # pragma: no cover
        n = at.shape[0]
        imp = np.empty((n, n))
        w = np.zeros(n)
        for j in range(n):
            for l in range(n):
                ip = (B[j, l] * p[j, l]).imag
                imp[j, l] = ip
                w[j] += ip

        dat = np.empty(n)
        for j in range(n):
            dat[j] = -at[j] + 2.0 * w[j]

        de = np.empty((n, n))
        dp = np.empty((n, n), dtype=np.complex128)
        for j in range(n):
            de[j, j] = 0.0
            dp[j, j] = 0.0
            for l in range(n):
                if l == j:
                    continue
                wmjl = w[j] - imp[j, l]
                wmlj = w[l] - imp[l, j]
                de[j, l] = -2.0 * e[j, l] + 2.0 * (wmjl * at[l] + wmlj * at[j])
                dp[j, l] = -p[j, l] + gg[j, l] * e[j, l] \
                    - 1j * B[j, l] * (at[j] - e[j, l]) \
                    + 1j * np.conj(B[j, l]) * (at[l] - e[j, l]) \
                    + 1j * ((1.0 - 2.0 * at[j]) * Kp[j, l]
                            + (2.0 * at[l] - 1.0) * Lp[j, l])
        return dat, de, dp


def two_level_rhs(*args):
    if active_backend() == "numba":
        return _two_level_rhs_numba(*args)
    return _two_level_rhs_numpy(*args)
