"""Slow, loop-based reference implementations.

These share no code with the fast paths they check and are used by both the
test suite and ``slnl verify``.
"""

from __future__ import annotations

import math

import numpy as np


def direct_dft2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """O((T N)^2) double sum for (C, T, N) input; returns (f_cos, f_sin)."""
    c_dim, t_dim, n_dim = x.shape
    f_cos = np.zeros(x.shape)
    f_sin = np.zeros(x.shape)
    t = np.arange(t_dim)[:, None]
    n = np.arange(n_dim)[None, :]
    for u in range(t_dim):
        for v in range(n_dim):
            angle = -2 * np.pi * (u * t / t_dim + v * n / n_dim)
            cos, sin = np.cos(angle), np.sin(angle)
            for c in range(c_dim):
                f_cos[c, u, v] = np.sum(x[c] * cos)
                f_sin[c, u, v] = np.sum(x[c] * sin)
    return f_cos, f_sin


def direct_conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Zero-padded same-size cross-correlation by explicit loops; x is (C, T, N)."""
    c_out, c_in, kt, kn = w.shape
    _, t_dim, n_dim = x.shape
    pt, pn = kt // 2, kn // 2
    out = np.zeros((c_out, t_dim, n_dim))
    for o in range(c_out):
        for t in range(t_dim):
            for n in range(n_dim):
                acc = 0.0 if b is None else b[o]
                for c in range(c_in):
                    for i in range(kt):
                        for j in range(kn):
                            tt, nn = t + i - pt, n + j - pn
                            if 0 <= tt < t_dim and 0 <= nn < n_dim:
                                acc += w[o, c, i, j] * x[c, tt, nn]
                out[o, t, n] = acc
    return out


def pairwise_nonlocal(x: np.ndarray, w_g, w_phi, w_psi, w_w) -> tuple[np.ndarray, np.ndarray]:
    """Embedded-Gaussian non-local operation on an (M, P) matrix by double loop.

    Returns (output (M, Q), normalized affinity (M, M)).
    """
    m_dim = x.shape[0]
    g = [w_g @ x[j] for j in range(m_dim)]
    y = np.zeros((m_dim, w_g.shape[0]))
    weights = np.zeros((m_dim, m_dim))
    for i in range(m_dim):
        theta = w_phi @ x[i]
        logits = [float(theta @ (w_psi @ x[j])) for j in range(m_dim)]
        top = max(logits)
        aff = [math.exp(s - top) for s in logits]
        z = math.fsum(aff)
        for j in range(m_dim):
            weights[i, j] = aff[j] / z
            y[i] += weights[i, j] * g[j]
        y[i] = w_w @ y[i]
    return y, weights


def kernel_support(k: int, t_dim: int, n_dim: int, target: tuple[int, int],
                   nonlocal_: bool = False) -> set[tuple[int, int]]:
    """Enumerate input cells reachable from ``target`` through the three
    local kernels (k x 1, 1 x k, k x k) under zero padding."""
    if nonlocal_:
        return {(t, n) for t in range(t_dim) for n in range(n_dim)}
    t0, n0 = target
    cells = set()
    for kt, kn in ((k, 1), (1, k), (k, k)):
        for i in range(kt):
            for j in range(kn):
                t, n = t0 + i - kt // 2, n0 + j - kn // 2
                if 0 <= t < t_dim and 0 <= n < n_dim:
                    cells.add((t, n))
    return cells
