"""Small dense symmetric eigensolver (cyclic Jacobi) and derived norms.

All routines accept a single matrix or a stack of matrices ``(..., n, n)``;
a stack is rotated in lockstep, each matrix with its own angles.
"""
from __future__ import annotations

import numpy as np

__all__ = ["jacobi_eigvalsh", "min_max_eig_sym", "spectral_norm"]


def jacobi_eigvalsh(M, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of symmetric matrices by cyclic Jacobi rotations.

    Sweeps stop once every matrix has off-diagonal Frobenius norm below
    ``tol`` times its own Frobenius norm.  Eigenvalues come back sorted
    ascending along the last axis.
    """
    a = np.array(M, dtype=float, copy=True)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError("expected square matrices")
    batch_shape = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape((-1, n, n))
    scale = np.sqrt(np.sum(a * a, axis=(1, 2)))
    threshold = tol * scale
    lower = np.tril_indices(n, -1)
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(a[:, lower[0], lower[1]] ** 2, axis=1))
        if np.all(off <= threshold):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                active = apq != 0.0
                if not np.any(active):
                    continue
                safe = np.where(active, apq, 1.0)
                # a tiny a_pq overflows theta to inf, which correctly gives t = 0
                with np.errstate(over="ignore"):
                    theta = (a[:, q, q] - a[:, p, p]) / (2.0 * safe)
                    t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                c_ = c[:, None]
                s_ = s[:, None]
                ap = a[:, :, p].copy()
                aq = a[:, :, q].copy()
                a[:, :, p] = c_ * ap - s_ * aq
                a[:, :, q] = s_ * ap + c_ * aq
                rp = a[:, p, :].copy()
                rq = a[:, q, :].copy()
                a[:, p, :] = c_ * rp - s_ * rq
                a[:, q, :] = s_ * rp + c_ * rq
                a[:, p, q] = np.where(active, 0.0, a[:, p, q])
                a[:, q, p] = a[:, p, q]
    else:
        raise RuntimeError("Jacobi eigenvalue iteration did not converge")
    w = np.sort(np.diagonal(a, axis1=1, axis2=2), axis=1)
    return w.reshape(batch_shape + (n,))


def min_max_eig_sym(M, sym_tol: float = 1e-12) -> tuple[float, float]:
    """Extreme eigenvalues ``(lambda_min, lambda_max)`` of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    w = jacobi_eigvalsh(0.5 * (M + M.T))
    return float(w[0]), float(w[-1])


def spectral_norm(M):
    """Largest singular value, as sqrt of the top eigenvalue of M^T M.

    For a stack ``(..., r, c)`` returns an array of norms.
    """
    M = np.asarray(M, dtype=float)
    single = M.ndim < 3
    M = np.atleast_2d(M)
    Mt = np.swapaxes(M, -1, -2)
    # M M^T and M^T M share the nonzero spectrum; use the smaller Gram matrix
    G = M @ Mt if M.shape[-2] < M.shape[-1] else Mt @ M
    lam = jacobi_eigvalsh(G)[..., -1]
    out = np.sqrt(np.maximum(lam, 0.0))
    return float(out) if single else out
