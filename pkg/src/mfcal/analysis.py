"""Excitation-response analysis: gate covariance and SVD energy rank.

Stacking the per-instance channel gates of a recalibration function
into an n x C matrix, the (optionally centered) covariance
``A = X^T X / (n - 1)`` summarizes how the gates co-vary across a
validation set.  The linear excitation threshold is the smallest
truncated-SVD rank whose Frobenius energy reaches a fraction ``delta``
of the total; a small threshold means the gates live near a
low-dimensional linear manifold.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "excitation_covariance",
    "jacobi_eigh",
    "singular_values",
    "rank_truncation",
    "linear_excitation_threshold",
    "excitation_report",
]

SYMMETRY_TOL = 1e-8
_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 60


def excitation_covariance(excitations, center: bool = False) -> np.ndarray:
    """Second-moment matrix of gate rows: ``X^T X / (n - 1)``.

    ``center=True`` removes the column means first (the usual sample
    covariance); ``center=False`` keeps the raw second moment.  The
    result is symmetrized to remove accumulation-order noise.
    """
    rows = np.asarray(excitations, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError("excitation matrix must be 2-D (instances x channels)")
    n = rows.shape[0]
    if n < 2:
        raise ValueError("need at least 2 instances")
    if not np.all(np.isfinite(rows)):
        raise ValueError("excitations must be finite")
    x = rows - rows.mean(axis=0) if center else rows
    a = x.T @ x / (n - 1)
    return (a + a.T) / 2.0


def jacobi_eigh(matrix, tol: float = _JACOBI_TOL, max_sweeps: int = _JACOBI_MAX_SWEEPS):
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    Sweeps the strict upper triangle in a fixed row-major order,
    rotating each off-diagonal entry to zero, until the off-diagonal
    Frobenius norm falls below ``tol`` relative to the matrix norm.
    Returns ``(eigenvalues, eigenvectors)`` ordered by decreasing
    absolute value; columns of the eigenvector matrix are orthonormal.
    Deterministic: no pivot searching, no randomness.
    """
    a = np.array(matrix, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL:
        raise ValueError(f"matrix must be symmetric within {SYMMETRY_TOL:g}")
    a = (a + a.T) / 2.0
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        return np.diag(a).copy(), v

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2.0)
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                a[p, :], a[q, :] = c * a[p, :] - s * a[q, :], s * a[p, :] + c * a[q, :]
                a[p, q] = a[q, p] = 0.0
                v[:, p], v[:, q] = c * v[:, p] - s * v[:, q], s * v[:, p] + c * v[:, q]

    eigenvalues = np.diag(a).copy()
    order = np.argsort(-np.abs(eigenvalues), kind="stable")
    return eigenvalues[order], v[:, order]


def singular_values(matrix) -> np.ndarray:
    """Singular values of a symmetric matrix: |eigenvalues|, descending."""
    eigenvalues, _ = jacobi_eigh(matrix)
    return np.abs(eigenvalues)


def rank_truncation(matrix, k: int) -> np.ndarray:
    """Best rank-k approximation of a symmetric matrix (top |eigenvalue| terms)."""
    eigenvalues, vectors = jacobi_eigh(matrix)
    k = min(k, eigenvalues.size)
    top = vectors[:, :k]
    return (top * eigenvalues[:k]) @ top.T


def linear_excitation_threshold(matrix, delta: float) -> int:
    """Smallest rank whose squared singular values reach ``delta`` of the total.

    ``delta`` lies in (0, 1]; comparisons carry a 1e-12 relative slack
    so that ``delta = 1`` returns the rank despite cumulative-sum
    rounding.  A zero matrix has rank 0 by convention.
    """
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    s2 = singular_values(matrix) ** 2
    total = float(s2.sum())
    if total == 0.0:
        return 0
    target = delta * total
    slack = 1e-12 * total
    energy = np.cumsum(s2)
    for k, e in enumerate(energy, start=1):
        if e >= target - slack:
            return k
    return int(s2.size)  # unreachable: energy[-1] == total


def excitation_report(matrix, delta: float) -> dict:
    """Threshold record ``{delta, k, singular_values}`` for JSON emission."""
    return {
        "delta": float(delta),
        "k": linear_excitation_threshold(matrix, delta),
        "singular_values": [float(s) for s in singular_values(matrix)],
    }
