"""Dense symmetric-matrix kernels: Jacobi eigensolver, QR, Cholesky.

Everything here is self-contained numpy (no LAPACK calls), which is entirely
adequate at the basis-set sizes this engine targets (B of order tens).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ConvergenceError", "sym_eigh", "qr_positive", "cholesky_spd",
    "inv_sqrt_spd", "solve_lower", "solve_upper", "inverse_spd",
]

_SYM_RTOL = 1e-10


class ConvergenceError(RuntimeError):
    """An iterative kernel failed to reach its tolerance within the cap."""


def _check_symmetric(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale > 0 and np.max(np.abs(a - a.T)) > _SYM_RTOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return a


def sym_eigh(a: np.ndarray, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns).  Each
    eigenvector is sign-fixed so its largest-magnitude entry is positive.
    """
    a = _check_symmetric(a, "A")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    m = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = max(np.max(np.abs(m)), 1e-300)
    tol = 1e-15 * scale

    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if abs(apq) <= tol:
                    continue
                off = max(off, abs(apq))
                theta = 0.5 * (m[q, q] - m[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                rp, rq = m[p, :].copy(), m[q, :].copy()
                m[p, :] = c * rp - s * rq
                m[q, :] = s * rp + c * rq
                cp, cq = m[:, p].copy(), m[:, q].copy()
                m[:, p] = c * cp - s * cq
                m[:, q] = s * cp + c * cq
                m[p, q] = 0.0
                m[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if off <= tol:
            break
    else:
        raise ConvergenceError(f"Jacobi eigensolver: no convergence in {max_sweeps} sweeps")

    w = np.diag(m).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    for j in range(n):
        k = np.argmax(np.abs(v[:, j]))
        if v[k, j] < 0:
            v[:, j] = -v[:, j]
    return w, v


def qr_positive(w: np.ndarray):
    """Thin QR with positive diagonal of R (modified Gram-Schmidt, two passes).

    Requires rows >= cols and full column rank.  The positive-diagonal
    convention makes the factorization unique, so W -> Q is single valued.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("W must be 2-D")
    rows, cols = w.shape
    if rows < cols:
        raise ValueError(f"qr_positive needs rows >= cols, got {w.shape}")
    q = w.astype(np.float64, copy=True)
    r = np.zeros((cols, cols))
    wscale = max(np.max(np.abs(w)) if w.size else 0.0, 1e-300)
    for j in range(cols):
        for i in range(j):
            rij = q[:, i] @ q[:, j]
            r[i, j] += rij
            q[:, j] = q[:, j] - rij * q[:, i]
        # reorthogonalization pass
        for i in range(j):
            cij = q[:, i] @ q[:, j]
            r[i, j] += cij
            q[:, j] = q[:, j] - cij * q[:, i]
        norm = np.sqrt(q[:, j] @ q[:, j])
        if norm <= 1e-12 * max(wscale, 1.0):
            raise ValueError("qr_positive: rank-deficient input")
        r[j, j] = norm
        q[:, j] = q[:, j] / norm
    # positive-diagonal sign convention: R from plain MGS has positive
    # diagonal already, but projecting W's column signs through keeps the
    # map well defined when columns get flipped by cancellation.
    for j in range(cols):
        if r[j, j] < 0:
            r[j, :] = -r[j, :]
            q[:, j] = -q[:, j]
    return q, r


def cholesky_spd(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = A for symmetric positive-definite A."""
    a = _check_symmetric(a, "A")
    n = a.shape[0]
    l = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - l[j, :j] @ l[j, :j]
        if d <= 0.0:
            raise ValueError("cholesky_spd: matrix is not positive definite")
        l[j, j] = np.sqrt(d)
        if j + 1 < n:
            l[j + 1:, j] = (a[j + 1:, j] - l[j + 1:, :j] @ l[j, :j]) / l[j, j]
    return l


def inv_sqrt_spd(a: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root A^{-1/2} of an SPD matrix."""
    a = _check_symmetric(a, "A")
    w, v = sym_eigh(a)
    if a.shape[0] == 0:
        return a.copy()
    wmax = w[-1]
    if wmax <= 0 or w[0] <= 1e-12 * wmax:
        raise ValueError("inv_sqrt_spd: matrix is singular or not positive definite")
    return (v / np.sqrt(w)) @ v.T


def solve_lower(l: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution for lower-triangular systems L x = b."""
    l = np.asarray(l, dtype=np.float64)
    x = np.array(b, dtype=np.float64, copy=True)
    n = l.shape[0]
    for i in range(n):
        if i:
            x[i] = x[i] - l[i, :i] @ x[:i]
        x[i] = x[i] / l[i, i]
    return x


def solve_upper(u: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Back substitution for upper-triangular systems U x = b."""
    u = np.asarray(u, dtype=np.float64)
    x = np.array(b, dtype=np.float64, copy=True)
    n = u.shape[0]
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            x[i] = x[i] - u[i, i + 1:] @ x[i + 1:]
        x[i] = x[i] / u[i, i]
    return x


def inverse_spd(a: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor."""
    l = cholesky_spd(a)
    n = a.shape[0]
    inv = np.empty_like(l)
    eye = np.eye(n)
    for j in range(n):
        y = solve_lower(l, eye[:, j])
        inv[:, j] = solve_upper(l.T, y)
    return 0.5 * (inv + inv.T)
