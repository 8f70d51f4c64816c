"""Feed-forward reparameterization of the orbital orthonormality constraint.

An unconstrained B x N parameter W maps to coefficients C = Q^T D with
(Q, R) = QR(W) and D any whitening of the overlap matrix (D S D^T = I),
so C S C^T = I holds for every full-rank W.  The QR sign convention
(positive diagonal of R) makes the map single valued and differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import linalg

__all__ = ["WHITENING_SCHEMES", "OrbitalParams", "whitening_matrix",
           "whitening_inverse", "orthonormal_coefficients", "random_init",
           "qr_positive_tape"]

WHITENING_SCHEMES = ("pca", "cholesky", "zca")


@dataclass(eq=False)
class OrbitalParams:
    """Unconstrained orbital parameters, one matrix per spin channel."""

    w_alpha: np.ndarray             # (B, n_alpha)
    w_beta: np.ndarray              # (B, n_beta)
    scheme: str = "pca"
    theta: object = None            # optional neural-transform parameters

    def __post_init__(self):
        self.w_alpha = np.asarray(self.w_alpha, dtype=np.float64)
        self.w_beta = np.asarray(self.w_beta, dtype=np.float64)
        if self.scheme not in WHITENING_SCHEMES:
            raise ValueError(f"whitening scheme must be one of {WHITENING_SCHEMES}")
        if self.w_alpha.ndim != 2 or self.w_beta.ndim != 2:
            raise ValueError("W matrices must be 2-D")
        if self.w_alpha.shape[0] != self.w_beta.shape[0]:
            raise ValueError("spin channels must share the basis dimension")

    @property
    def B(self) -> int:
        return self.w_alpha.shape[0]

    def spin(self, label: str) -> np.ndarray:
        if label == "alpha":
            return self.w_alpha
        if label == "beta":
            return self.w_beta
        raise ValueError(f"spin must be 'alpha' or 'beta', got {label!r}")


def whitening_matrix(s: np.ndarray, scheme: str) -> np.ndarray:
    """A matrix D with D S D^T = I, by the requested factorization of S."""
    s = np.asarray(s, dtype=np.float64)
    if scheme == "pca":
        w, v = linalg.sym_eigh(s)
        _check_spd_spectrum(w)
        return (v / np.sqrt(w)).T
    if scheme == "cholesky":
        l = linalg.cholesky_spd(linalg.inverse_spd(s))
        return l.T
    if scheme == "zca":
        return linalg.inv_sqrt_spd(s)
    raise ValueError(f"whitening scheme must be one of {WHITENING_SCHEMES}")


def whitening_inverse(s: np.ndarray, scheme: str) -> np.ndarray:
    """Inverse of whitening_matrix(s, scheme)."""
    s = np.asarray(s, dtype=np.float64)
    if scheme == "pca":
        w, v = linalg.sym_eigh(s)
        _check_spd_spectrum(w)
        return v * np.sqrt(w)
    if scheme == "cholesky":
        l = linalg.cholesky_spd(linalg.inverse_spd(s))
        return linalg.solve_upper(l.T, np.eye(s.shape[0]))
    if scheme == "zca":
        w, v = linalg.sym_eigh(s)
        _check_spd_spectrum(w)
        return (v * np.sqrt(w)) @ v.T
    raise ValueError(f"whitening scheme must be one of {WHITENING_SCHEMES}")


def _check_spd_spectrum(w: np.ndarray) -> None:
    if w[-1] <= 0 or w[0] <= 1e-12 * w[-1]:
        raise ValueError("overlap matrix is near singular; "
                         "basis functions are linearly dependent")


def orthonormal_coefficients(params: OrbitalParams, d: np.ndarray, spin: str) -> np.ndarray:
    """Coefficients C = Q^T D with guaranteed C S C^T = I."""
    w = params.spin(spin)
    if w.shape[1] > w.shape[0]:
        raise ValueError("cannot request more orbitals than basis functions")
    q, _ = linalg.qr_positive(w)
    return q.T @ d


def random_init(b: int, n: int, seed) -> np.ndarray:
    """Standard-normal B x N parameter matrix from a seeded generator."""
    if n > b:
        raise ValueError("cannot request more orbitals than basis functions")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.standard_normal((b, n))


def qr_positive_tape(w: ad.Var):
    """Tape version of the positive-diagonal thin QR; returns Q only.

    Mirrors linalg.qr_positive (two-pass modified Gram-Schmidt) so values
    agree with the plain implementation; the tape supplies the derivative.
    """
    b, n = w.shape
    if n == 0:
        return ad.Var(np.zeros((b, 0)))
    cols = []
    for j in range(n):
        v = w[:, j]
        for _pass in range(2):
            for q in cols:
                v = v - (q * v).sum() * q
        norm2 = (v * v).sum()
        if norm2.value <= (1e-12 * max(np.max(np.abs(w.value)), 1.0)) ** 2:
            raise ValueError("qr_positive: rank-deficient input")
        v = v * (norm2 ** -0.5)
        cols.append(v)
    # R_jj is the residual-column norm, so the positive-diagonal convention
    # holds by construction (same as linalg.qr_positive).
    return ad.stack(cols, axis=1)
