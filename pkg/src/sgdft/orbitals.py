"""Gaussian basis evaluation, analytic overlaps, LCAO orbitals, densities.

The per-shell derivative code is written against the dispatch helpers in
`autodiff`, so the same expressions evaluate on plain arrays (grid tables)
and on tape variables (the warped-basis gradient path).  Laplacians are
always assembled as the trace of the explicit Hessian so that every
pipeline produces bit-identical values for identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import linalg
from .chem import Molecule, Shell

__all__ = ["AOBasis", "AOValues", "eval_ao", "overlap_matrix", "eval_mo",
           "density", "ao_tables"]

_EYE3 = np.eye(3)


@dataclass(frozen=True, eq=False)
class AOValues:
    """Values, Laplacians and gradients of every basis function at a point."""

    values: np.ndarray       # (B,)
    laplacians: np.ndarray   # (B,)
    gradients: np.ndarray | None = None   # (B, 3)


@dataclass(frozen=True, eq=False)
class AOBasis:
    """Contracted-Gaussian basis with resolved centers and analytic overlap."""

    mol: Molecule
    shells: tuple[Shell, ...]
    B: int
    overlap: np.ndarray

    @classmethod
    def build(cls, mol: Molecule, shells) -> "AOBasis":
        shells = tuple(shells)
        b = sum(sh.n_functions for sh in shells)
        basis = cls(mol=mol, shells=shells, B=b, overlap=np.zeros((b, b)))
        s = overlap_matrix(basis)
        object.__setattr__(basis, "overlap", s)
        d = np.diag(s)
        if np.max(np.abs(d - 1.0)) > 1e-12:
            raise ValueError("contracted functions are not normalized")
        return basis

    def shell_center(self, shell: Shell) -> np.ndarray:
        return self.mol.atoms[shell.atom_index].position

    def effective_coefficients(self, shell: Shell) -> np.ndarray:
        """Contraction coefficients times primitive normalization factors."""
        a = shell.exponents
        norm = (2.0 * a / math.pi) ** 0.75
        if shell.angular_momentum == 1:
            norm = norm * np.sqrt(4.0 * a)
        return shell.coefficients * norm


def _shell_derivs(shell: Shell, center: np.ndarray, points):
    """Value, gradient and Hessian of each function of one shell.

    `points` may be an (m, 3) ndarray or tape Var.  Returns a list with one
    (val, grad, hess) triple per function, shapes (m,), (m,3), (m,3,3).
    """
    alphas = shell.exponents
    coefs = shell.coefficients * 1.0
    # fold primitive normalization into the coefficients
    norm = (2.0 * alphas / math.pi) ** 0.75
    if shell.angular_momentum == 1:
        norm = norm * np.sqrt(4.0 * alphas)
    c = coefs * norm

    u = points - center                                  # (m, 3)
    r2 = ad.vsum(u * u, axis=1)                          # (m,)
    e_prim = ad.exp(ad.expand_dims(r2, 1) * (-alphas))   # (m, k)
    e0 = ad.matmul(e_prim, c)
    e1 = ad.matmul(e_prim, alphas * c)
    e2 = ad.matmul(e_prim, alphas * alphas * c)

    uu = ad.expand_dims(u, 2) * ad.expand_dims(u, 1)     # (m, 3, 3)
    e1_mm = ad.expand_dims(ad.expand_dims(e1, 1), 2)
    e2_mm = ad.expand_dims(ad.expand_dims(e2, 1), 2)

    if shell.angular_momentum == 0:
        val = e0
        grad = u * ad.expand_dims(-2.0 * e1, 1)
        hess = uu * (4.0 * e2_mm) - _EYE3 * (2.0 * e1_mm)
        return [(val, grad, hess)]

    out = []
    for d in range(3):
        ed = _EYE3[d]                                    # unit vector, constant
        ud = u[:, d]                                     # (m,)
        val = ud * e0
        grad = ed * ad.expand_dims(e0, 1) - u * ad.expand_dims(2.0 * e1 * ud, 1)
        t1 = ed[:, None] * ad.expand_dims(u, 1)          # e_d[i] u[j]
        t2 = ed[None, :] * ad.expand_dims(u, 2)          # e_d[j] u[i]
        t3 = _EYE3 * ad.expand_dims(ad.expand_dims(ud, 1), 2)
        tri = (t1 + t2 + t3) * (-2.0 * e1_mm)
        cub = uu * ad.expand_dims(ad.expand_dims(4.0 * e2 * ud, 1), 2)
        out.append((val, grad, tri + cub))
    return out


def ao_derivs(basis: AOBasis, points):
    """Stacked values/gradients/Hessians of all B functions at m points."""
    vals, grads, hesss = [], [], []
    for shell in basis.shells:
        center = basis.shell_center(shell)
        for val, grad, hess in _shell_derivs(shell, center, points):
            vals.append(val)
            grads.append(grad)
            hesss.append(hess)
    return (ad.stack(vals, axis=1), ad.stack(grads, axis=1), ad.stack(hesss, axis=1))


def hessian_trace(hess):
    """Laplacian from an explicit Hessian; fixed summation order."""
    return hess[..., 0, 0] + hess[..., 1, 1] + hess[..., 2, 2]


def ao_tables(basis: AOBasis, points: np.ndarray):
    """AO values and Laplacians tabulated on a batch of points.

    Returns (values (m,B), laplacians (m,B)) as plain arrays; this is the
    workhorse for grid tables, so it avoids retaining full Hessians.
    """
    points = np.asarray(points, dtype=np.float64)
    m = points.shape[0]
    values = np.empty((m, basis.B))
    laps = np.empty((m, basis.B))
    col = 0
    for shell in basis.shells:
        center = basis.shell_center(shell)
        for val, _grad, hess in _shell_derivs(shell, center, points):
            values[:, col] = val
            laps[:, col] = hessian_trace(hess)
            col += 1
    return values, laps


def eval_ao(basis: AOBasis, r) -> AOValues:
    """All basis functions (value, gradient, Laplacian) at one point."""
    r = np.asarray(r, dtype=np.float64).reshape(1, 3)
    if not np.all(np.isfinite(r)):
        raise ValueError("evaluation point must be finite")
    vals, grads, hesss = ao_derivs(basis, r)
    return AOValues(values=vals[0], laplacians=hessian_trace(hesss)[0],
                    gradients=grads[0])


def overlap_matrix(basis: AOBasis) -> np.ndarray:
    """Analytic overlap matrix from Gaussian-product closed forms."""
    b = basis.B
    s = np.zeros((b, b))
    # function offsets per shell
    offsets = []
    off = 0
    for sh in basis.shells:
        offsets.append(off)
        off += sh.n_functions

    for ia, sha in enumerate(basis.shells):
        ca = basis.effective_coefficients(sha)
        aa = sha.exponents
        ra = basis.shell_center(sha)
        for ib in range(ia, len(basis.shells)):
            shb = basis.shells[ib]
            cb = basis.effective_coefficients(shb)
            ab = shb.exponents
            rb = basis.shell_center(shb)
            block = _shell_pair_overlap(sha.angular_momentum, aa, ca, ra,
                                        shb.angular_momentum, ab, cb, rb)
            oa, ob = offsets[ia], offsets[ib]
            na, nb = sha.n_functions, shb.n_functions
            s[oa:oa + na, ob:ob + nb] = block
            if ib != ia:
                s[ob:ob + nb, oa:oa + na] = block.T
    try:
        linalg.cholesky_spd(s)
    except ValueError:
        raise ValueError("overlap matrix is not positive definite "
                         "(duplicated or linearly dependent basis functions)") from None
    return s


def _shell_pair_overlap(la, aa, ca, ra, lb, ab, cb, rb) -> np.ndarray:
    """Overlap block between two shells (closed form for l <= 1)."""
    ab_pair_a = aa[:, None]
    ab_pair_b = ab[None, :]
    p = ab_pair_a + ab_pair_b
    mu = ab_pair_a * ab_pair_b / p
    diff = ra - rb
    r2 = float(diff @ diff)
    pref = (math.pi / p) ** 1.5 * np.exp(-mu * r2) * (ca[:, None] * cb[None, :])
    # gaussian product center relative to each shell center, per dimension
    pa = (ab_pair_b[..., None] * (rb - ra)) / p[..., None]      # P - A
    pb = (ab_pair_a[..., None] * (ra - rb)) / p[..., None]      # P - B
    half_p = 1.0 / (2.0 * p)

    na = 1 if la == 0 else 3
    nb_ = 1 if lb == 0 else 3
    block = np.zeros((na, nb_))
    for fa in range(na):
        for fb in range(nb_):
            fac = np.ones_like(p)
            for d in range(3):
                ia = 1 if (la == 1 and fa == d) else 0
                ib = 1 if (lb == 1 and fb == d) else 0
                if ia == 0 and ib == 0:
                    continue
                if ia == 1 and ib == 0:
                    fac = fac * pa[..., d]
                elif ia == 0 and ib == 1:
                    fac = fac * pb[..., d]
                else:
                    fac = fac * (pa[..., d] * pb[..., d] + half_p)
            block[fa, fb] = np.sum(pref * fac)
    return block


def eval_mo(c: np.ndarray, ao: AOValues):
    """LCAO molecular-orbital values and Laplacians at one point."""
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != ao.values.shape[0]:
        raise ValueError(f"coefficient shape {c.shape} does not match basis size")
    return c @ ao.values, c @ ao.laplacians


def density(c_alpha: np.ndarray, c_beta: np.ndarray, ao: AOValues):
    """Spin densities at one point from orthonormal orbital coefficients."""
    psi_a, _ = eval_mo(c_alpha, ao)
    psi_b, _ = eval_mo(c_beta, ao)
    return float(psi_a @ psi_a), float(psi_b @ psi_b)
