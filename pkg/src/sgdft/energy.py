"""Kohn-Sham energy functionals on molecular grids.

All electronic terms are grid sums; the Hartree term is a pairwise sum with
the singular i = j diagonal excluded.  Every term accepts either the full
grid or a without-replacement minibatch, in which case the unbiasing factors
n/m (single sums) and n(n-1)/(m(m-1)) (pair sums) are applied.

The formulas are written against the `autodiff` dispatch helpers, so the
same code path produces plain floats (reporting) or tape nodes (gradients).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import ortho
from .chem import Molecule, nuclear_repulsion
from .orbitals import AOBasis, ao_tables
from .quadrature import Grid, Minibatch

__all__ = [
    "EnergyBreakdown", "XC_FUNCTIONALS", "xc_energy_density", "xc_potentials",
    "kinetic_energy", "external_energy", "hartree_energy", "xc_energy",
    "total_energy", "minibatch_energy", "GridTables", "make_tables",
    "external_potential", "hartree_potential_chunked",
]

XC_FUNCTIONALS = ("lda_x", "lda_x_vwn")

_CHUNK = 4096

# spin-scaled Dirac exchange prefactor -(3/4)(6/pi)^(1/3)
_CX = -0.75 * (6.0 / math.pi) ** (1.0 / 3.0)

_RS_C = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
_RHO_FLOOR = 1e-12

# VWN parameterization: paramagnetic, ferromagnetic, spin stiffness
_VWN_P = (0.0310907, 3.72744, 12.9352, -0.10498)
_VWN_F = (0.01554535, 7.06042, 18.0578, -0.32500)
_VWN_A = (-1.0 / (6.0 * math.pi ** 2), 1.13107, 13.0045, -0.00475840)
_FPP0 = 4.0 / (9.0 * (2.0 ** (1.0 / 3.0) - 1.0))


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    external: float
    hartree: float
    xc: float
    nuclear: float
    total: float

    def __post_init__(self):
        parts = self.kinetic + self.external + self.hartree + self.xc + self.nuclear
        if abs(parts - self.total) > 1e-12 * max(1.0, abs(self.total)):
            raise ValueError("total energy does not match the sum of its parts")

    @classmethod
    def from_parts(cls, kinetic, external, hartree, xc, nuclear):
        return cls(kinetic=kinetic, external=external, hartree=hartree, xc=xc,
                   nuclear=nuclear,
                   total=kinetic + external + hartree + xc + nuclear)

    def electronic(self) -> float:
        return self.total - self.nuclear

    def as_dict(self) -> dict:
        return {"kinetic": self.kinetic, "external": self.external,
                "hartree": self.hartree, "xc": self.xc,
                "nuclear": self.nuclear, "total": self.total}


def _check_functional(functional: str):
    if functional not in XC_FUNCTIONALS:
        raise ValueError(f"functional must be one of {XC_FUNCTIONALS}")


# ----------------------------------------------------------------------
# exchange-correlation energy density (per volume) and potentials

def xc_energy_density(rho_a, rho_b, functional: str):
    """e_xc(rho_a, rho_b) such that E_xc = sum_i w_i e_xc(x_i)."""
    _check_functional(functional)
    e = _CX * (rho_a ** (4.0 / 3.0) + rho_b ** (4.0 / 3.0))
    if functional == "lda_x_vwn":
        e = e + _vwn5_density(rho_a, rho_b)
    return e


def _vwn_eps(rs_x, params):
    """Correlation fit evaluated at x = sqrt(r_s)."""
    a, b, c, x0 = params
    q = math.sqrt(4.0 * c - b * b)
    xx = rs_x * rs_x + b * rs_x + c
    xx0 = x0 * x0 + b * x0 + c
    atan_term = ad.arctan(q / (2.0 * rs_x + b))
    return a * (
        ad.log(rs_x * rs_x / xx) + (2.0 * b / q) * atan_term
        - (b * x0 / xx0) * (ad.log((rs_x - x0) ** 2 / xx)
                            + (2.0 * (b + 2.0 * x0) / q) * atan_term)
    )


def _vwn5_density(rho_a, rho_b):
    """VWN correlation energy per volume for spin densities."""
    rho = rho_a + rho_b
    mask = ad.value_of(rho) > _RHO_FLOOR
    rho_s = ad.maximum(rho, _RHO_FLOOR)
    rs = _RS_C * rho_s ** (-1.0 / 3.0)
    xs = ad.sqrt(rs)
    eps_p = _vwn_eps(xs, _VWN_P)
    eps_f = _vwn_eps(xs, _VWN_F)
    alpha = _vwn_eps(xs, _VWN_A)
    zeta = (rho_a - rho_b) / rho_s
    fz = ((1.0 + zeta) ** (4.0 / 3.0) + (1.0 - zeta) ** (4.0 / 3.0) - 2.0) \
        / (2.0 ** (4.0 / 3.0) - 2.0)
    z4 = zeta ** 4
    eps = eps_p + alpha * (fz / _FPP0) * (1.0 - z4) + (eps_f - eps_p) * fz * z4
    return ad.where(mask, rho_s * eps, ad.value_of(rho) * 0.0)


def xc_potentials(rho_a: np.ndarray, rho_b: np.ndarray, functional: str):
    """Pointwise potentials v_xc^sigma = d e_xc / d rho_sigma.

    Obtained by differentiating the energy-density code itself, so the SCF
    Hamiltonian is the exact functional derivative of the energy in use.
    """
    va = ad.Var(np.asarray(rho_a, dtype=np.float64))
    vb = ad.Var(np.asarray(rho_b, dtype=np.float64))
    e = ad.vsum(xc_energy_density(va, vb, functional))
    ad.backward(e)
    return va.grad, vb.grad


# ----------------------------------------------------------------------
# grid tables and batching helpers

@dataclass(eq=False)
class GridTables:
    """Per-run constants: AO values/Laplacians and v_ext on the grid."""

    grid: Grid
    values: np.ndarray        # (n, B)
    laplacians: np.ndarray    # (n, B)
    vext: np.ndarray          # (n,)


def external_potential(mol: Molecule, points: np.ndarray) -> np.ndarray:
    """v_ext(r) = -sum_A Z_A / |r - R_A| (grids never sample the nuclei)."""
    pos = mol.positions()
    z = mol.charges()
    d = np.linalg.norm(points[:, None, :] - pos[None, :, :], axis=2)
    return -(z / d).sum(axis=1)


def make_tables(basis: AOBasis, mol: Molecule, grid: Grid,
                ao: tuple[np.ndarray, np.ndarray] | None = None) -> GridTables:
    vals, laps = ao if ao is not None else ao_tables(basis, grid.points)
    return GridTables(grid=grid, values=vals, laplacians=laps,
                      vext=external_potential(mol, grid.points))


def _resolve(grid_or_batch):
    """-> (grid, indices or None, single_scale, pair_scale)"""
    if isinstance(grid_or_batch, Minibatch):
        b = grid_or_batch
        return b.grid, b.indices, b.single_scale, b.pair_scale
    if isinstance(grid_or_batch, Grid):
        return grid_or_batch, None, 1.0, 1.0
    raise TypeError("expected a Grid or Minibatch")


def _coefficients(params: ortho.OrbitalParams, basis: AOBasis):
    d = ortho.whitening_matrix(basis.overlap, params.scheme)
    ca = ortho.orthonormal_coefficients(params, d, "alpha")
    cb = ortho.orthonormal_coefficients(params, d, "beta")
    return ca, cb


def _tables_at(params, basis: AOBasis, mol: Molecule, grid: Grid, idx):
    """AO values/laplacians and v_ext at the selected points.

    Uses the plain basis, or the warped basis when params carries an active
    neural transform.
    """
    pts = grid.points if idx is None else grid.points[idx]
    theta = getattr(params, "theta", None)
    if theta is not None:
        from . import neural

        vals, laps = neural.warped_tables(theta, basis, pts)
    else:
        vals, laps = ao_tables(basis, pts)
    return vals, laps, external_potential(mol, pts)


# ----------------------------------------------------------------------
# generic electronic terms (ndarray or tape Var inputs)

def _kinetic_term(ca, cb, vals, laps, w, s1):
    total = None
    for c in (ca, cb):
        psi = ad.matmul(vals, c.T)
        psil = ad.matmul(laps, c.T)
        t = ad.vsum(psi * psil, axis=1)
        total = t if total is None else total + t
    return (-0.5 * s1) * ad.vsum(w * total)


def _densities(ca, cb, vals):
    psi_a = ad.matmul(vals, ca.T)
    psi_b = ad.matmul(vals, cb.T)
    rho_a = ad.vsum(psi_a * psi_a, axis=1)
    rho_b = ad.vsum(psi_b * psi_b, axis=1)
    return rho_a, rho_b


def _external_term(rho, w, vext, s1):
    return s1 * ad.vsum((w * vext) * rho)


def _xc_term(rho_a, rho_b, w, s1, functional):
    return s1 * ad.vsum(w * xc_energy_density(rho_a, rho_b, functional))


def pair_kernel(points: np.ndarray) -> np.ndarray:
    """1/|x_i - x_j| with a zeroed diagonal (the excluded singular terms)."""
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    return 1.0 / d


def _hartree_dense(w_rho, kernel, s2):
    t = ad.matmul(kernel, w_rho)
    return (0.5 * s2) * ad.vsum(w_rho * t)


def hartree_potential_chunked(points: np.ndarray, w_rho: np.ndarray,
                              chunk: int = _CHUNK) -> np.ndarray:
    """t_i = sum_{j != i} w_j rho_j / |x_i - x_j|, row-chunked."""
    n = points.shape[0]
    t = np.empty(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        blk = points[start:stop]
        d = np.linalg.norm(blk[:, None, :] - points[None, :, :], axis=2)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        t[start:stop] = (1.0 / d) @ w_rho
    return t


def _electronic_parts(ca, cb, vals, laps, w, vext, points, s1, s2,
                      functional, kernel=None):
    """All four electronic terms; Hartree dense if a kernel is given,
    else row-chunked (reporting path)."""
    kin = _kinetic_term(ca, cb, vals, laps, w, s1)
    rho_a, rho_b = _densities(ca, cb, vals)
    ext = _external_term(rho_a + rho_b, w, vext, s1)
    exc = _xc_term(rho_a, rho_b, w, s1, functional)
    w_rho = w * (rho_a + rho_b)
    if kernel is not None:
        har = _hartree_dense(w_rho, kernel, s2)
    else:
        t = hartree_potential_chunked(points, ad.value_of(w_rho))
        har = 0.5 * s2 * np.sum(ad.value_of(w_rho) * t)
    return kin, ext, har, exc


# ----------------------------------------------------------------------
# public per-term operations (reporting paths, plain floats)

def kinetic_energy(params, basis: AOBasis, grid_or_batch) -> float:
    grid, idx, s1, _ = _resolve(grid_or_batch)
    ca, cb = _coefficients(params, basis)
    vals, laps, _ = _tables_at(params, basis, basis.mol, grid, idx)
    w = grid.weights if idx is None else grid.weights[idx]
    return float(_kinetic_term(ca, cb, vals, laps, w, s1))


def external_energy(params, basis: AOBasis, mol: Molecule, grid_or_batch) -> float:
    grid, idx, s1, _ = _resolve(grid_or_batch)
    ca, cb = _coefficients(params, basis)
    vals, _, vext = _tables_at(params, basis, mol, grid, idx)
    w = grid.weights if idx is None else grid.weights[idx]
    rho_a, rho_b = _densities(ca, cb, vals)
    return float(_external_term(rho_a + rho_b, w, vext, s1))


def hartree_energy(params, basis: AOBasis, grid_or_batch) -> float:
    grid, idx, _, s2 = _resolve(grid_or_batch)
    ca, cb = _coefficients(params, basis)
    vals, _, _ = _tables_at(params, basis, basis.mol, grid, idx)
    pts = grid.points if idx is None else grid.points[idx]
    w = grid.weights if idx is None else grid.weights[idx]
    rho_a, rho_b = _densities(ca, cb, vals)
    w_rho = w * (rho_a + rho_b)
    if pts.shape[0] <= _CHUNK:
        return float(_hartree_dense(w_rho, pair_kernel(pts), s2))
    t = hartree_potential_chunked(pts, w_rho)
    return float(0.5 * s2 * np.sum(w_rho * t))


def xc_energy(params, basis: AOBasis, grid_or_batch, functional: str) -> float:
    _check_functional(functional)
    grid, idx, s1, _ = _resolve(grid_or_batch)
    ca, cb = _coefficients(params, basis)
    vals, _, _ = _tables_at(params, basis, basis.mol, grid, idx)
    w = grid.weights if idx is None else grid.weights[idx]
    rho_a, rho_b = _densities(ca, cb, vals)
    if np.any(ad.value_of(rho_a) < 0) or np.any(ad.value_of(rho_b) < 0):
        raise ValueError("negative density input")
    return float(_xc_term(rho_a, rho_b, w, s1, functional))


def electronic_energy_of_coefficients(ca, cb, tables: GridTables,
                                      functional: str, batch: Minibatch | None = None,
                                      kernel: np.ndarray | None = None):
    """Electronic energy pieces for explicit coefficient matrices.

    With a batch, `kernel` may carry the precomputed in-batch pair kernel.
    Returns (kinetic, external, hartree, xc) as floats or tape nodes.
    """
    if batch is None:
        vals, laps = tables.values, tables.laplacians
        w, vext, pts = tables.grid.weights, tables.vext, tables.grid.points
        s1 = s2 = 1.0
        if kernel is None and tables.grid.n <= _CHUNK:
            kernel = pair_kernel(pts)
    else:
        idx = batch.indices
        vals, laps = tables.values[idx], tables.laplacians[idx]
        w, vext, pts = tables.grid.weights[idx], tables.vext[idx], tables.grid.points[idx]
        s1, s2 = batch.single_scale, batch.pair_scale
        if kernel is None:
            kernel = pair_kernel(pts)
    return _electronic_parts(ca, cb, vals, laps, w, vext, pts, s1, s2,
                             functional, kernel=kernel)


def total_energy(params, basis: AOBasis, mol: Molecule, grid: Grid,
                 functional: str) -> EnergyBreakdown:
    """Full-grid energy breakdown (the reporting path)."""
    _check_functional(functional)
    ca, cb = _coefficients(params, basis)
    vals, laps, vext = _tables_at(params, basis, mol, grid, None)
    kernel = pair_kernel(grid.points) if grid.n <= _CHUNK else None
    kin, ext, har, exc = _electronic_parts(
        ca, cb, vals, laps, grid.weights, vext, grid.points, 1.0, 1.0,
        functional, kernel=kernel)
    return EnergyBreakdown.from_parts(float(kin), float(ext), float(har),
                                      float(exc), nuclear_repulsion(mol))


def minibatch_energy(params, basis: AOBasis, mol: Molecule, batch: Minibatch,
                     functional: str) -> float:
    """Unbiased electronic-energy estimate on a minibatch."""
    _check_functional(functional)
    ca, cb = _coefficients(params, basis)
    vals, laps, vext = _tables_at(params, basis, mol, batch.grid, batch.indices)
    w = batch.grid.weights[batch.indices]
    pts = batch.grid.points[batch.indices]
    kin, ext, har, exc = _electronic_parts(
        ca, cb, vals, laps, w, vext, pts, batch.single_scale,
        batch.pair_scale, functional, kernel=pair_kernel(pts))
    return float(kin) + float(ext) + float(har) + float(exc)
