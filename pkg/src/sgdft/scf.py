"""Self-consistent field baseline and self-consistency verification.

The Fock matrix is assembled on the same grid with the same potentials the
direct path differentiates (v_xc comes from differentiating the packaged
energy density), so the two optimizers target the same stationary points.
The generalized eigenproblem F c = eps S c is solved through the whitening
transform, and convergence is measured by the grid-integrated absolute
density change.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import energy as energy_mod
from . import linalg, ortho
from .chem import Molecule, build_basis, nuclear_repulsion
from .energy import EnergyBreakdown, GridTables, make_tables
from .orbitals import AOBasis
from .quadrature import Grid, build_molecular_grid

__all__ = ["FockPair", "ScfResult", "ResidualReport", "fock_matrix",
           "scf_solve", "self_consistency_residual"]

_FOCK_SYM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FockPair:
    f_alpha: np.ndarray
    f_beta: np.ndarray

    def __post_init__(self):
        for f in (self.f_alpha, self.f_beta):
            scale = max(np.max(np.abs(f)), 1.0)
            if np.max(np.abs(f - f.T)) > _FOCK_SYM_TOL * scale:
                raise ValueError("Fock matrix lost symmetry")

    def spin(self, label: str) -> np.ndarray:
        return self.f_alpha if label == "alpha" else self.f_beta


@dataclass(eq=False)
class ScfResult:
    c_alpha: np.ndarray
    c_beta: np.ndarray
    eps_alpha: np.ndarray
    eps_beta: np.ndarray
    energy: EnergyBreakdown
    iterations: int
    converged: bool
    energy_history: list[float] = field(default_factory=list)


def _spin_density(c: np.ndarray, vals: np.ndarray) -> np.ndarray:
    if c.shape[0] == 0:
        return np.zeros(vals.shape[0])
    psi = vals @ c.T
    return np.sum(psi * psi, axis=1)


def fock_matrix(c_alpha: np.ndarray, c_beta: np.ndarray, basis: AOBasis,
                mol: Molecule, grid: Grid, functional: str,
                tables: GridTables | None = None) -> FockPair:
    """Kohn-Sham matrix in the AO basis from grid sums (full grid only)."""
    if tables is None:
        tables = make_tables(basis, mol, grid)
    vals, laps = tables.values, tables.laplacians
    w = grid.weights
    rho_a = _spin_density(np.asarray(c_alpha), vals)
    rho_b = _spin_density(np.asarray(c_beta), vals)

    v_h = energy_mod.hartree_potential_chunked(grid.points, w * (rho_a + rho_b))
    v_xc_a, v_xc_b = energy_mod.xc_potentials(rho_a, rho_b, functional)

    t = vals.T @ (w[:, None] * (-0.5 * laps))
    t = 0.5 * (t + t.T)
    shared = tables.vext + v_h
    f_a = t + vals.T @ ((w * (shared + v_xc_a))[:, None] * vals)
    f_b = t + vals.T @ ((w * (shared + v_xc_b))[:, None] * vals)
    return FockPair(f_alpha=f_a, f_beta=f_b)


def _occupy(f: np.ndarray, d: np.ndarray, n_occ: int):
    """Lowest-n_occ solutions of F c = eps S c via the whitening transform."""
    ft = d @ f @ d.T
    ft = 0.5 * (ft + ft.T)
    eps, vec = linalg.sym_eigh(ft)
    c_full = vec.T @ d                      # rows are S-orthonormal orbitals
    return c_full[:n_occ], eps[:n_occ]


def scf_solve(mol: Molecule, basis_name: str, functional: str, grid_level: int,
              mixing: float = 0.9, max_iter: int = 100, tol: float = 1e-6,
              scheme: str = "pca", grid: Grid | None = None,
              basis: AOBasis | None = None) -> ScfResult:
    """Fixed-point iteration with Fock-matrix momentum.

    `mixing` is the weight of the previous mixed Fock matrix.  If the
    momentum run stalls, one fallback pass with mixing = 0 continues from
    the current orbitals (up to another max_iter iterations).
    """
    if basis is None:
        basis = build_basis(basis_name, mol)
    if grid is None:
        grid = build_molecular_grid(mol, grid_level)
    tables = make_tables(basis, mol, grid)
    d = ortho.whitening_matrix(basis.overlap, scheme)
    e_nuc = nuclear_repulsion(mol)

    # core guess: kinetic + external blocks only (zero density)
    t = tables.values.T @ (grid.weights[:, None] * (-0.5 * tables.laplacians))
    t = 0.5 * (t + t.T)
    v_ext = tables.values.T @ ((grid.weights * tables.vext)[:, None] * tables.values)
    core = t + v_ext
    c_a, eps_a = _occupy(core, d, mol.n_alpha)
    c_b, eps_b = _occupy(core, d, mol.n_beta)

    rho_old = _spin_density(c_a, tables.values) + _spin_density(c_b, tables.values)
    history: list[float] = []
    iterations = 0
    converged = False

    for phase_mixing in ([mixing, 0.0] if mixing > 0 else [0.0]):
        f_mix_a = f_mix_b = None
        for _ in range(max_iter):
            iterations += 1
            fock = fock_matrix(c_a, c_b, basis, mol, grid, functional, tables=tables)
            if f_mix_a is None:
                f_mix_a, f_mix_b = fock.f_alpha, fock.f_beta
            else:
                f_mix_a = phase_mixing * f_mix_a + (1.0 - phase_mixing) * fock.f_alpha
                f_mix_b = phase_mixing * f_mix_b + (1.0 - phase_mixing) * fock.f_beta
            c_a, eps_a = _occupy(f_mix_a, d, mol.n_alpha)
            c_b, eps_b = _occupy(f_mix_b, d, mol.n_beta)
            rho_new = _spin_density(c_a, tables.values) + _spin_density(c_b, tables.values)
            delta = float(np.sum(grid.weights * np.abs(rho_new - rho_old)))
            rho_old = rho_new
            kin, ext, har, exc = energy_mod.electronic_energy_of_coefficients(
                c_a, c_b, tables, functional)
            history.append(float(kin) + float(ext) + float(har) + float(exc) + e_nuc)
            if delta < tol:
                converged = True
                break
        if converged:
            break

    kin, ext, har, exc = energy_mod.electronic_energy_of_coefficients(
        c_a, c_b, tables, functional)
    breakdown = EnergyBreakdown.from_parts(float(kin), float(ext), float(har),
                                           float(exc), e_nuc)
    return ScfResult(c_alpha=c_a, c_beta=c_b, eps_alpha=eps_a, eps_beta=eps_b,
                     energy=breakdown, iterations=iterations, converged=converged,
                     energy_history=history)


@dataclass(frozen=True, eq=False)
class ResidualReport:
    subspace: float
    per_orbital: dict
    eigenvalues: dict


def self_consistency_residual(orbitals_or_params, basis: AOBasis, mol: Molecule,
                              grid: Grid, functional: str) -> ResidualReport:
    """How far the occupied subspace is from an invariant subspace of its
    own Hamiltonian.

    Accepts OrbitalParams or an explicit (C_alpha, C_beta) pair.  The
    subspace residual is max_sigma ||F C^T - S C^T (C F C^T)||_F / ||F||_F;
    diagonalizing C F C^T gives canonical orbitals and per-orbital residuals
    ||F c - eps S c||_2.
    """
    if isinstance(orbitals_or_params, ortho.OrbitalParams):
        params = orbitals_or_params
        d = ortho.whitening_matrix(basis.overlap, params.scheme)
        c_a = ortho.orthonormal_coefficients(params, d, "alpha")
        c_b = ortho.orthonormal_coefficients(params, d, "beta")
        theta = params.theta
    else:
        c_a, c_b = orbitals_or_params
        theta = None

    s = basis.overlap
    for c in (c_a, c_b):
        if c.shape[0] and np.max(np.abs(c @ s @ c.T - np.eye(c.shape[0]))) > 1e-6:
            raise ValueError("orbitals are not S-orthonormal")

    if theta is not None:
        from . import neural

        vals, laps = neural.warped_tables(theta, basis, grid.points)
        tables = make_tables(basis, mol, grid, ao=(vals, laps))
    else:
        tables = make_tables(basis, mol, grid)
    fock = fock_matrix(c_a, c_b, basis, mol, grid, functional, tables=tables)

    subspace = 0.0
    per_orbital = {}
    eigenvalues = {}
    for label, c in (("alpha", c_a), ("beta", c_b)):
        if c.shape[0] == 0:
            per_orbital[label] = np.zeros(0)
            eigenvalues[label] = np.zeros(0)
            continue
        f = fock.spin(label)
        m = c @ f @ c.T
        resid = f @ c.T - s @ c.T @ m
        subspace = max(subspace, float(np.linalg.norm(resid) / np.linalg.norm(f)))
        eps, u = linalg.sym_eigh(0.5 * (m + m.T))
        c_can = u.T @ c
        r = f @ c_can.T - s @ c_can.T @ np.diag(eps)
        per_orbital[label] = np.linalg.norm(r, axis=0)
        eigenvalues[label] = eps
    return ResidualReport(subspace=subspace, per_orbital=per_orbital,
                          eigenvalues=eigenvalues)
