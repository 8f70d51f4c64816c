"""Molecular integration grids and unbiased minibatch sampling.

Grid construction: per-atom products of a Gauss-Chebyshev (2nd kind) radial
rule mapped through r = R_m (1+x)/(1-x), and tabulated angular rules on the
unit sphere, with smoothed Voronoi (fuzzy cell) partition weights folded in.
Deterministic for fixed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .chem import BOHR_PER_ANGSTROM, Molecule

__all__ = ["Grid", "Minibatch", "build_molecular_grid", "becke_partition",
           "sample_minibatch", "integrate", "GRID_LEVELS"]

# level -> (n_radial, n_angular)
GRID_LEVELS = {1: (20, 26), 2: (30, 38), 3: (50, 86), 4: (75, 194), 5: (100, 302)}

# Bragg-Slater radii in angstrom, indexed by atomic number (H-Ar).
_BRAGG_ANGSTROM = {
    1: 0.35, 2: 1.40, 3: 1.45, 4: 1.05, 5: 0.85, 6: 0.70, 7: 0.65, 8: 0.60,
    9: 0.50, 10: 1.50, 11: 1.80, 12: 1.50, 13: 1.25, 14: 1.10, 15: 1.00,
    16: 1.00, 17: 1.00, 18: 1.88,
}


@dataclass(frozen=True, eq=False)
class Grid:
    points: np.ndarray    # (n, 3) bohr
    weights: np.ndarray   # (n,) positive

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        wts = np.asarray(self.weights, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or wts.shape != (pts.shape[0],):
            raise ValueError("grid points must be (n,3) with matching weights")
        if np.any(wts <= 0.0):
            raise ValueError("grid weights must be positive")
        pts = pts.copy()
        wts = wts.copy()
        pts.flags.writeable = False
        wts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class Minibatch:
    """A without-replacement sample of grid points with unbiasing factors."""

    grid: Grid
    indices: np.ndarray   # (m,) distinct ints

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).copy()
        if idx.ndim != 1 or len(np.unique(idx)) != idx.size:
            raise ValueError("minibatch indices must be distinct")
        if idx.size < 2:
            raise ValueError("minibatch needs at least 2 points")
        if idx.min() < 0 or idx.max() >= self.grid.n:
            raise ValueError("minibatch index out of range")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)

    @property
    def m(self) -> int:
        return self.indices.size

    @property
    def single_scale(self) -> float:
        return self.grid.n / self.m

    @property
    def pair_scale(self) -> float:
        n, m = self.grid.n, self.m
        return n * (n - 1) / (m * (m - 1))


@lru_cache(maxsize=None)
def _angular_rule(n_ang: int):
    ref = resources.files("sgdft.data.lebedev") / f"lebedev_{n_ang:03d}.txt"
    rows = []
    for line in ref.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append([float(t) for t in line.split()])
    arr = np.array(rows)
    if arr.shape[0] != n_ang:
        raise ValueError(f"angular table {n_ang} is corrupt")
    pts, wts = arr[:, :3], arr[:, 3]
    pts.flags.writeable = False
    wts.flags.writeable = False
    return pts, wts


def _radial_rule(n_rad: int, r_m: float):
    """Gauss-Chebyshev (2nd kind) points mapped to (0, inf).

    Weights absorb the r^2 volume factor and the map Jacobian, so
    sum_i w_i f(r_i) ~ int_0^inf f(r) r^2 dr.
    """
    i = np.arange(1, n_rad + 1)
    theta = i * math.pi / (n_rad + 1)
    x = np.cos(theta)
    r = r_m * (1.0 + x) / (1.0 - x)
    w = (math.pi / (n_rad + 1)) * np.sin(theta) * r * r * 2.0 * r_m / (1.0 - x) ** 2
    return r, w


def _cutoff(mu: np.ndarray) -> np.ndarray:
    """Smoothing polynomial p(mu) = 1.5 mu - 0.5 mu^3, iterated 3 times."""
    f = mu
    for _ in range(3):
        f = 1.5 * f - 0.5 * f ** 3
    return f


def becke_partition(points: np.ndarray, weights: np.ndarray, mol: Molecule,
                    parents: np.ndarray | None = None) -> np.ndarray:
    """Multiply weights by the fuzzy-cell function of each point's parent atom.

    `parents` gives the owning atom index per point; if omitted, the nearest
    atom is assumed (correct for externally supplied scattered points).
    Single-atom molecules are returned unchanged.
    """
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    natom = len(mol.atoms)
    if natom == 1:
        return weights.copy()
    pos = mol.positions()
    dist = np.linalg.norm(points[:, None, :] - pos[None, :, :], axis=2)  # (n, A)
    if parents is None:
        parents = np.argmin(dist, axis=1)
    rij = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
    cell = np.ones((points.shape[0], natom))
    for i in range(natom):
        for j in range(natom):
            if i == j:
                continue
            mu = (dist[:, i] - dist[:, j]) / rij[i, j]
            cell[:, i] *= 0.5 * (1.0 - _cutoff(mu))
    total = cell.sum(axis=1)
    frac = cell[np.arange(points.shape[0]), parents] / total
    # points exactly on another atom's axis are fully screened (cell weight 0);
    # keep them at a denormal weight so grids stay strictly positive with the
    # level-table point count
    return np.maximum(weights * frac, 1e-300)


def build_molecular_grid(mol: Molecule, level: int) -> Grid:
    """Atom-centered product grid with partition weights folded in."""
    if level not in GRID_LEVELS:
        raise ValueError(f"grid level must be in {sorted(GRID_LEVELS)}")
    n_rad, n_ang = GRID_LEVELS[level]
    ang_pts, ang_wts = _angular_rule(n_ang)

    all_points, all_weights, all_parents = [], [], []
    for ai, atom in enumerate(mol.atoms):
        r_m = _BRAGG_ANGSTROM[atom.Z] * BOHR_PER_ANGSTROM
        rad, rad_w = _radial_rule(n_rad, r_m)
        pts = rad[:, None, None] * ang_pts[None, :, :] + atom.position
        wts = rad_w[:, None] * ang_wts[None, :]
        all_points.append(pts.reshape(-1, 3))
        all_weights.append(wts.reshape(-1))
        all_parents.append(np.full(n_rad * n_ang, ai, dtype=np.int64))

    points = np.concatenate(all_points)
    weights = np.concatenate(all_weights)
    parents = np.concatenate(all_parents)
    weights = becke_partition(points, weights, mol, parents=parents)
    return Grid(points=points, weights=weights)


def sample_minibatch(grid: Grid, m: int, rng) -> Minibatch:
    """Uniform sample of m distinct grid points; deterministic per rng state."""
    if not (2 <= m <= grid.n):
        raise ValueError(f"batch size must be in [2, {grid.n}], got {m}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    idx = rng.choice(grid.n, size=m, replace=False)
    return Minibatch(grid=grid, indices=np.sort(idx))


def integrate(grid: Grid, values: np.ndarray) -> float:
    """Weighted sum over the grid (deterministic pairwise reduction)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} values, got shape {values.shape}")
    return float(np.sum(grid.weights * values))
