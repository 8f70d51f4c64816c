"""Molecular geometry and basis-set ingestion.

Coordinates are stored in bohr, energies are in hartree throughout the
package.  Basis data is embedded as text resources (see data/basis) so
builds are hermetic; the supported element range is H-Ar with s and p
shells only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

__all__ = [
    "Atom", "Molecule", "Shell", "BOHR_PER_ANGSTROM", "ELEMENTS",
    "parse_xyz", "load_xyz", "nuclear_repulsion", "electron_counts",
    "with_multiplicity", "build_basis", "load_basis_shells",
]

BOHR_PER_ANGSTROM = 1.8897259886

ELEMENTS = {
    "H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8,
    "F": 9, "Ne": 10, "Na": 11, "Mg": 12, "Al": 13, "Si": 14, "P": 15,
    "S": 16, "Cl": 17, "Ar": 18,
}
SYMBOLS = {z: s for s, z in ELEMENTS.items()}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Atom:
    symbol: str
    Z: int
    position: np.ndarray  # (3,), bohr

    def __post_init__(self):
        if self.symbol not in ELEMENTS:
            raise ValueError(f"unknown element '{self.symbol}'")
        if ELEMENTS[self.symbol] != self.Z:
            raise ValueError(f"atomic number {self.Z} does not match '{self.symbol}'")
        object.__setattr__(self, "position", _frozen(self.position))
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")


@dataclass(frozen=True, eq=False)
class Molecule:
    atoms: tuple[Atom, ...]
    charge: int = 0
    n_alpha: int = 0
    n_beta: int = 0

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not self.atoms:
            raise ValueError("molecule needs at least one atom")
        if self.n_alpha + self.n_beta != self.nuclear_charge - self.charge:
            raise ValueError("electron counts inconsistent with charge")
        if not (self.n_alpha >= self.n_beta >= 0):
            raise ValueError("require n_alpha >= n_beta >= 0")

    @property
    def nuclear_charge(self) -> int:
        return sum(a.Z for a in self.atoms)

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta

    @property
    def multiplicity(self) -> int:
        return self.n_alpha - self.n_beta + 1

    def positions(self) -> np.ndarray:
        return np.array([a.position for a in self.atoms])

    def charges(self) -> np.ndarray:
        return np.array([float(a.Z) for a in self.atoms])


@dataclass(frozen=True, eq=False)
class Shell:
    """A contracted Gaussian shell; coefficients refer to normalized
    primitives and are rescaled at construction so the contracted function
    has unit self-overlap."""

    atom_index: int
    angular_momentum: int                 # 0 (s) or 1 (p)
    primitives: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.angular_momentum not in (0, 1):
            raise ValueError("only s and p shells are supported")
        if not self.primitives:
            raise ValueError("shell needs at least one primitive")
        prims = tuple((float(a), float(c)) for a, c in self.primitives)
        if any(a <= 0.0 for a, _ in prims):
            raise ValueError("primitive exponents must be positive")
        norm = _contracted_self_overlap(prims, self.angular_momentum)
        prims = tuple((a, c / math.sqrt(norm)) for a, c in prims)
        object.__setattr__(self, "primitives", prims)

    @property
    def exponents(self) -> np.ndarray:
        return np.array([a for a, _ in self.primitives])

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c in self.primitives])

    @property
    def n_functions(self) -> int:
        return 1 if self.angular_momentum == 0 else 3


def _contracted_self_overlap(prims, l) -> float:
    """Self-overlap of a contraction of normalized same-center primitives."""
    p = 1.5 if l == 0 else 2.5
    total = 0.0
    for a, ca in prims:
        for b, cb in prims:
            total += ca * cb * (2.0 * math.sqrt(a * b) / (a + b)) ** p
    if total <= 0.0:
        raise ValueError("contraction has non-positive self-overlap")
    return total


def electron_counts(mol: Molecule, multiplicity: int) -> tuple[int, int]:
    """Spin electron counts for a target multiplicity."""
    if multiplicity < 1:
        raise ValueError("multiplicity must be >= 1")
    nelec = mol.nuclear_charge - mol.charge
    if (nelec - multiplicity + 1) % 2 != 0:
        raise ValueError(
            f"multiplicity {multiplicity} has the wrong parity for {nelec} electrons")
    n_alpha = (nelec + multiplicity - 1) // 2
    n_beta = nelec - n_alpha
    if n_beta < 0:
        raise ValueError(f"multiplicity {multiplicity} needs more than {nelec} electrons")
    return n_alpha, n_beta


def with_multiplicity(mol: Molecule, multiplicity: int) -> Molecule:
    na, nb = electron_counts(mol, multiplicity)
    return Molecule(atoms=mol.atoms, charge=mol.charge, n_alpha=na, n_beta=nb)


def parse_xyz(text: str) -> Molecule:
    """Parse standard XYZ text (coordinates in angstrom).

    The comment line may carry `charge=<int>` and `mult=<int>` tokens;
    defaults are charge 0 and the lowest multiplicity.
    """
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty XYZ input")
    try:
        natoms = int(lines[0].split()[0])
    except (ValueError, IndexError):
        raise ValueError(f"malformed atom-count line: {lines[0]!r}") from None
    if len(lines) < natoms + 2:
        raise ValueError("XYZ input truncated")

    charge, mult = 0, None
    for token in lines[1].split():
        if token.startswith("charge="):
            charge = int(token.split("=", 1)[1])
        elif token.startswith("mult="):
            mult = int(token.split("=", 1)[1])

    atoms = []
    for line in lines[2:2 + natoms]:
        parts = line.split()
        if len(parts) < 4:
            raise ValueError(f"malformed atom line: {line!r}")
        sym = parts[0].capitalize()
        if sym not in ELEMENTS:
            raise ValueError(f"unknown element '{parts[0]}'")
        try:
            xyz = np.array([float(p) for p in parts[1:4]])
        except ValueError:
            raise ValueError(f"malformed atom line: {line!r}") from None
        atoms.append(Atom(sym, ELEMENTS[sym], xyz * BOHR_PER_ANGSTROM))

    nelec = sum(a.Z for a in atoms) - charge
    if nelec < 0:
        raise ValueError("charge exceeds total nuclear charge")
    if mult is None:
        mult = 1 if nelec % 2 == 0 else 2
    if (nelec - mult + 1) % 2 != 0:
        raise ValueError(f"multiplicity {mult} inconsistent with {nelec} electrons")
    n_alpha = (nelec + mult - 1) // 2
    n_beta = nelec - n_alpha
    if n_beta < 0:
        raise ValueError(f"multiplicity {mult} needs more than {nelec} electrons")
    return Molecule(atoms=tuple(atoms), charge=charge, n_alpha=n_alpha, n_beta=n_beta)


def load_xyz(path) -> Molecule:
    with open(path) as fh:
        return parse_xyz(fh.read())


def packaged_geometry(name: str) -> Molecule:
    """Load one of the geometries shipped with the package (e.g. 'h2')."""
    ref = resources.files("sgdft.data.geometries") / f"{name}.xyz"
    return parse_xyz(ref.read_text())


def nuclear_repulsion(mol: Molecule) -> float:
    """Sum of Z_i Z_j / |R_i - R_j| over nuclear pairs, in hartree."""
    pos = mol.positions()
    z = mol.charges()
    e = 0.0
    for i in range(len(z)):
        for j in range(i + 1, len(z)):
            rij = np.linalg.norm(pos[i] - pos[j])
            if rij < 1e-10:
                raise ValueError(f"coincident nuclei {i} and {j}")
            e += z[i] * z[j] / rij
    return e


_BASIS_CACHE: dict[str, dict[str, list[tuple[int, list[tuple[float, float]]]]]] = {}

SUPPORTED_BASES = ("sto-3g", "6-31g")


def _read_basis_file(name: str):
    if name in _BASIS_CACHE:
        return _BASIS_CACHE[name]
    if name not in SUPPORTED_BASES:
        raise ValueError(f"unknown basis set '{name}' (supported: {SUPPORTED_BASES})")
    ref = resources.files("sgdft.data.basis") / f"{name}.basis"
    blocks: dict[str, list] = {}
    element = None
    shells: list = []
    lines = [ln.strip() for ln in ref.read_text().splitlines()]
    i = 0
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line or line.startswith("#"):
            continue
        if line.startswith("ELEMENT"):
            element = line.split()[1]
            shells = []
        elif line.startswith("SHELL"):
            _, lsym, k = line.split()
            l = {"S": 0, "P": 1}.get(lsym)
            if l is None:
                raise ValueError(f"unsupported shell type '{lsym}' in {name}")
            prims = []
            for _ in range(int(k)):
                a, c = lines[i].split()
                prims.append((float(a), float(c)))
                i += 1
            shells.append((l, prims))
        elif line == "END":
            blocks[element] = shells
            element = None
        else:
            raise ValueError(f"malformed basis file line: {line!r}")
    _BASIS_CACHE[name] = blocks
    return blocks


def load_basis_shells(name: str, mol: Molecule) -> list[Shell]:
    """Expand the per-element basis data into shells for every atom."""
    blocks = _read_basis_file(name)
    shells = []
    for idx, atom in enumerate(mol.atoms):
        if atom.symbol not in blocks:
            raise ValueError(f"element '{atom.symbol}' missing from basis '{name}'")
        for l, prims in blocks[atom.symbol]:
            shells.append(Shell(atom_index=idx, angular_momentum=l, primitives=prims))
    return shells


def build_basis(name: str, mol: Molecule):
    """Build the atomic-orbital basis (with analytic overlap) for a molecule."""
    from . import orbitals

    return orbitals.AOBasis.build(mol, load_basis_shells(name, mol))
