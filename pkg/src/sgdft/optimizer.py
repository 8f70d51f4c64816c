"""Direct minimization of the grid energy over orbital (and basis) parameters.

Each step draws a without-replacement minibatch of grid points, evaluates
the unbiased electronic-energy estimate on the tape, and updates W (and the
scaling-network parameters when active) by Adam or plain SGD.  Full-grid
energies are evaluated at every epoch boundary; the run stops when their
standard deviation over a trailing window falls below tolerance.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import energy as energy_mod
from . import neural as neural_mod
from . import ortho
from .chem import Molecule, build_basis, nuclear_repulsion
from .energy import EnergyBreakdown, GridTables, make_tables, pair_kernel
from .orbitals import AOBasis
from .quadrature import Grid, Minibatch, build_molecular_grid

__all__ = ["OptimizerConfig", "Trace", "TraceRow", "AdamState", "adam_step",
           "lr_schedule", "energy_gradient", "run_direct", "RunResult",
           "DivergenceError"]


class DivergenceError(RuntimeError):
    """The full-grid energy left the trust region of the initial value."""


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str = "adam"
    lr0: float = 0.1
    decay_epochs: tuple[int, ...] = (60,)
    decay_factor: float = 0.1
    max_epochs: int = 200
    batch_size: int = 1024
    seed: int = 0
    window: int = 20
    tol: float = 1e-5

    def __post_init__(self):
        if self.algorithm not in ("adam", "sgd"):
            raise ValueError("algorithm must be 'adam' or 'sgd'")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.window < 2:
            raise ValueError("convergence window must be >= 2")


@dataclass
class TraceRow:
    epoch: int
    step: int
    batch_energy: float
    full_energy: float | None
    lr: float
    wall_ms: float


@dataclass
class Trace:
    rows: list[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow):
        self.rows.append(row)

    def full_energies(self) -> list[float]:
        return [r.full_energy for r in self.rows if r.full_energy is not None]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "step", "batch_energy", "full_energy",
                             "lr", "wall_ms"])
            for r in self.rows:
                writer.writerow([
                    r.epoch, r.step, repr(r.batch_energy),
                    "" if r.full_energy is None else repr(r.full_energy),
                    repr(r.lr), f"{r.wall_ms:.3f}",
                ])


def lr_schedule(epoch: int, config: OptimizerConfig) -> float:
    lr = config.lr0
    for e in config.decay_epochs:
        if epoch >= e:
            lr *= config.decay_factor
    return lr


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params):
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(state: AdamState, grads, lr: float, params):
    """One bias-corrected Adam update; returns the new parameter list."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        mhat = state.m[i] / (1.0 - b1 ** state.t)
        vhat = state.v[i] / (1.0 - b2 ** state.t)
        out.append(p - lr * mhat / (np.sqrt(vhat) + state.eps))
    return out


def _tape_minibatch_energy(w_a, w_b, theta_struct, basis, tables: GridTables,
                           batch: Minibatch, functional: str, d_matrix):
    """Electronic minibatch energy as a tape node."""
    idx = batch.indices
    pts = tables.grid.points[idx]
    w = tables.grid.weights[idx]
    vext = tables.vext[idx]
    if theta_struct is not None:
        vals, laps = neural_mod.warped_tables(theta_struct, basis, pts)
    else:
        vals, laps = tables.values[idx], tables.laplacians[idx]
    c_a = ad.matmul(ortho.qr_positive_tape(w_a).T, d_matrix)
    c_b = ad.matmul(ortho.qr_positive_tape(w_b).T, d_matrix)
    kin, ext, har, exc = energy_mod._electronic_parts(
        c_a, c_b, vals, laps, w, vext, pts, batch.single_scale,
        batch.pair_scale, functional, kernel=pair_kernel(pts))
    return kin + ext + har + exc


def energy_gradient(params: ortho.OrbitalParams, basis: AOBasis, mol: Molecule,
                    batch: Minibatch, functional: str,
                    tables: GridTables | None = None):
    """Gradient of the minibatch energy w.r.t. (W_alpha, W_beta[, theta]).

    Returns (batch_energy, grad_w_alpha, grad_w_beta, theta_grads_or_None).
    """
    if tables is None:
        tables = make_tables(basis, mol, batch.grid)
    d = ortho.whitening_matrix(basis.overlap, params.scheme)
    w_a = ad.Var(params.w_alpha)
    w_b = ad.Var(params.w_beta)
    theta_struct = theta_leaves = None
    if params.theta is not None:
        theta_struct, theta_leaves = neural_mod.theta_as_vars(params.theta)
    e = _tape_minibatch_energy(w_a, w_b, theta_struct, basis, tables,
                               batch, functional, d)
    ad.backward(e)
    theta_grads = [leaf.grad for leaf in theta_leaves] if theta_leaves else None
    return float(e.value), w_a.grad, w_b.grad, theta_grads


@dataclass
class RunResult:
    params: ortho.OrbitalParams
    energy: EnergyBreakdown
    trace: Trace
    converged: bool
    epochs: int


def _full_breakdown(params, basis, mol, tables, functional) -> EnergyBreakdown:
    """Full-grid breakdown, reusing cached tables on the plain path."""
    if params.theta is not None:
        return energy_mod.total_energy(params, basis, mol, tables.grid, functional)
    ca, cb = energy_mod._coefficients(params, basis)
    kin, ext, har, exc = energy_mod.electronic_energy_of_coefficients(
        ca, cb, tables, functional)
    return EnergyBreakdown.from_parts(float(kin), float(ext), float(har),
                                      float(exc), nuclear_repulsion(mol))


def run_direct(mol: Molecule, basis_name: str, functional: str, grid_level: int,
               config: OptimizerConfig, scheme: str = "pca",
               neural_transform: neural_mod.MLPParams | None = None,
               grid: Grid | None = None) -> RunResult:
    """Direct-minimization training loop; returns the best full-grid result."""
    basis = build_basis(basis_name, mol)
    if grid is None:
        grid = build_molecular_grid(mol, grid_level)
    tables = make_tables(basis, mol, grid)
    rng = np.random.default_rng(config.seed)
    w_a = ortho.random_init(basis.B, mol.n_alpha, rng)
    w_b = ortho.random_init(basis.B, mol.n_beta, rng)
    params = ortho.OrbitalParams(w_a, w_b, scheme=scheme, theta=neural_transform)
    d = ortho.whitening_matrix(basis.overlap, scheme)

    m = min(config.batch_size, grid.n)
    if m < 2:
        raise ValueError("grid too small for minibatch optimization")
    steps_per_epoch = max(1, grid.n // m)

    theta = neural_transform
    adam = None
    trace = Trace()
    history: list[float] = []
    best: tuple[float, ortho.OrbitalParams, EnergyBreakdown] | None = None
    e0 = None
    converged = False
    epochs_run = 0
    t_start = time.perf_counter()

    for epoch in range(config.max_epochs):
        lr = lr_schedule(epoch, config)
        perm = rng.permutation(grid.n)
        last_row = None
        for step in range(steps_per_epoch):
            idx = np.sort(perm[step * m:(step + 1) * m])
            batch = Minibatch(grid=grid, indices=idx)
            e_batch, g_a, g_b, g_theta = energy_gradient(
                params, basis, mol, batch, functional, tables=tables)
            plist = [params.w_alpha, params.w_beta]
            glist = [g_a, g_b]
            if theta is not None:
                plist = plist + neural_mod.theta_arrays(theta)
                glist = glist + g_theta
            if config.algorithm == "adam":
                if adam is None:
                    adam = AdamState.init(plist)
                plist = adam_step(adam, glist, lr, plist)
            else:
                plist = [p - lr * g for p, g in zip(plist, glist)]
            if theta is not None:
                theta = neural_mod.theta_from_arrays(theta, plist[2:])
            params = ortho.OrbitalParams(plist[0], plist[1], scheme=scheme,
                                         theta=theta)
            last_row = TraceRow(epoch=epoch, step=epoch * steps_per_epoch + step,
                                batch_energy=e_batch, full_energy=None, lr=lr,
                                wall_ms=(time.perf_counter() - t_start) * 1e3)
            trace.append(last_row)

        breakdown = _full_breakdown(params, basis, mol, tables, functional)
        last_row.full_energy = breakdown.total
        history.append(breakdown.total)
        epochs_run = epoch + 1
        if e0 is None:
            e0 = breakdown.total
        elif abs(breakdown.total) > 10.0 * abs(e0):
            raise DivergenceError(
                f"full-grid energy {breakdown.total:.6f} exceeds 10x its "
                f"initial magnitude {e0:.6f}")
        if best is None or breakdown.total < best[0]:
            best = (breakdown.total, params, breakdown)
        if len(history) >= config.window:
            if float(np.std(history[-config.window:])) < config.tol:
                converged = True
                break

    _, best_params, best_breakdown = best
    return RunResult(params=best_params, energy=best_breakdown, trace=trace,
                     converged=converged, epochs=epochs_run)
