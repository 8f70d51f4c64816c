"""Neural local-scaling basis transform.

A small MLP g(r) drives a radial scaling f(r) = lambda(r) * r with
lambda = alpha * sigmoid(g).  Warped basis functions

    phi~_i(r) = |det J_f(r)|^(1/2) * phi_i(f(r))

keep every overlap integral unchanged (change of variables), so the
whitening matrix stays fixed while the basis gains radial flexibility.

Spatial derivatives up to third order propagate through the network in
closed form per layer; Laplacians of the warped functions come from
composing those jets with the Gaussian value/gradient/Hessian code, and
parameter gradients fall out of the tape when inputs are tape variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .orbitals import AOBasis, AOValues, _shell_derivs

__all__ = ["MLPParams", "init_mlp", "mlp_eval", "local_scale", "transform",
           "transformed_ao", "warped_tables", "theta_arrays", "theta_as_vars",
           "theta_from_arrays"]

_EYE3 = np.eye(3)


@dataclass(eq=False)
class MLPParams:
    """Weights/biases of the scaling network plus the range cap alpha.

    layers[k] = (W, b) with W of shape (out, in); tanh hidden activations,
    linear scalar output.  With a zero final layer and alpha = 2 the
    transform is exactly the identity.
    """

    layers: tuple = field(default_factory=tuple)
    alpha: float = 2.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not self.layers:
            raise ValueError("network needs at least one layer")

    @property
    def n_parameters(self) -> int:
        return sum(np.size(w) + np.size(b) for w, b in self.layers)


def init_mlp(hidden=(9, 9, 9), alpha: float = 2.0, seed=0) -> MLPParams:
    """Random hidden layers, zero-initialized output layer (identity start)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = [3, *hidden, 1]
    layers = []
    for k in range(len(sizes) - 1):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        if k == len(sizes) - 2:
            w = np.zeros((fan_out, fan_in))
            b = np.zeros(fan_out)
        else:
            w = rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in)
            b = np.zeros(fan_out)
        layers.append((w, b))
    return MLPParams(layers=tuple(layers), alpha=alpha)


def theta_arrays(theta: MLPParams) -> list:
    """Flat list of parameter arrays (optimizer order)."""
    out = []
    for w, b in theta.layers:
        out.append(w)
        out.append(b)
    return out


def theta_from_arrays(theta: MLPParams, arrays) -> MLPParams:
    layers = []
    it = iter(arrays)
    for _w, _b in theta.layers:
        layers.append((next(it), next(it)))
    return MLPParams(layers=tuple(layers), alpha=theta.alpha)


def theta_as_vars(theta: MLPParams):
    """Tape copy of the parameters plus the list of leaf Vars."""
    leaves = [ad.Var(a) for a in theta_arrays(theta)]
    return theta_from_arrays(theta, leaves), leaves


def _sym3(g, h):
    """S[a,b,c] = g_a H_bc + g_b H_ac + g_c H_ab, batched over leading axes."""
    t1 = ad.expand_dims(ad.expand_dims(g, -1), -1) * ad.expand_dims(h, -3)
    t2 = ad.expand_dims(ad.expand_dims(g, -2), -1) * ad.expand_dims(h, -2)
    t3 = ad.expand_dims(ad.expand_dims(g, -2), -2) * ad.expand_dims(h, -1)
    return t1 + t2 + t3


def _mlp_jets(theta: MLPParams, points, order: int):
    """Value and spatial derivatives (up to `order`) of the network output.

    Shapes: g (m,), grad (m,3), hess (m,3,3), third (m,3,3,3); entries are
    ndarrays or tape Vars depending on the inputs.
    """
    m = ad.value_of(points).shape[0]
    val = points                                       # (m, 3) "units" = coords
    grad = np.broadcast_to(_EYE3, (m, 3, 3)).copy()    # d x_u / d x_d
    hess = np.zeros((m, 3, 3, 3))
    third = np.zeros((m, 3, 3, 3, 3))

    n_layers = len(theta.layers)
    for k, (w, b) in enumerate(theta.layers):
        val = ad.unit_contract(w, val) + b
        grad = ad.unit_contract(w, grad)
        if order >= 2:
            hess = ad.unit_contract(w, hess)
        if order >= 3:
            third = ad.unit_contract(w, third)
        if k == n_layers - 1:
            break                                      # linear output layer
        t = ad.tanh(val)
        s1 = 1.0 - t * t
        s1g = ad.expand_dims(s1, -1)
        new_grad = s1g * grad
        if order >= 2:
            s2 = -2.0 * t * s1
            s2h = ad.expand_dims(ad.expand_dims(s2, -1), -1)
            s1h = ad.expand_dims(s1g, -1)
            gg = ad.expand_dims(grad, -1) * ad.expand_dims(grad, -2)
            new_hess = s1h * hess + s2h * gg
        if order >= 3:
            s3 = -2.0 * s1 * (1.0 - 3.0 * t * t)
            s1t = ad.expand_dims(s1h, -1)
            s2t = ad.expand_dims(s2h, -1)
            s3t = ad.expand_dims(ad.expand_dims(ad.expand_dims(s3, -1), -1), -1)
            ggg = ad.expand_dims(gg, -1) * \
                ad.expand_dims(ad.expand_dims(grad, -2), -2)
            third = s1t * third + s2t * _sym3(grad, hess) + s3t * ggg
        if order >= 2:
            hess = new_hess
        grad = new_grad
        val = t

    g = val[:, 0]
    out = [g, grad[:, 0]]
    out.append(hess[:, 0] if order >= 2 else None)
    out.append(third[:, 0] if order >= 3 else None)
    return out


def _lambda_jets(theta: MLPParams, alpha, points, order: int):
    """lambda = alpha * sigmoid(g) and its spatial derivatives."""
    g, g1, g2, g3 = _mlp_jets(theta, points, order)
    sig = ad.sigmoid(g)
    lam = alpha * sig
    d1 = sig * (1.0 - sig)
    grad = ad.expand_dims(alpha * d1, -1) * g1
    hess = third = None
    if order >= 2:
        d2 = d1 * (1.0 - 2.0 * sig)
        gg = ad.expand_dims(g1, -1) * ad.expand_dims(g1, -2)
        hess = ad.expand_dims(ad.expand_dims(alpha * d1, -1), -1) * g2 \
            + ad.expand_dims(ad.expand_dims(alpha * d2, -1), -1) * gg
    if order >= 3:
        d3 = d1 * (1.0 - 6.0 * sig + 6.0 * sig * sig)
        a1 = ad.expand_dims(ad.expand_dims(ad.expand_dims(alpha * d1, -1), -1), -1)
        a2 = ad.expand_dims(ad.expand_dims(ad.expand_dims(alpha * d2, -1), -1), -1)
        a3 = ad.expand_dims(ad.expand_dims(ad.expand_dims(alpha * d3, -1), -1), -1)
        ggg = ad.expand_dims(ad.expand_dims(g1, -1) * ad.expand_dims(g1, -2), -1) * \
            ad.expand_dims(ad.expand_dims(g1, -2), -2)
        third = a1 * g3 + a2 * _sym3(g1, g2) + a3 * ggg
    return lam, grad, hess, third


def _warp_fields(theta: MLPParams, alpha, points, order: int):
    """f, J, det J and (for order 3) the derivatives of s = sqrt(det J)."""
    lam, g1, g2, g3 = _lambda_jets(theta, alpha, points, order)
    r = points
    f = ad.expand_dims(lam, -1) * r
    jac = ad.expand_dims(ad.expand_dims(lam, -1), -1) * _EYE3 \
        + ad.expand_dims(r, -1) * ad.expand_dims(g1, -2)
    rg = ad.vsum(r * g1, axis=1)
    p = lam + rg
    det = lam * lam * p
    fields = {"f": f, "jac": jac, "det": det, "lam": lam, "lam_grad": g1, "p": p}
    if order < 3:
        return fields

    tr_h = g2[..., 0, 0] + g2[..., 1, 1] + g2[..., 2, 2]
    hr = ad.vsum(g2 * ad.expand_dims(r, 1), axis=2)          # (H r)_i
    grad_p = 2.0 * g1 + hr
    t_kk = g3[..., 0, 0] + g3[..., 1, 1] + g3[..., 2, 2]      # sum_k T[a,k,k]
    lap_p = 3.0 * tr_h + ad.vsum(r * t_kk, axis=1)

    lam_e = ad.expand_dims(lam, -1)
    p_e = ad.expand_dims(p, -1)
    grad_det = 2.0 * lam_e * p_e * g1 + lam_e * lam_e * grad_p
    g1sq = ad.vsum(g1 * g1, axis=1)
    lap_det = 2.0 * p * g1sq + 4.0 * lam * ad.vsum(g1 * grad_p, axis=1) \
        + 2.0 * lam * p * tr_h + lam * lam * lap_p

    s = ad.sqrt(det)
    s_e = ad.expand_dims(s, -1)
    grad_s = grad_det / (2.0 * s_e)
    gdet_sq = ad.vsum(grad_det * grad_det, axis=1)
    lap_s = 0.5 * lap_det / s - 0.25 * gdet_sq * s ** -3.0
    # Laplacian of each warp component: lap f_a = 2 g1_a + r_a * tr(H)
    lap_f = 2.0 * g1 + r * ad.expand_dims(tr_h, -1)
    fields.update({"s": s, "grad_s": grad_s, "lap_s": lap_s, "lap_f": lap_f,
                   "tr_h": tr_h})
    return fields


def _check_positive_det(det) -> None:
    dv = np.atleast_1d(ad.value_of(det))
    if np.any(dv <= 0.0):
        raise ValueError("transform Jacobian determinant is not positive "
                         "(inadmissible scaling parameters)")


def warped_tables(theta: MLPParams, basis: AOBasis, points):
    """Values and Laplacians of the warped basis at a batch of points.

    Accepts plain points/parameters (reporting) or tape variables (training).
    Returns (values (m,B), laplacians (m,B)).
    """
    fields = _warp_fields(theta, theta.alpha, points, order=3)
    _check_positive_det(fields["det"])
    f, jac, s = fields["f"], fields["jac"], fields["s"]
    grad_s, lap_s, lap_f = fields["grad_s"], fields["lap_s"], fields["lap_f"]
    gram = ad.vsum(ad.expand_dims(jac, 1) * ad.expand_dims(jac, 2), axis=3)

    vals, laps = [], []
    for shell in basis.shells:
        center = basis.shell_center(shell)
        for val_f, grad_f, hess_f in _shell_derivs(shell, center, f):
            # composed Laplacian: sum_a lap(f_a) d_a phi + sum_ab (J J^T)_ab d2_ab phi
            term1 = ad.vsum(lap_f * grad_f, axis=1)
            lap_comp = term1 + _contract_hess(gram, hess_f)
            # spatial gradient of phi(f(r)): (J^T grad phi)_k
            grad_comp = ad.vsum(jac * ad.expand_dims(grad_f, 2), axis=1)
            phi = s * val_f
            lap_phi = lap_s * val_f + 2.0 * ad.vsum(grad_s * grad_comp, axis=1) \
                + s * lap_comp
            vals.append(phi)
            laps.append(lap_phi)
    return ad.stack(vals, axis=1), ad.stack(laps, axis=1)


def _contract_hess(gram, hess):
    """sum_ab G_ab H_ab per point; reduces bit-exactly to the Hessian trace
    when G is the exact identity (off-diagonal products are exact zeros)."""
    prod = gram * hess
    m = ad.value_of(prod).shape[0]
    return ad.vsum(prod.reshape(m, 9), axis=1)


def mlp_eval(theta: MLPParams, r):
    """Network value and input-gradient at one point."""
    pts = np.asarray(ad.value_of(r), dtype=np.float64).reshape(1, 3) \
        if not ad.is_var(r) else r
    g, grad, _, _ = _mlp_jets(theta, pts, order=1)
    return float(ad.value_of(g)[0]), np.asarray(ad.value_of(grad)[0])


def local_scale(theta: MLPParams, alpha: float, r):
    """lambda(r) = alpha * sigmoid(g(r)) in (0, alpha), and its gradient."""
    pts = np.asarray(r, dtype=np.float64).reshape(1, 3)
    lam, grad, _, _ = _lambda_jets(theta, alpha, pts, order=1)
    return float(ad.value_of(lam)[0]), np.asarray(ad.value_of(grad)[0])


def transform(theta: MLPParams, alpha: float, r):
    """Warped coordinate f(r) = lambda(r) r and its Jacobian determinant."""
    pts = np.asarray(r, dtype=np.float64).reshape(1, 3)
    fields = _warp_fields(theta, alpha, pts, order=1)
    det = float(ad.value_of(fields["det"])[0])
    _check_positive_det(det)
    return np.asarray(ad.value_of(fields["f"])[0]), det


def transformed_ao(theta: MLPParams, alpha: float, basis: AOBasis, r) -> AOValues:
    """Warped basis values/Laplacians at one point."""
    pts = np.asarray(r, dtype=np.float64).reshape(1, 3)
    t = MLPParams(layers=theta.layers, alpha=alpha)
    vals, laps = warped_tables(t, basis, pts)
    return AOValues(values=vals[0], laplacians=laps[0], gradients=None)
