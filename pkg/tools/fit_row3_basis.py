#!/usr/bin/env python3
"""Generate Na-Ar blocks for the packaged basis-set files.

The H-Ne blocks of sto-3g.basis / 6-31g.basis carry the canonical published
exponents and contraction coefficients.  For the third row this script
regenerates the data from first principles: least-squares Gaussian expansions
of Slater-type radial shapes (the construction minimal bases are built from),
scaled by Slater-rule effective exponents.  s and p channels of the same shell
share exponents, as in the original tables.

The 1s and 2sp fits are validated against the known published expansions
before the 3sp fit is trusted.  Output is printed in the basis text format
and appended to the data files by hand (committed as static data).

Requires scipy (tooling only; the package itself does not depend on it).
"""

import math

import numpy as np
from scipy.optimize import minimize

# dense radial grid for cross overlaps with the Slater shapes
R = np.linspace(1e-8, 60.0, 60001)
DR = R[1] - R[0]


def sto_radial(n, r):
    """Normalized radial part of an (n)s/(n)p Slater function with zeta=1."""
    pref = r ** (n - 1) * np.exp(-r)
    norm = math.sqrt(math.factorial(2 * n) / 2.0 ** (2 * n + 1))
    return pref / norm


def gauss_radial(alpha, l, r):
    """Normalized radial part of a Cartesian Gaussian primitive."""
    if l == 0:
        n = (2.0 * alpha / math.pi) ** 0.75 * math.sqrt(4.0 * math.pi)
        return n * np.exp(-alpha * r * r)
    n = (2.0 * alpha / math.pi) ** 0.75 * math.sqrt(4.0 * alpha) * math.sqrt(4.0 * math.pi / 3.0)
    return n * r * np.exp(-alpha * r * r)


def gauss_overlap(a, b, l):
    """Radial overlap of two normalized gaussian primitives of momentum l."""
    p = 1.5 if l == 0 else 2.5
    return (2.0 * np.sqrt(a * b) / (a + b)) ** p


def channel_error(alphas, n_sto, l):
    """Best-fit residual of an n_sto Slater shape in the span of gaussians."""
    alphas = np.asarray(alphas)
    gram = gauss_overlap(alphas[:, None], alphas[None, :], l)
    sto = sto_radial(n_sto, R)
    vals = np.stack([gauss_radial(a, l, R) for a in alphas])
    cross = np.trapezoid(vals * (sto * R * R), dx=DR, axis=1)
    coef = np.linalg.solve(gram, cross)
    return 1.0 - cross @ coef, coef


def fit_shell(n_sto, nprim, shared_sp, start):
    """Fit nprim gaussians to the zeta=1 Slater shell (joint s+p if shared)."""

    def objective(logalpha):
        alphas = np.exp(logalpha)
        if np.any(alphas < 1e-6) or np.any(alphas > 1e7):
            return 1e6
        err_s, _ = channel_error(alphas, n_sto, 0)
        total = err_s
        if shared_sp:
            err_p, _ = channel_error(alphas, n_sto, 1)
            total += err_p
        return total

    best = None
    for scale in (1.0, 0.5, 2.0):
        res = minimize(objective, np.log(np.asarray(start) * scale), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000, "maxfev": 20000})
        if best is None or res.fun < best.fun:
            best = res
    alphas = np.sort(np.exp(best.x))[::-1]
    _, cs = channel_error(alphas, n_sto, 0)
    out = {"alphas": alphas, "s": cs, "err": best.fun}
    if shared_sp:
        _, cp = channel_error(alphas, n_sto, 1)
        out["p"] = cp
    return out


def slater_zetas(z):
    """Slater-rule effective exponents for a neutral third-row atom."""
    n3 = z - 10
    return {
        "1s": z - 0.30,
        "2sp": (z - 4.15) / 2.0,
        "3sp": (z - 8.8 - 0.35 * (n3 - 1)) / 3.0,
    }


def emit_shell(label, alphas, coefs, zeta):
    lines = [f"SHELL {label} {len(alphas)}"]
    for a, c in zip(alphas, coefs):
        lines.append(f"  {a * zeta * zeta:.10f}  {c: .10f}")
    return lines


def main():
    print("validating fits against the published zeta=1 expansions ...")
    fit1s = fit_shell(1, 3, False, [2.2, 0.4, 0.1])
    ref_a = np.array([2.227660584, 0.405771156, 0.109818])
    ref_c = np.array([0.154328967, 0.535328142, 0.444634542])
    da = np.max(np.abs(fit1s["alphas"] - ref_a) / ref_a)
    dc = np.max(np.abs(fit1s["s"] - ref_c))
    print(f"  1s 3G: exps {fit1s['alphas']}, coefs {fit1s['s']}")
    print(f"  vs published: max rel dexp {da:.2e}, max dcoef {dc:.2e}")
    assert da < 0.02 and dc < 0.02

    fit2sp = fit_shell(2, 3, True, [1.0, 0.23, 0.075])
    ref_a2 = np.array([0.994203, 0.231031, 0.0751386])
    da2 = np.max(np.abs(fit2sp["alphas"] - ref_a2) / ref_a2)
    print(f"  2sp 3G: exps {fit2sp['alphas']} (max rel dexp {da2:.2e})")
    print(f"          s {fit2sp['s']}  p {fit2sp['p']}")
    assert da2 < 0.05

    fit3sp = fit_shell(3, 3, True, [0.5, 0.08, 0.03])
    print(f"  3sp 3G: exps {fit3sp['alphas']} err {fit3sp['err']:.2e}")
    print(f"          s {fit3sp['s']}  p {fit3sp['p']}")

    fits6 = {
        "1s": fit_shell(1, 6, False, [60.0, 12.0, 3.3, 1.0, 0.37, 0.12]),
        "2sp": fit_shell(2, 6, True, [8.0, 2.0, 0.7, 0.3, 0.12, 0.06]),
        "3sp": fit_shell(3, 4, True, [1.0, 0.25, 0.1, 0.04]),
    }
    for k, f in fits6.items():
        print(f"  {k} {len(f['alphas'])}G err {f['err']:.2e}: exps {f['alphas']}")

    symbols = {11: "Na", 12: "Mg", 13: "Al", 14: "Si", 15: "P", 16: "S", 17: "Cl", 18: "Ar"}

    print("\n===== sto-3g rows (Na-Ar) =====")
    for z, sym in symbols.items():
        zt = slater_zetas(z)
        lines = [f"ELEMENT {sym}"]
        lines += emit_shell("S", fit1s["alphas"], fit1s["s"], zt["1s"])
        lines += emit_shell("S", fit2sp["alphas"], fit2sp["s"], zt["2sp"])
        lines += emit_shell("P", fit2sp["alphas"], fit2sp["p"], zt["2sp"])
        lines += emit_shell("S", fit3sp["alphas"], fit3sp["s"], zt["3sp"])
        lines += emit_shell("P", fit3sp["alphas"], fit3sp["p"], zt["3sp"])
        lines.append("END")
        print("\n".join(lines))

    print("\n===== 6-31g-style rows (Na-Ar) =====")
    for z, sym in symbols.items():
        zt = slater_zetas(z)
        lines = [f"ELEMENT {sym}"]
        lines += emit_shell("S", fits6["1s"]["alphas"], fits6["1s"]["s"], zt["1s"])
        lines += emit_shell("S", fits6["2sp"]["alphas"], fits6["2sp"]["s"], zt["2sp"])
        lines += emit_shell("P", fits6["2sp"]["alphas"], fits6["2sp"]["p"], zt["2sp"])
        # split valence: three tight primitives contracted, loosest free
        a3, s3, p3 = fits6["3sp"]["alphas"], fits6["3sp"]["s"], fits6["3sp"]["p"]
        lines += emit_shell("S", a3[:3], s3[:3], zt["3sp"])
        lines += emit_shell("P", a3[:3], p3[:3], zt["3sp"])
        lines += emit_shell("S", a3[3:], [1.0], zt["3sp"])
        lines += emit_shell("P", a3[3:], [1.0], zt["3sp"])
        lines.append("END")
        print("\n".join(lines))


if __name__ == "__main__":
    main()
