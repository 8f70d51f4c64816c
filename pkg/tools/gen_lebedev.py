#!/usr/bin/env python3
"""Generate the packaged Lebedev-style angular quadrature tables.

Each rule is defined by octahedral-symmetry orbits (vertex, edge-midpoint,
cube-vertex, and the parametric ll-m / pq0 / rst families).  The script
expands the orbits to explicit (x, y, z, w) rows, checks the polynomial
exactness degree of every rule against closed-form sphere moments, and
writes one text table per rule under src/sgdft/data/lebedev/.

Weights in the emitted files sum to 4*pi (solid angle of the unit sphere).
"""

import itertools
import math
import os

import numpy as np

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "sgdft", "data", "lebedev")


def orbit_a1():
    return [(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0), (0.0, -1.0, 0.0),
            (0.0, 0.0, 1.0), (0.0, 0.0, -1.0)]


def orbit_a2():
    a = 1.0 / math.sqrt(2.0)
    pts = []
    for i, j in itertools.combinations(range(3), 2):
        for si, sj in itertools.product((1, -1), repeat=2):
            p = [0.0, 0.0, 0.0]
            p[i] = si * a
            p[j] = sj * a
            pts.append(tuple(p))
    return pts


def orbit_a3():
    a = 1.0 / math.sqrt(3.0)
    return [(sx * a, sy * a, sz * a)
            for sx, sy, sz in itertools.product((1, -1), repeat=3)]


def orbit_b(l):
    """24 points of the form (l, l, m) with 2*l^2 + m^2 = 1."""
    m = math.sqrt(max(0.0, 1.0 - 2.0 * l * l))
    pts = []
    for mi in (0, 1, 2):
        li = [k for k in (0, 1, 2) if k != mi]
        for sl1, sl2, sm in itertools.product((1, -1), repeat=3):
            p = [0.0, 0.0, 0.0]
            p[li[0]] = sl1 * l
            p[li[1]] = sl2 * l
            p[mi] = sm * m
            pts.append(tuple(p))
    # remove duplicates created by the sign loop when the two l entries swap
    uniq = sorted(set(pts))
    assert len(uniq) == 24, len(uniq)
    return uniq


def orbit_c(p):
    """24 points of the form (p, q, 0) with p^2 + q^2 = 1."""
    q = math.sqrt(max(0.0, 1.0 - p * p))
    pts = set()
    for perm in itertools.permutations((p, q, 0.0)):
        for sx, sy, sz in itertools.product((1, -1), repeat=3):
            pts.add((sx * perm[0], sy * perm[1], sz * perm[2]))
    pts = sorted(pts)
    assert len(pts) == 24, len(pts)
    return pts


def orbit_d(r, s):
    """48 points (r, s, t), all permutations and sign choices."""
    t = math.sqrt(max(0.0, 1.0 - r * r - s * s))
    pts = set()
    for perm in itertools.permutations((r, s, t)):
        for sx, sy, sz in itertools.product((1, -1), repeat=3):
            pts.add((sx * perm[0], sy * perm[1], sz * perm[2]))
    pts = sorted(pts)
    assert len(pts) == 48, len(pts)
    return pts


# (size, degree, orbit list); weights are per-point, normalized to sum to 1.
RULES = {
    26: (7, [
        ("a1", None, 1.0 / 21.0),
        ("a2", None, 4.0 / 105.0),
        ("a3", None, 27.0 / 840.0),
    ]),
    38: (9, [
        ("a1", None, 1.0 / 105.0),
        ("a3", None, 9.0 / 280.0),
        ("c", math.sqrt((1.0 - 1.0 / math.sqrt(3.0)) / 2.0), 1.0 / 35.0),
    ]),
    86: (15, [
        ("a1", None, 0.1154401154401154e-1),
        ("a3", None, 0.1194390908585628e-1),
        ("b", 0.3696028464541502, 0.1111055571060340e-1),
        ("b", 0.6943540066026664, 0.1187650129453714e-1),
        ("c", 0.3742430390903412, 0.1181230374690448e-1),
    ]),
    194: (23, [
        ("a1", None, 0.1782340447244611e-2),
        ("a2", None, 0.5716905949977102e-2),
        ("a3", None, 0.5573383178848738e-2),
        ("b", 0.6712973442695226, 0.5608704082587997e-2),
        ("b", 0.2892465627575439, 0.5158237711805383e-2),
        ("b", 0.4446933178717437, 0.5518771467273614e-2),
        ("b", 0.1299335447650067, 0.4106777028169394e-2),
        ("c", 0.3457702197611283, 0.5051846064614808e-2),
        ("d", (0.1590417105383530, 0.8360360154824589), 0.5530248916233094e-2),
    ]),
    302: (29, [
        ("a1", None, 0.8545911725128148e-3),
        ("a3", None, 0.3599119285025571e-2),
        ("b", 0.3515640345570105, 0.3449788424305883e-2),
        ("b", 0.6566329410219612, 0.3604822601419882e-2),
        ("b", 0.4729054132581005, 0.3576729661743367e-2),
        ("b", 0.9618308522614784e-1, 0.2352101413689164e-2),
        ("b", 0.2219645236294178, 0.3108953122413675e-2),
        ("b", 0.7011766416089545, 0.3650045807677255e-2),
        ("c", 0.2644152887060663, 0.2982344963171804e-2),
        ("c", 0.5718955891878961, 0.3600820932216460e-2),
        ("d", (0.2510034751770465, 0.8000727494073952), 0.3571540554273387e-2),
        ("d", (0.1233548532583327, 0.4127724083168531), 0.3392312205006170e-2),
    ]),
}


def expand(rule):
    pts, wts = [], []
    for kind, param, w in rule:
        if kind == "a1":
            orbit = orbit_a1()
        elif kind == "a2":
            orbit = orbit_a2()
        elif kind == "a3":
            orbit = orbit_a3()
        elif kind == "b":
            orbit = orbit_b(param)
        elif kind == "c":
            orbit = orbit_c(param)
        elif kind == "d":
            orbit = orbit_d(*param)
        else:
            raise ValueError(kind)
        pts.extend(orbit)
        wts.extend([w] * len(orbit))
    return np.array(pts), np.array(wts)


def sphere_moment(a, b, c):
    """Integral of x^a y^b z^c over the unit sphere surface."""
    if a % 2 or b % 2 or c % 2:
        return 0.0
    dfact = lambda n: math.prod(range(n, 0, -2)) if n > 0 else 1.0
    num = dfact(a - 1) * dfact(b - 1) * dfact(c - 1)
    return 4.0 * math.pi * num / dfact(a + b + c + 1)


def check_rule(n, degree, pts, wts):
    assert len(pts) == n, (n, len(pts))
    assert abs(wts.sum() - 1.0) < 1e-12, (n, wts.sum())
    norms = np.linalg.norm(pts, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-14
    worst = 0.0
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            for c in range(degree + 1 - a - b):
                approx = 4.0 * math.pi * np.sum(wts * pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c)
                exact = sphere_moment(a, b, c)
                err = abs(approx - exact)
                worst = max(worst, err)
                if err > 5e-12 * max(1.0, abs(exact)):
                    raise AssertionError(f"rule {n}: monomial ({a},{b},{c}) err {err:.3e}")
    return worst


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for n, (degree, rule) in sorted(RULES.items()):
        pts, wts = expand(rule)
        worst = check_rule(n, degree, pts, wts)
        path = os.path.join(OUT_DIR, f"lebedev_{n:03d}.txt")
        with open(path, "w") as fh:
            fh.write(f"# angular quadrature rule: {n} points, polynomial degree {degree}\n")
            fh.write("# columns: x y z weight   (weights sum to 4*pi)\n")
            for (x, y, z), w in zip(pts, wts):
                fh.write(f"{x: .16e} {y: .16e} {z: .16e} {4.0 * math.pi * w:.16e}\n")
        print(f"wrote {path}: {n} points, degree {degree}, worst moment err {worst:.2e}")


if __name__ == "__main__":
    main()
