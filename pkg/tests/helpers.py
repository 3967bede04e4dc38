"""Shared independent oracles for the tests.

Everything here deliberately avoids the package's rational closed forms:
areas come from polygon clipping, integrals from exact degree-2 quadrature
over clipped polygons, derivatives from finite differences or hyper-dual
evaluation of those primitives.
"""

import numpy as np

from tsopt.levelset import _clip_negative


def clip_negative_region(points, phi_vals, tracked=()):
    """Clip a triangle to its negative part, interpolating tracked linear
    functions onto the clipped polygon."""
    pts = [np.asarray(p, dtype=float) for p in points]
    value_lists = [list(map(float, phi_vals))] + [list(map(float, t)) for t in tracked]
    poly, vals = _clip_negative(pts, value_lists)
    return poly, vals[1:]


def polygon_area(points):
    if len(points) < 3:
        return 0.0
    pts = np.asarray(points)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_quadratic_integral(points, fvals, gvals=None):
    """Exact integral of f (or f*g) over a convex polygon, f and g linear
    with the given vertex values; fan triangulation + midpoint rule (exact
    for quadratics)."""
    if len(points) < 3:
        return 0.0
    pts = [np.asarray(p) for p in points]
    f = list(map(float, fvals))
    g = list(map(float, gvals)) if gvals is not None else [1.0] * len(f)
    total = 0.0
    for i in range(1, len(pts) - 1):
        tri = (pts[0], pts[i], pts[i + 1])
        fv = (f[0], f[i], f[i + 1])
        gv = (g[0], g[i], g[i + 1])
        area = polygon_area(tri)
        acc = 0.0
        for a, b in ((0, 1), (1, 2), (2, 0)):
            fm = 0.5 * (fv[a] + fv[b])
            gm = 0.5 * (gv[a] + gv[b])
            acc += fm * gm
        total += area * acc / 3.0
    return total


REF_TRIANGLE = (np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
BASIS_AT_VERTICES = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def exact_negative_mass_entry(phi_vals, i, j, points=REF_TRIANGLE):
    """∫ psi_i psi_j over the negative part of the triangle, by clipping."""
    poly, tracked = clip_negative_region(points, phi_vals,
                                         tracked=BASIS_AT_VERTICES)
    return polygon_quadratic_integral(poly, tracked[i], tracked[j])


def exact_negative_load_entry(phi_vals, i, points=REF_TRIANGLE):
    poly, tracked = clip_negative_region(points, phi_vals,
                                         tracked=BASIS_AT_VERTICES)
    return polygon_quadratic_integral(poly, tracked[i])


def exact_negative_area(phi_vals, points=REF_TRIANGLE):
    poly, _ = clip_negative_region(points, phi_vals)
    return polygon_area(poly)
