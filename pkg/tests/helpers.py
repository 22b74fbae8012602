"""Shared builders and independent oracles for the test suite."""

import numpy as np

from epival import ExtGridFn, GridDomain


def grid1d(lo=-2.0, hi=2.0, n=65):
    return GridDomain([lo], [hi], [n])


def grid2d(lo=-2.0, hi=2.0, n=33):
    return GridDomain([lo, lo], [hi, hi], [n, n])


def sample(domain, fn):
    pts = domain.points()
    return ExtGridFn(domain, np.asarray(fn(pts)).reshape(domain.shape))


def quadratic(domain, A=None, b=None, c=0.0):
    n = domain.ndim
    A = np.eye(n) if A is None else np.asarray(A, dtype=float)
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    return sample(domain, lambda p: 0.5 * np.einsum("ki,ij,kj->k", p, A, p)
                  + p @ b + c)


def brute_conjugate(f, dual_domain):
    """Independent direct conjugate: plain loops, no shared code path."""
    pts = f.domain.points()
    vals = f.values.ravel()
    fin = np.isfinite(vals)
    out = np.empty(dual_domain.size)
    for j, y in enumerate(dual_domain.points()):
        out[j] = np.max(pts[fin] @ y - vals[fin])
    return ExtGridFn(dual_domain, out.reshape(dual_domain.shape))


def brute_convex_envelope_1d(f):
    """Lower convex hull of the sampled graph, evaluated back on the grid."""
    x = f.domain.points().ravel()
    y = f.values.ravel()
    hull = [0]
    for i in range(1, x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (y[b] - y[a]) * (x[i] - x[b]) >= (y[i] - y[b]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    env = np.interp(x, x[hull], y[hull])
    return ExtGridFn(f.domain, env)


def brute_inf_convolution(f, L):
    """reg as a direct double loop: min over y of f(y) + L |x - y|."""
    pts = f.domain.points()
    vals = f.values.ravel()
    fin = np.isfinite(vals)
    out = np.empty(pts.shape[0])
    for i, x in enumerate(pts):
        d = np.linalg.norm(pts[fin] - x, axis=1)
        out[i] = np.min(vals[fin] + L * d)
    return ExtGridFn(f.domain, out.reshape(f.domain.shape))


def brute_chord_extension_1d(f, il, iu):
    """Chordal-extrapolation sup over colinear grid pairs inside [il, iu]."""
    x = f.domain.points().ravel()
    v = f.values.ravel()
    out = np.array(v)
    for i in range(x.size):
        if il <= i <= iu:
            continue
        best = -np.inf
        for a in range(il, iu + 1):
            for b in range(il, iu + 1):
                if a == b:
                    continue
                # x_i = lam * x_a + (1 - lam) * x_b with lam >= 1
                lam = (x[i] - x[b]) / (x[a] - x[b])
                if lam >= 1.0:
                    best = max(best, lam * v[a] + (1 - lam) * v[b])
        out[i] = best
    return ExtGridFn(f.domain, out)


def mixed_coeff_oracle(values_fn, n, degree_per_axis, h=1.0):
    """Extract the lambda_1*...*lambda_n coefficient of a polynomial by
    sampling on a (degree_per_axis+1)^n stencil and inverting per-axis
    Vandermonde systems; exact for per-axis degree <= degree_per_axis."""
    m = degree_per_axis + 1
    ts = h * np.arange(m, dtype=float)
    grid = np.meshgrid(*([ts] * n), indexing="ij")
    flat = np.stack([g.ravel() for g in grid], axis=-1)
    data = np.array([values_fn(lam) for lam in flat]).reshape((m,) * n)
    Vinv = np.linalg.inv(np.vander(ts, N=m, increasing=True))
    row = Vinv[1]  # picks the linear coefficient
    for _ in range(n):
        data = np.tensordot(row, data, axes=(0, 0))
    return float(data)
