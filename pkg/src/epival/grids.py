"""Grid domains, extended-real grid functions, polytopes and bump test functions.

Values use IEEE +inf for the extended value; -inf and NaN are always rejected.
All types are immutable after construction: arrays are stored with the
writeable flag cleared, so sharing them across threads is safe.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainExceeded


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Axis-aligned box with a uniform tensor grid, dimensions 1 to 3."""

    lo: np.ndarray
    hi: np.ndarray
    shape: tuple

    def __init__(self, lo, hi, shape):
        lo = _frozen(np.atleast_1d(lo))
        hi = _frozen(np.atleast_1d(hi))
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        if not (1 <= lo.size <= 3) or lo.size != hi.size or len(shape) != lo.size:
            raise ValueError("lo, hi, shape must share a length in {1,2,3}")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ValueError("box corners must be finite")
        if not np.all(lo < hi):
            raise ValueError("need lo < hi on every axis")
        if any(s < 3 for s in shape):
            raise ValueError("need at least 3 samples per axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)

    @property
    def ndim(self):
        return self.lo.size

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def spacing(self):
        return (self.hi - self.lo) / (np.array(self.shape) - 1)

    @property
    def center(self):
        return (self.lo + self.hi) / 2.0

    @property
    def radius(self):
        """Half-diagonal: covers the whole box from its center."""
        return float(np.linalg.norm((self.hi - self.lo) / 2.0))

    def axes(self):
        return [np.linspace(self.lo[i], self.hi[i], self.shape[i])
                for i in range(self.ndim)]

    def points(self):
        """All grid points as an (N, ndim) array, row-major (last axis fastest)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def point_norms(self, center=None):
        c = self.center if center is None else np.asarray(center, dtype=float)
        return np.linalg.norm(self.points() - c, axis=1).reshape(self.shape)

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        eps = 1e-9 * np.maximum(1.0, np.abs(self.hi - self.lo))
        return np.all((pts >= self.lo - eps) & (pts <= self.hi + eps), axis=1)

    def same_as(self, other):
        return (self.shape == other.shape
                and np.array_equal(self.lo, other.lo)
                and np.array_equal(self.hi, other.hi))


@dataclass(frozen=True, eq=False)
class ExtGridFn:
    """Extended-real values sampled on a GridDomain (+inf allowed, -inf never)."""

    domain: GridDomain
    values: np.ndarray

    def __init__(self, domain, values):
        values = np.asarray(values, dtype=float)
        if values.shape != tuple(domain.shape):
            values = values.reshape(domain.shape)
        if np.any(np.isnan(values)):
            raise ValueError("NaN values are not allowed")
        if np.any(np.isneginf(values)):
            raise ValueError("-inf values are not allowed")
        if not np.any(np.isfinite(values)):
            raise ValueError("function must be proper (some finite value)")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "values", _frozen(values))

    @property
    def finite_mask(self):
        return np.isfinite(self.values)

    def max_abs_finite(self):
        return float(np.max(np.abs(self.values[self.finite_mask])))

    def with_values(self, values):
        return ExtGridFn(self.domain, values)

    def __add__(self, other):
        if isinstance(other, ExtGridFn):
            if not self.domain.same_as(other.domain):
                raise ValueError("domains differ")
            return ExtGridFn(self.domain, self.values + other.values)
        return ExtGridFn(self.domain, self.values + other)

    def __mul__(self, t):
        t = float(t)
        if t < 0:
            raise ValueError("only nonnegative scaling keeps +inf consistent")
        if t == 0.0:
            vals = np.where(self.finite_mask, 0.0, np.inf)
            return ExtGridFn(self.domain, vals)
        return ExtGridFn(self.domain, self.values * t)

    __rmul__ = __mul__

    def add_affine(self, slope, offset=0.0):
        """Pointwise f + <slope, x> + offset; +inf cells stay +inf."""
        slope = np.atleast_1d(np.asarray(slope, dtype=float))
        lin = (self.domain.points() @ slope + offset).reshape(self.domain.shape)
        vals = np.where(self.finite_mask, self.values + lin, np.inf)
        return ExtGridFn(self.domain, vals)

    def maximum(self, other):
        self._check_same(other)
        return ExtGridFn(self.domain, np.maximum(self.values, other.values))

    def minimum(self, other):
        self._check_same(other)
        return ExtGridFn(self.domain, np.minimum(self.values, other.values))

    def _check_same(self, other):
        if not self.domain.same_as(other.domain):
            raise ValueError("domains differ")


def interpolate(f: ExtGridFn, pts):
    """Multilinear interpolation of f at points; exact on grid nodes and affine data.

    Raises DomainExceeded for points outside the box and ValueError when a
    surrounding cell corner is +inf.
    """
    dom = f.domain
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[1] != dom.ndim:
        raise ValueError("point dimension mismatch")
    if not np.all(dom.contains(pts)):
        raise DomainExceeded("interpolation point outside the grid domain")
    dx = dom.spacing
    rel = (pts - dom.lo) / dx
    base = np.floor(rel).astype(int)
    base = np.clip(base, 0, np.array(dom.shape) - 2)
    frac = rel - base
    frac = np.clip(frac, 0.0, 1.0)

    n = dom.ndim
    out = np.zeros(pts.shape[0])
    for corner in range(1 << n):
        offs = np.array([(corner >> a) & 1 for a in range(n)])
        idx = base + offs
        w = np.ones(pts.shape[0])
        for a in range(n):
            w = w * (frac[:, a] if offs[a] else (1.0 - frac[:, a]))
        vals = f.values[tuple(idx.T)]
        bad = (w > 0) & ~np.isfinite(vals)
        if np.any(bad):
            raise ValueError("interpolation touches a +inf cell")
        out = out + np.where(w > 0, w * np.where(np.isfinite(vals), vals, 0.0), 0.0)
    return out


@dataclass(frozen=True, eq=False)
class Polytope:
    """Finite vertex list in dual space V* x R; duplicates allowed."""

    vertices: np.ndarray

    def __init__(self, vertices):
        vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        if vertices.size == 0:
            raise ValueError("vertex list must be nonempty")
        if not np.all(np.isfinite(vertices)):
            raise ValueError("vertices must be finite")
        object.__setattr__(self, "vertices", _frozen(vertices))

    @property
    def ambient_dim(self):
        return self.vertices.shape[1]

    def translate(self, shift):
        return Polytope(self.vertices + np.asarray(shift, dtype=float))

    def scale(self, t):
        if t < 0:
            raise ValueError("scaling must be nonnegative")
        return Polytope(self.vertices * float(t))

    def support(self, directions):
        """h_K(y) = max over vertices of <y, v>."""
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        return (directions @ self.vertices.T).max(axis=1)


@dataclass(frozen=True, eq=False)
class Bump:
    """Smooth compactly supported bump: amp * exp(1 - 1/(1 - |x-c|^2/r^2))."""

    center: np.ndarray
    radius: float
    amplitude: float = 1.0

    def __init__(self, center, radius, amplitude=1.0):
        center = _frozen(np.atleast_1d(center))
        radius = float(radius)
        if radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)
        object.__setattr__(self, "amplitude", float(amplitude))

    def _u(self, pts):
        d = np.atleast_2d(pts) - self.center
        return np.sum(d * d, axis=1) / self.radius**2, d

    def value(self, pts):
        u, _ = self._u(pts)
        out = np.zeros(u.shape)
        inside = u < 1.0
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - u[inside]))
        return out

    def gradient(self, pts):
        u, d = self._u(pts)
        out = np.zeros(d.shape)
        inside = u < 1.0
        w = 1.0 - u[inside]
        phi = self.amplitude * np.exp(1.0 - 1.0 / w)
        # d(phi)/du = -phi / w^2, du/dx = 2 d / r^2
        out[inside] = (-phi / w**2)[:, None] * (2.0 * d[inside] / self.radius**2)
        return out

    def hessian(self, pts):
        u, d = self._u(pts)
        n = d.shape[1]
        out = np.zeros((d.shape[0], n, n))
        inside = u < 1.0
        w = 1.0 - u[inside]
        phi = self.amplitude * np.exp(1.0 - 1.0 / w)
        di = d[inside]
        a = -phi / w**2                       # d phi / du
        b = phi * (1.0 - 2.0 * w) / w**4      # d^2 phi / du^2
        g = 2.0 / self.radius**2
        eye = np.eye(n)
        out[inside] = (b * g * g)[:, None, None] * np.einsum("ki,kj->kij", di, di) \
            + (a * g)[:, None, None] * eye
        return out

    def sample(self, domain: GridDomain) -> ExtGridFn:
        vals = self.value(domain.points()).reshape(domain.shape)
        return ExtGridFn(domain, vals)

    def c2_norm(self):
        """Sup of |phi| + |grad phi| + |<H v, v>| from analytic derivatives.

        Sampled on a fine 1d radial profile; the bump is radially symmetric so
        the sups over V reduce to sups over the radius.
        """
        r = np.linspace(0.0, self.radius * (1 - 1e-9), 4001)
        pts = np.zeros((r.size, self.center.size))
        pts[:, 0] = r
        pts = pts + self.center
        v = np.max(np.abs(self.value(pts)))
        g = np.max(np.linalg.norm(self.gradient(pts), axis=1))
        hs = self.hessian(pts)
        h = np.max(np.abs(np.linalg.eigvalsh(hs)))
        return float(v + g + h)

    def support_mask(self, domain: GridDomain):
        u, _ = self._u(domain.points())
        return (u < 1.0).reshape(domain.shape)


@dataclass(frozen=True, eq=False)
class ScanMask:
    """Boolean grid marking cells, e.g. the estimated support of a valuation."""

    domain: GridDomain
    marked: np.ndarray

    def __init__(self, domain, marked):
        marked = np.asarray(marked, dtype=bool)
        if marked.shape != tuple(domain.shape):
            marked = marked.reshape(domain.shape)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "marked", _frozen(marked, dtype=bool))

    @property
    def count(self):
        return int(self.marked.sum())

    def indices(self):
        return np.argwhere(self.marked)
