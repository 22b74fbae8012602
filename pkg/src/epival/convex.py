"""Constructive convex analysis on grid functions.

Conjugation, Lipschitz regularization, epi-distance, support-function
sampling, reconstruction through truncated conjugate epigraphs, convex
extension from a sub-box, lsc extension/restriction and convex splitting.
"""

import warnings

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .errors import ConvexityViolation, DomainExceeded
from .grids import Bump, ExtGridFn, GridDomain, Polytope, ScanMask

_CHUNK = 4096


def _directions(ndim):
    """Axis and diagonal step directions, one representative per +-pair."""
    dirs = []
    for flat in range(3**ndim):
        d = []
        x = flat
        for _ in range(ndim):
            d.append(x % 3 - 1)
            x //= 3
        if any(d):
            first = next(v for v in d if v)
            if first > 0:
                dirs.append(tuple(d))
    return dirs


def _shifted_views(values, d):
    """Triple of views (v[i-d], v[i], v[i+d]) over the valid index window."""
    ndim = values.ndim
    sl_m, sl_c, sl_p = [], [], []
    for a in range(ndim):
        step = d[a]
        n = values.shape[a]
        if step == 0:
            sl_m.append(slice(0, n))
            sl_c.append(slice(0, n))
            sl_p.append(slice(0, n))
        else:
            sl_m.append(slice(0, n - 2) if step > 0 else slice(2, n))
            sl_c.append(slice(1, n - 1))
            sl_p.append(slice(2, n) if step > 0 else slice(0, n - 2))
    return values[tuple(sl_m)], values[tuple(sl_c)], values[tuple(sl_p)]


def is_discretely_convex(f: ExtGridFn, tol: float = 1e-9) -> bool:
    """Second differences along axis and diagonal directions >= -tol*scale,
    and finite cells form a contiguous segment along every axis scan line.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    vals = f.values
    scale = 1.0 + f.max_abs_finite()
    thr = -tol * scale

    for d in _directions(f.domain.ndim):
        vm, vc, vp = _shifted_views(vals, d)
        triple = np.isfinite(vm) & np.isfinite(vc) & np.isfinite(vp)
        if np.any(triple):
            second = vm[triple] - 2.0 * vc[triple] + vp[triple]
            if np.min(second) < thr:
                return False

    # domain convexity along axis scan lines: no +inf strictly between finite
    fin = f.finite_mask
    for a in range(f.domain.ndim):
        m = np.moveaxis(fin, a, -1)
        m2 = m.reshape(-1, m.shape[-1])
        count = m2.sum(axis=1)
        has = count > 0
        first = np.argmax(m2, axis=1)
        last = m2.shape[1] - 1 - np.argmax(m2[:, ::-1], axis=1)
        if np.any((last[has] - first[has] + 1) != count[has]):
            return False
    return True


def lipschitz_bound(f: ExtGridFn) -> float:
    """Max |difference quotient| over adjacent finite cells, axis and diagonal."""
    best = 0.0
    dx = f.domain.spacing
    for d in _directions(f.domain.ndim):
        _, vc, vp = _shifted_views(f.values, d)
        ok = np.isfinite(vc) & np.isfinite(vp)
        if np.any(ok):
            step = float(np.linalg.norm(dx * np.array(d)))
            best = max(best, float(np.max(np.abs(vp[ok] - vc[ok]))) / step)
    return best


def slope_range(f: ExtGridFn):
    """Per-axis (min, max) one-sided difference quotients over finite pairs."""
    lo, hi = [], []
    dx = f.domain.spacing
    for a in range(f.domain.ndim):
        v = np.moveaxis(f.values, a, -1)
        d = (v[..., 1:] - v[..., :-1]) / dx[a]
        ok = np.isfinite(d)
        if np.any(ok):
            lo.append(float(np.min(d[ok])))
            hi.append(float(np.max(d[ok])))
        else:
            lo.append(0.0)
            hi.append(0.0)
    return np.array(lo), np.array(hi)


def default_dual_domain(f: ExtGridFn) -> GridDomain:
    """Slope range padded by 10%, primal resolution (point count forced odd
    so a degenerate slope range keeps its center on the grid)."""
    lo, hi = slope_range(f)
    c = (lo + hi) / 2.0
    half = 0.55 * (hi - lo)
    tiny = half < 1e-12 * (1.0 + np.abs(c))
    half = np.where(tiny, 1.0 + 0.1 * np.abs(c), half)
    shape = tuple(s if s % 2 == 1 else s + 1 for s in f.domain.shape)
    return GridDomain(c - half, c + half, shape)


def _pairing_max(targets, sources, charges, chunk=_CHUNK):
    """max over j of <targets_i, sources_j> - charges_j, chunked over i."""
    out = np.empty(targets.shape[0])
    for start in range(0, targets.shape[0], chunk):
        block = targets[start:start + chunk]
        out[start:start + chunk] = (block @ sources.T - charges).max(axis=1)
    return out


def legendre(f: ExtGridFn, dual_domain: GridDomain | None = None,
             method: str = "direct") -> ExtGridFn:
    """Discrete convex conjugate: f*(y) = max over finite cells of <y,x> - f(x)."""
    if dual_domain is None:
        dual_domain = default_dual_domain(f)
    else:
        lo, hi = slope_range(f)
        slack = 1e-9 * (1.0 + np.maximum(np.abs(lo), np.abs(hi)))
        if np.any(dual_domain.lo > lo + slack) or np.any(dual_domain.hi < hi - slack):
            warnings.warn("dual domain does not cover the slope range of f",
                          stacklevel=2)
    if dual_domain.ndim != f.domain.ndim:
        raise ValueError("dual domain dimension mismatch")
    fin = f.finite_mask.ravel()
    if not np.any(fin):
        raise ValueError("conjugate of an improper function")
    if method == "direct":
        pts = f.domain.points()[fin]
        vals = f.values.ravel()[fin]
        out = _pairing_max(dual_domain.points(), pts, vals)
        return ExtGridFn(dual_domain, out.reshape(dual_domain.shape))
    if method == "factored":
        return _legendre_factored(f, dual_domain)
    raise ValueError(f"unknown method {method!r}")


def _legendre_factored(f: ExtGridFn, dual_domain: GridDomain) -> ExtGridFn:
    """Axis-by-axis partial conjugation; agrees with the direct max.

    Works on p = -f so every pass is max over x of <y,x> + p; lines that are
    entirely +inf carry a -inf sentinel and drop out of later maxima.
    """
    vals = np.where(f.finite_mask, -f.values, -np.inf)
    n = f.domain.ndim
    axes_x = f.domain.axes()
    axes_y = dual_domain.axes()
    for a in range(n):
        v = np.moveaxis(vals, a, -1)
        flat = v.reshape(-1, v.shape[-1])
        pair = np.multiply.outer(axes_y[a], axes_x[a])   # (My, Nx)
        out = np.full((flat.shape[0], axes_y[a].size), -np.inf)
        for r in range(flat.shape[0]):
            row = flat[r]
            ok = np.isfinite(row)
            if np.any(ok):
                out[r] = (pair[:, ok] + row[ok]).max(axis=1)
        res = out.reshape(v.shape[:-1] + (axes_y[a].size,))
        vals = np.moveaxis(res, -1, a)
    if not np.all(np.isfinite(vals)):
        raise ValueError("conjugate of an improper function")
    return ExtGridFn(dual_domain, vals)


def biconjugate(f: ExtGridFn, dual_domain: GridDomain | None = None) -> ExtGridFn:
    """legendre(legendre(f)) back on the primal grid.

    The discrete construction satisfies f** <= f at finite cells in exact
    arithmetic; the result is clamped there to remove sub-ulp rounding
    overshoot so the dominance invariant holds for the returned values.
    """
    fstar = legendre(f, dual_domain)
    fss = legendre(fstar, f.domain)
    vals = np.where(f.finite_mask, np.minimum(fss.values, f.values), fss.values)
    return ExtGridFn(f.domain, vals)


def _interior_mask(shape):
    m = np.ones(shape, dtype=bool)
    for a in range(len(shape)):
        sl = [slice(None)] * len(shape)
        sl[a] = 0
        m[tuple(sl)] = False
        sl[a] = shape[a] - 1
        m[tuple(sl)] = False
    return m


def biconjugate_gap(f: ExtGridFn, dual_domain: GridDomain | None = None) -> float:
    """sup over finite interior cells of |f** - f|; zero certifies convexity."""
    fss = biconjugate(f, dual_domain)
    sel = _interior_mask(f.domain.shape) & f.finite_mask
    if not np.any(sel):
        return 0.0
    return float(np.max(np.abs(fss.values[sel] - f.values[sel])))


def lipschitz_regularize(f: ExtGridFn, r: float) -> ExtGridFn:
    """Infimal convolution with (1/r)|.|; equals (f* + indicator of B_{1/r})*."""
    if r <= 0:
        raise ValueError("r must be positive")
    if not is_discretely_convex(f):
        raise ConvexityViolation("input must be discretely convex")
    L = 1.0 / r
    fin = f.finite_mask.ravel()
    src = f.domain.points()[fin]
    vals = f.values.ravel()[fin]
    tgt = f.domain.points()
    out = np.empty(tgt.shape[0])
    for start in range(0, tgt.shape[0], _CHUNK):
        block = tgt[start:start + _CHUNK]
        d = np.linalg.norm(block[:, None, :] - src[None, :, :], axis=2)
        out[start:start + _CHUNK] = (vals + L * d).min(axis=1)
    return ExtGridFn(f.domain, out.reshape(f.domain.shape))


def epi_distance(f: ExtGridFn, g: ExtGridFn) -> float:
    """Shell-weighted sup distance surrogate for epi-convergence.

    Shells are nested balls B_j of radius j/8 of the domain half-diagonal;
    a cell finite for exactly one argument contributes 1 to its shells.
    """
    if not f.domain.same_as(g.domain):
        raise ValueError("epi_distance needs a shared domain")
    dom = f.domain
    rad = dom.point_norms()
    both = f.finite_mask & g.finite_mask
    one = f.finite_mask ^ g.finite_mask
    diff = np.zeros(dom.shape)
    diff[both] = np.abs(f.values[both] - g.values[both])
    total = 0.0
    R = dom.radius
    for j in range(1, 9):
        ball = rad <= j * R / 8.0 + 1e-12 * R
        s = float(np.max(diff[ball & both])) if np.any(ball & both) else 0.0
        if np.any(ball & one):
            s = max(s, 1.0)
        total += 2.0**-j * min(1.0, s)
    return total


def body_to_function(K: Polytope, domain: GridDomain) -> ExtGridFn:
    """Sample x -> h_K(x, -1) = max over vertices (y,t) of <y,x> - t."""
    n = domain.ndim
    if K.ambient_dim != n + 1:
        raise ValueError("polytope must live in V* x R")
    y = K.vertices[:, :n]
    t = K.vertices[:, n]
    vals = _pairing_max(domain.points(), y, t)
    return ExtGridFn(domain, vals.reshape(domain.shape))


def reconstruct_from_conjugate(f: ExtGridFn, R: float,
                               dual_domain: GridDomain | None = None) -> ExtGridFn:
    """Support evaluation of the truncated conjugate epigraph.

    With c the sup of |f| on the ball of radius R+2, the body is
    epi(f*) with |y| <= 2c and |t| <= (2R+3)c; its support function in
    direction (x, -1) recovers f on the ball of radius R+1.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    dom = f.domain
    if np.any(dom.lo > -(R + 2)) or np.any(dom.hi < R + 2):
        raise DomainExceeded("domain must contain the ball of radius R+2")
    rad = dom.point_norms(center=np.zeros(dom.ndim))
    ball = rad <= R + 2
    if not np.all(np.isfinite(f.values[ball])):
        raise ValueError("f must be finite on the ball of radius R+2")
    c = float(np.max(np.abs(f.values[ball])))
    c = max(c, 1e-300)
    fstar = legendre(f, dual_domain)
    y = fstar.domain.points()
    fy = fstar.values.ravel()
    tcap = (2 * R + 3) * c
    keep = (np.linalg.norm(y, axis=1) <= 2 * c * (1 + 1e-12)) & (fy <= tcap)
    if not np.any(keep):
        keep = np.argsort(np.linalg.norm(y, axis=1))[:1]
    tmin = np.maximum(fy[keep], -tcap)
    vals = _pairing_max(dom.points(), y[keep], tmin)
    return ExtGridFn(dom, vals.reshape(dom.shape))


def _box_index_ranges(domain: GridDomain, lo, hi):
    dx = domain.spacing
    il = np.ceil((np.asarray(lo) - domain.lo) / dx - 1e-9).astype(int)
    iu = np.floor((np.asarray(hi) - domain.lo) / dx + 1e-9).astype(int)
    il = np.clip(il, 0, np.array(domain.shape) - 1)
    iu = np.clip(iu, 0, np.array(domain.shape) - 1)
    return il, iu


def _box_mask(domain: GridDomain, lo, hi):
    il, iu = _box_index_ranges(domain, lo, hi)
    m = np.zeros(domain.shape, dtype=bool)
    m[tuple(slice(a, b + 1) for a, b in zip(il, iu))] = True
    return m


def _lower_hull_planes(pts, vals):
    """Affine minorants from the lower convex hull of the lifted samples.

    Returns (slopes, offsets); each plane is x -> slopes[j] @ x + offsets[j].
    Falls back to a single shifted least-squares plane for affinely
    degenerate data (qhull cannot triangulate flat input).
    """
    n = pts.shape[1]
    lifted = np.column_stack([pts, vals])
    try:
        hull = ConvexHull(lifted)
        eq = hull.equations  # normal . p + off = 0
        lower = eq[:, n] < -1e-12
        if not np.any(lower):
            raise QhullError("no lower facets")
        nrm = eq[lower, :n + 1]
        off = eq[lower, n + 1]
        slopes = -nrm[:, :n] / nrm[:, n:n + 1]
        offsets = -off / nrm[:, n]
        return slopes, offsets
    except QhullError:
        A = np.column_stack([pts, np.ones(pts.shape[0])])
        coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
        slope, b = coef[:n], coef[n]
        resid = pts @ slope + b - vals
        return slope[None, :], np.array([b - max(0.0, float(np.max(resid)))])


def extend_from_subdomain(f: ExtGridFn, A_lo, A_hi, s: float) -> ExtGridFn:
    """Finite convex extension of f from the box [A_lo - s, A_hi + s].

    Outside the box the value is the max over supporting planes of the box
    data (the chordal extrapolation sup); inside it the input is kept
    verbatim. The output is finite everywhere and discretely convex.
    """
    dom = f.domain
    A_lo = np.atleast_1d(np.asarray(A_lo, dtype=float))
    A_hi = np.atleast_1d(np.asarray(A_hi, dtype=float))
    if s <= 0:
        raise ValueError("s must be positive")
    if s < 2 * np.max(dom.spacing):
        raise ValueError("s must be at least two grid spacings")
    if np.any(A_lo >= A_hi):
        raise ValueError("need A_lo < A_hi")
    il, iu = _box_index_ranges(dom, A_lo - s, A_hi + s)
    if np.any(iu - il + 1 < 3):
        raise ValueError("extension source box has fewer than 3 cells per axis")
    box = _box_mask(dom, A_lo - s, A_hi + s)
    if not np.all(np.isfinite(f.values[box])):
        raise ValueError("f must be finite on the source box")
    sub = ExtGridFn(
        GridDomain(dom.lo + il * dom.spacing, dom.lo + iu * dom.spacing,
                   tuple(iu - il + 1)),
        f.values[tuple(slice(a, b + 1) for a, b in zip(il, iu))])
    if not is_discretely_convex(sub):
        raise ConvexityViolation("f must be discretely convex on the source box")

    pts_in = dom.points()[box.ravel()]
    vals_in = f.values[box]
    slopes, offsets = _lower_hull_planes(pts_in, vals_in)
    out = np.array(f.values)
    outside = ~box
    pts_out = dom.points()[outside.ravel()]
    out[outside] = (pts_out @ slopes.T + offsets).max(axis=1)
    out[box] = f.values[box]
    return ExtGridFn(dom, out)


def _connected(mask):
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    _, num = ndimage.label(mask, structure=structure)
    return num == 1


def restrict(f: ExtGridFn, U_mask: ScanMask) -> ExtGridFn:
    """+inf outside the marked cells, f on them."""
    _check_mask(f, U_mask)
    vals = np.where(U_mask.marked, f.values, np.inf)
    return ExtGridFn(f.domain, vals)


def lsc_extend(f_open: ExtGridFn, U_mask: ScanMask) -> ExtGridFn:
    """Discrete lsc extension: boundary cells get the min over face-adjacent
    marked cells, everything farther out is +inf."""
    _check_mask(f_open, U_mask)
    marked = U_mask.marked
    if not np.all(np.isfinite(f_open.values[marked])):
        raise ValueError("f must be finite on the marked cells")
    out = np.full(f_open.domain.shape, np.inf)
    out[marked] = f_open.values[marked]
    ndim = f_open.domain.ndim
    best = np.full(f_open.domain.shape, np.inf)
    for a in range(ndim):
        for sign in (1, -1):
            shifted_vals = np.full_like(best, np.inf)
            shifted_mark = np.zeros_like(marked)
            src = [slice(None)] * ndim
            dst = [slice(None)] * ndim
            n = f_open.domain.shape[a]
            if sign > 0:
                src[a], dst[a] = slice(0, n - 1), slice(1, n)
            else:
                src[a], dst[a] = slice(1, n), slice(0, n - 1)
            shifted_vals[tuple(dst)] = np.where(marked, f_open.values,
                                                np.inf)[tuple(src)]
            shifted_mark[tuple(dst)] = marked[tuple(src)]
            near = shifted_mark & ~marked
            best[near] = np.minimum(best[near], shifted_vals[near])
    boundary = np.isfinite(best) & ~marked
    out[boundary] = best[boundary]
    return ExtGridFn(f_open.domain, out)


def _check_mask(f: ExtGridFn, U_mask: ScanMask):
    if not f.domain.same_as(U_mask.domain):
        raise ValueError("mask domain differs from function domain")
    if U_mask.count == 0:
        raise ValueError("mask is empty")
    if not _connected(U_mask.marked):
        raise ValueError("mask is disconnected")


def _discrete_c2_bound(phi: ExtGridFn) -> float:
    """|phi| + |grad phi| + curvature bound from the sampled data.

    The curvature part is the larger of the spectral norm of the central
    difference Hessian and the raw directional second-difference quotients,
    so the quadratic split below is convex under the same test it must pass.
    """
    vals = phi.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("phi must be finite everywhere")
    dom = phi.domain
    sup = float(np.max(np.abs(vals)))
    grads = np.gradient(vals, *dom.axes(), edge_order=1)
    if dom.ndim == 1:
        grads = [grads]
    gnorm = float(np.max(np.sqrt(sum(g * g for g in grads))))
    curv = 0.0
    dx = dom.spacing
    for d in _directions(dom.ndim):
        vm, vc, vp = _shifted_views(vals, d)
        step2 = float(np.sum((dx * np.array(d))**2))
        curv = max(curv, float(np.max(np.abs(vm - 2 * vc + vp))) / step2)
    H = _central_hessian_full(phi)
    if H is not None:
        curv = max(curv, float(np.max(np.abs(np.linalg.eigvalsh(H)))))
    return sup + gnorm + curv


def central_hessian_at(f: ExtGridFn, idx):
    """Central-difference Hessians at the given (M, n) integer cell indices.

    Every stencil point must be in range and finite; raises otherwise.
    """
    dom = f.domain
    n = dom.ndim
    idx = np.atleast_2d(np.asarray(idx, dtype=int))
    shape = np.array(dom.shape)
    if np.any(idx < 1) or np.any(idx > shape - 2):
        raise ValueError("Hessian stencil leaves the grid")
    flat = f.values.ravel()
    strides = np.ones(n, dtype=int)
    for a in range(n - 2, -1, -1):
        strides[a] = strides[a + 1] * shape[a + 1]
    base = idx @ strides
    dx = dom.spacing

    def at(offset):
        vals = flat[base + np.asarray(offset, dtype=int) @ strides]
        if not np.all(np.isfinite(vals)):
            raise ValueError("Hessian stencil touches a +inf cell")
        return vals

    center = at(np.zeros(n, dtype=int))
    H = np.empty((idx.shape[0], n, n))
    for i in range(n):
        e = np.zeros(n, dtype=int)
        e[i] = 1
        H[:, i, i] = (at(e) - 2.0 * center + at(-e)) / dx[i]**2
        for j in range(i + 1, n):
            ej = np.zeros(n, dtype=int)
            ej[j] = 1
            mixed = (at(e + ej) - at(e - ej) - at(-e + ej) + at(-e - ej)) \
                / (4.0 * dx[i] * dx[j])
            H[:, i, j] = mixed
            H[:, j, i] = mixed
    return H


def _central_hessian_full(phi: ExtGridFn):
    dom = phi.domain
    if any(s < 5 for s in dom.shape):
        return None
    grids = np.meshgrid(*[np.arange(2, s - 2) for s in dom.shape], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=-1)
    return central_hessian_at(phi, idx)


def convex_split(phi, domain: GridDomain | None = None):
    """Write phi as a difference f - h of two discretely convex functions.

    f = c|x|^2/2 + phi and h = c|x|^2/2 with c the C2-type bound of phi.
    Bump inputs use analytic derivative sups, grid inputs use discrete ones.
    """
    if isinstance(phi, Bump):
        if domain is None:
            raise ValueError("a domain is required for Bump input")
        c = phi.c2_norm()
        phi_grid = phi.sample(domain)
    else:
        phi_grid = phi
        domain = phi.domain
        c = _discrete_c2_bound(phi_grid)
    q = 0.5 * np.sum(domain.points()**2, axis=1).reshape(domain.shape)
    h = ExtGridFn(domain, c * q)
    f = ExtGridFn(domain, c * q + phi_grid.values)
    return f, h
