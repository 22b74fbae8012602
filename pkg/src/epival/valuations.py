"""Declarative valuations on grid functions and their structural operations.

A valuation is described by a spec (pairing measure, Hessian density,
constant, or a linear combination) and evaluated against ExtGridFn inputs.
The module also provides the valuation/invariance residual probes, the
homogeneous decomposition through Vandermonde inversion, mixed determinants,
the embedding into body valuations, and restriction to open sub-domains.
"""

from dataclasses import dataclass
from itertools import combinations
from math import factorial

import numpy as np

from .convex import body_to_function, central_hessian_at, is_discretely_convex, restrict
from .errors import ConvexityViolation
from .grids import ExtGridFn, GridDomain, Polytope, ScanMask, interpolate

WEIGHT_CONDITION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PairingMeasure:
    """mu(f) = sum_i w_i f(node_i); weights must kill constants and linears."""

    nodes: np.ndarray
    weights: np.ndarray

    def __init__(self, nodes, weights, check=True):
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        weights = np.atleast_1d(np.asarray(weights, dtype=float))
        if nodes.shape[0] != weights.size:
            raise ValueError("one weight per node required")
        if check:
            scale = 1.0 + float(np.max(np.abs(weights)))
            if abs(weights.sum()) > WEIGHT_CONDITION_TOL * scale:
                raise ValueError("weights violate sum(w) = 0")
            if np.max(np.abs(weights @ nodes)) > WEIGHT_CONDITION_TOL * scale * (
                    1.0 + float(np.max(np.abs(nodes)))):
                raise ValueError("weights violate sum(w * node) = 0")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def translate(self, v):
        return PairingMeasure(self.nodes + np.asarray(v, dtype=float),
                              self.weights, check=False)

    def dilate(self, t):
        return PairingMeasure(self.nodes * float(t), self.weights, check=False)


@dataclass(frozen=True, eq=False)
class HessianDensity:
    """mu(f) = integral of weight * D(H_f [order], aux...) by midpoint quadrature.

    The weight must vanish on a margin of at least two cells so every
    central-difference stencil stays interior. Auxiliary matrices are
    constant symmetric matrices or per-cell fields of shape grid + (n, n).
    """

    order: int
    weight: ExtGridFn
    aux: tuple

    def __init__(self, order, weight, aux=()):
        n = weight.domain.ndim
        order = int(order)
        if not 1 <= order <= n:
            raise ValueError("order must be between 1 and the dimension")
        if not np.all(np.isfinite(weight.values)):
            raise ValueError("weight must be finite")
        margin = _margin_mask(weight.domain.shape, 2)
        if np.any(weight.values[margin] != 0.0):
            raise ValueError("weight must vanish on a 2-cell boundary margin")
        aux = tuple(np.asarray(a, dtype=float) for a in aux)
        if len(aux) != n - order:
            raise ValueError("need exactly dim - order auxiliary matrices")
        for a in aux:
            if a.shape[-2:] != (n, n):
                raise ValueError("auxiliary matrices must be n x n")
            if not np.allclose(a, np.swapaxes(a, -1, -2)):
                raise ValueError("auxiliary matrices must be symmetric")
            a.setflags(write=False)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "aux", aux)


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True, eq=False)
class Composite:
    """Linear combination sum_i coef_i * spec_i."""

    terms: tuple

    def __init__(self, terms):
        terms = tuple((float(c), s) for c, s in terms)
        object.__setattr__(self, "terms", terms)


def _margin_mask(shape, width):
    m = np.zeros(shape, dtype=bool)
    for a in range(len(shape)):
        sl = [slice(None)] * len(shape)
        sl[a] = slice(0, width)
        m[tuple(sl)] = True
        sl[a] = slice(shape[a] - width, shape[a])
        m[tuple(sl)] = True
    return m


def mixed_determinant(*mats):
    """Polarization of det on symmetric matrices:
    D(A_1..A_n) = (1/n!) sum over nonempty S of (-1)^(n-|S|) det(sum_{i in S} A_i).

    Accepts n stacked arrays of shape (..., n, n); broadcasts over leading axes.
    """
    if len(mats) == 1 and isinstance(mats[0], (list, tuple)):
        mats = tuple(mats[0])
    mats = [np.asarray(m, dtype=float) for m in mats]
    n = mats[0].shape[-1]
    if len(mats) != n:
        raise ValueError("need exactly n matrices of size n x n")
    if n not in (1, 2, 3):
        raise ValueError("dimensions 1 to 3 only")
    total = 0.0
    for size in range(1, n + 1):
        sign = (-1.0) ** (n - size)
        for S in combinations(range(n), size):
            acc = mats[S[0]]
            for i in S[1:]:
                acc = acc + mats[i]
            total = total + sign * np.linalg.det(acc)
    return total / factorial(n)


def _pairing_value(spec: PairingMeasure, f: ExtGridFn) -> float:
    vals = interpolate(f, spec.nodes)
    return float(spec.weights @ vals)


def _hessian_value(spec: HessianDensity, f: ExtGridFn) -> float:
    if not f.domain.same_as(spec.weight.domain):
        raise ValueError("probe function domain differs from the weight domain")
    supp = np.argwhere(spec.weight.values != 0.0)
    if supp.size == 0:
        return 0.0
    H = central_hessian_at(f, supp)
    n = f.domain.ndim
    mats = [H] * spec.order
    for a in spec.aux:
        if a.shape == (n, n):
            mats.append(np.broadcast_to(a, H.shape))
        else:
            mats.append(a[tuple(supp.T)])
    D = mixed_determinant(*mats)
    w = spec.weight.values[tuple(supp.T)]
    return float(np.sum(w * D) * np.prod(f.domain.spacing))


def evaluate(spec, f: ExtGridFn) -> float:
    """Value of the valuation described by spec at the grid function f."""
    if callable(spec):
        return float(spec(f))
    if isinstance(spec, Constant):
        return float(spec.value)
    if isinstance(spec, PairingMeasure):
        return _pairing_value(spec, f)
    if isinstance(spec, HessianDensity):
        return _hessian_value(spec, f)
    if isinstance(spec, Composite):
        return float(sum(c * evaluate(s, f) for c, s in spec.terms))
    raise TypeError(f"not a valuation spec: {type(spec).__name__}")


def degree(spec):
    """Homogeneity degree, or None when a composite mixes degrees."""
    if isinstance(spec, Constant):
        return 0
    if isinstance(spec, PairingMeasure):
        return 1
    if isinstance(spec, HessianDensity):
        return spec.order
    if isinstance(spec, Composite):
        degs = {degree(s) for _, s in spec.terms}
        return degs.pop() if len(degs) == 1 else None
    return None


def intrinsic_domain(spec):
    """The grid domain a spec carries with it, if any."""
    if isinstance(spec, HessianDensity):
        return spec.weight.domain
    if isinstance(spec, Composite):
        for _, s in spec.terms:
            dom = intrinsic_domain(s)
            if dom is not None:
                return dom
    return None


def valuation_residual(spec, f: ExtGridFn, h: ExtGridFn) -> float:
    """|mu(f) + mu(h) - mu(max(f,h)) - mu(min(f,h))|, requiring min convex."""
    fmax = f.maximum(h)
    fmin = f.minimum(h)
    if not is_discretely_convex(fmin):
        raise ConvexityViolation("min(f, h) is not discretely convex")
    return abs(evaluate(spec, f) + evaluate(spec, h)
               - evaluate(spec, fmax) - evaluate(spec, fmin))


def depi_invariance_residual(spec, f: ExtGridFn, lam, c: float) -> float:
    """|mu(f + <lam, x> + c) - mu(f)|."""
    return abs(evaluate(spec, f.add_affine(lam, c)) - evaluate(spec, f))


@dataclass(frozen=True, eq=False)
class HomogeneousComponents:
    """Per-degree values mu_i(f) for degrees 0..n plus the degree-(n+1) residual."""

    components: np.ndarray
    top_residual: float
    probe_values: np.ndarray

    @property
    def scale(self):
        return 1.0 + float(np.max(np.abs(self.probe_values)))

    def total(self):
        return float(np.sum(self.components))


def _vandermonde(n):
    ts = np.arange(1, n + 3, dtype=float)
    V = np.vander(ts, N=n + 2, increasing=True)
    if np.linalg.cond(V) > 1e12:
        raise np.linalg.LinAlgError("Vandermonde system too ill-conditioned")
    return ts, V


def homogeneous_decompose(spec, f: ExtGridFn, n: int | None = None
                          ) -> HomogeneousComponents:
    """Split mu(f) into homogeneous components by probing mu(t f), t = 1..n+2,
    and inverting the Vandermonde system for the coefficients of t^0..t^(n+1).
    """
    if n is None:
        n = f.domain.ndim
    ts, V = _vandermonde(n)
    vals = np.array([evaluate(spec, f * t) for t in ts])
    coeffs = np.linalg.solve(V, vals)
    return HomogeneousComponents(components=coeffs[:n + 1],
                                 top_residual=abs(float(coeffs[n + 1])),
                                 probe_values=vals)


def component_functional(spec, deg: int, n: int):
    """The degree-`deg` component as a standalone valuation (a callable),
    built from the same dilation probes as the decomposition."""
    ts, V = _vandermonde(n)
    row = np.linalg.inv(V)[deg]

    def mu_deg(f):
        return float(sum(r * evaluate(spec, f * t) for r, t in zip(row, ts)))

    return mu_deg


def embed_T(spec, K: Polytope, domain: GridDomain | None = None) -> float:
    """Body valuation T(mu)[K] = mu(h_K(., -1)) sampled on the grid."""
    if domain is None:
        domain = intrinsic_domain(spec)
        if domain is None:
            raise ValueError("a grid domain is required for this spec")
    return evaluate(spec, body_to_function(K, domain))


def res_star(spec, f: ExtGridFn, U_mask: ScanMask) -> float:
    """Evaluate a valuation living on the open cell set U at f restricted to U."""
    if np.any(~np.isfinite(f.values[U_mask.marked])):
        raise ValueError("f must be finite on every U cell")
    return evaluate(spec, restrict(f, U_mask))
