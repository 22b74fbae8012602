"""Polarization, Goodey-Weil evaluation, support scanning and the seminorm
lower-bound estimator.

The Goodey-Weil pairing extracts the mixed first-order coefficient of
mu(f + sum_i delta_i phi_i) through an exact 2^k-corner difference; for a
k-homogeneous valuation the polynomial has total degree at most k, so the
extraction is independent of the step size, which the implementation
verifies by re-running at half the step.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb, factorial, inf

import numpy as np
from scipy import ndimage

from .convex import extend_from_subdomain, is_discretely_convex, _discrete_c2_bound
from .errors import ConvexityViolation, DomainExceeded, StepAgreementError
from .grids import Bump, ExtGridFn, GridDomain, ScanMask
from .sampling import random_convex_fn
from .valuations import PairingMeasure, evaluate, intrinsic_domain

REL_STEP_TOL = 1e-7
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class GWQuery:
    """Order, test functions (Bump or grid), optional base and step.

    The default base is |x|^2 on the resolved domain; the default step is
    min(0.1, 1/(k * max C2 bound of the tests)), halved until the corner
    functions pass the convexity check.
    """

    order: int
    tests: tuple
    base: ExtGridFn | None = None
    step: float | None = None

    def __init__(self, order, tests, base=None, step=None):
        order = int(order)
        tests = tuple(tests)
        if order < 1 or len(tests) != order:
            raise ValueError("need exactly `order` test functions, order >= 1")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "tests", tests)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "step", step)


def polarize(spec, k: int, fs) -> float:
    """Symmetric multilinearization by inclusion-exclusion over subset sums:
    (1/k!) sum over nonempty S of (-1)^(k-|S|) mu(sum_{i in S} f_i).

    Requires mu to be k-homogeneous (verified on the first argument).
    """
    fs = list(fs)
    if len(fs) != k or k < 1:
        raise ValueError("need exactly k functions")
    g = fs[0]
    a = evaluate(spec, g * 2.0)
    b = evaluate(spec, g)
    if abs(a - 2.0**k * b) > 1e-8 * (1.0 + abs(a) + 2.0**k * abs(b)):
        raise ValueError("valuation fails the k-homogeneity residual check")
    dom = g.domain
    total = 0.0
    for size in range(1, k + 1):
        sign = (-1.0) ** (k - size)
        for S in combinations(range(k), size):
            acc = fs[S[0]].values
            for i in S[1:]:
                acc = acc + fs[i].values
            total += sign * evaluate(spec, ExtGridFn(dom, acc))
    return total / factorial(k)


def _resolve_domain(spec, query: GWQuery | None, domain):
    if query is not None and query.base is not None:
        return query.base.domain
    if domain is not None:
        return domain
    dom = intrinsic_domain(spec)
    if dom is None:
        raise ValueError("a grid domain is required (spec carries none)")
    return dom


def _default_base(domain: GridDomain) -> ExtGridFn:
    q = np.sum(domain.points()**2, axis=1).reshape(domain.shape)
    return ExtGridFn(domain, q)


def _test_values_and_c2(phi, domain):
    if isinstance(phi, Bump):
        return phi.sample(domain).values, phi.c2_norm()
    if isinstance(phi, ExtGridFn):
        if not phi.domain.same_as(domain):
            raise ValueError("test function domain mismatch")
        return phi.values, _discrete_c2_bound(phi)
    raise TypeError("test functions must be Bump or ExtGridFn")


def _auto_step(k, c2s):
    worst = max(c2s) if c2s else 1.0
    return min(0.1, 1.0 / (k * max(worst, 1e-12)))


def _mixed_difference(spec, dom, base_vals, phi_stack, h, k,
                      check_corners=True, check_base=True):
    """(1/(k! h^k)) sum over S of (-1)^(k-|S|) mu(base + h * sum_S phi).

    Returns (value, max absolute corner evaluation).
    """
    corner_max = 0.0
    total = 0.0
    for size in range(0, k + 1):
        sign = (-1.0) ** (k - size)
        for S in combinations(range(k), size):
            vals = base_vals
            for i in S:
                vals = vals + h * phi_stack[i]
            g = ExtGridFn(dom, vals)
            if size == 0:
                if check_base and not is_discretely_convex(g):
                    raise ConvexityViolation("base function is not convex")
            elif check_corners and not is_discretely_convex(g):
                raise ConvexityViolation("corner function not convex; step too large")
            v = evaluate(spec, g)
            corner_max = max(corner_max, abs(v))
            total += sign * v
    return total / (factorial(k) * h**k), corner_max


def _mixed_difference_identical(spec, dom, base_vals, phi_vals, h, k,
                                check_corners=True, check_base=True):
    """Fast path when all k test functions are the same grid function."""
    corner_max = 0.0
    total = 0.0
    for j in range(0, k + 1):
        g = ExtGridFn(dom, base_vals + (j * h) * phi_vals)
        if j == 0:
            if check_base and not is_discretely_convex(g):
                raise ConvexityViolation("base function is not convex")
        elif check_corners and not is_discretely_convex(g):
            raise ConvexityViolation("corner function not convex; step too large")
        v = evaluate(spec, g)
        corner_max = max(corner_max, abs(v))
        total += comb(k, j) * (-1.0) ** (k - j) * v
    return total / (factorial(k) * h**k), corner_max


def _noise_floor(corner_max, k, h):
    return 64.0 * _EPS * corner_max * 2.0**k / (factorial(k) * h**k)


def _gw_core(spec, dom, base_vals, phi_stack, h, k, identical=False,
             check_base=True, max_halvings=10):
    """Step search + evaluation at h and h/2 with the agreement check."""
    evaluator = _mixed_difference_identical if identical else _mixed_difference
    phis = phi_stack[0] if identical else phi_stack
    last_err = None
    for _ in range(max_halvings + 1):
        try:
            v1, m1 = evaluator(spec, dom, base_vals, phis, h, k,
                              check_base=check_base)
            v2, m2 = evaluator(spec, dom, base_vals, phis, h / 2.0, k,
                              check_base=False)
        except ConvexityViolation as err:
            last_err = err
            h /= 2.0
            continue
        floor = _noise_floor(m1, k, h) + _noise_floor(m2, k, h / 2.0)
        if abs(v1 - v2) > REL_STEP_TOL * max(abs(v1), abs(v2)) + floor:
            raise StepAgreementError(
                f"values at h and h/2 disagree: {v1!r} vs {v2!r}")
        return v1, v2, h, m1, floor
    raise ConvexityViolation(
        "no admissible step found after halvings") from last_err


def gw_report(spec, query: GWQuery, domain: GridDomain | None = None) -> dict:
    """Goodey-Weil pairing value with the half-step verification data."""
    dom = _resolve_domain(spec, query, domain)
    k = query.order
    base = query.base if query.base is not None else _default_base(dom)
    stack, c2s = [], []
    for phi in query.tests:
        vals, c2 = _test_values_and_c2(phi, dom)
        stack.append(vals)
        c2s.append(c2)
    h = query.step if query.step is not None else _auto_step(k, c2s)
    if h <= 0:
        raise ValueError("step must be positive")
    identical = all(s is stack[0] or np.array_equal(s, stack[0])
                    for s in stack[1:])
    v1, v2, h_used, corner_max, floor = _gw_core(
        spec, dom, base.values, stack, h, k, identical=identical)
    # fixed points of the verification: agreement <= REL_STEP_TOL is exactly
    # the check the evaluation itself passed, noise floor included
    denom = max(abs(v1), abs(v2)) + floor / REL_STEP_TOL
    return {
        "value": v1,
        "value_half_step": v2,
        "step": h_used,
        "agreement": abs(v1 - v2) / denom,
        "corner_max": corner_max,
        "test_sup_norms": [float(np.max(np.abs(s))) for s in stack],
    }


def gw_eval(spec, query: GWQuery, domain: GridDomain | None = None) -> float:
    return gw_report(spec, query, domain)["value"]


def _support_masks(tests, domain):
    masks = []
    for phi in tests:
        if isinstance(phi, Bump):
            masks.append(phi.support_mask(domain))
        else:
            masks.append(phi.values != 0.0)
    return masks


def diagonality_residual(spec, k: int, bumps, domain: GridDomain | None = None,
                         base: ExtGridFn | None = None,
                         step: float | None = None) -> float:
    """|gw_eval| for test functions with pairwise disjoint supports
    (at least one empty cell between them)."""
    query = GWQuery(k, bumps, base=base, step=step)
    dom = _resolve_domain(spec, query, domain)
    masks = _support_masks(query.tests, dom)
    structure = np.ones((3,) * dom.ndim, dtype=bool)
    for i in range(len(masks)):
        grown = ndimage.binary_dilation(masks[i], structure=structure)
        for j in range(i + 1, len(masks)):
            if np.any(grown & masks[j]):
                raise ValueError(
                    "test supports must be separated by at least one empty cell")
    return abs(gw_eval(spec, query, dom))


def support_scan(spec, k: int, probe_radius: float, tol: float = 1e-6,
                 domain: GridDomain | None = None, step: float | None = None,
                 return_responses: bool = False):
    """Probe response |s(c)| of a k-fold bump at every grid cell; cells above
    tol * max response are marked. Degree 0 reports the empty support."""
    dom = _resolve_domain(spec, None, domain)
    if k == 0:
        mask = ScanMask(dom, np.zeros(dom.shape, dtype=bool))
        return (mask, np.zeros(dom.shape)) if return_responses else mask
    if probe_radius <= 0:
        raise ValueError("probe_radius must be positive")
    base = _default_base(dom)
    if not is_discretely_convex(base):
        raise ConvexityViolation("scan base function is not convex")
    c2 = Bump(dom.center, probe_radius, 1.0).c2_norm()
    h0 = step if step is not None else _auto_step(k, [c2])
    pts = dom.points()
    responses = np.zeros(dom.size)
    for i in range(dom.size):
        phi = Bump(pts[i], probe_radius, 1.0).sample(dom).values
        v1, _, _, _, _ = _gw_core(spec, dom, base.values, [phi], h0, k,
                                  identical=True, check_base=False)
        responses[i] = v1
    responses = responses.reshape(dom.shape)
    peak = float(np.max(np.abs(responses)))
    marked = np.abs(responses) > tol * peak if peak > 0 else \
        np.zeros(dom.shape, dtype=bool)
    mask = ScanMask(dom, marked)
    return (mask, responses) if return_responses else mask


def _hausdorff_cells(idx_a, idx_b) -> float:
    """Symmetric Hausdorff distance between index sets, Chebyshev metric."""
    if len(idx_a) == 0 and len(idx_b) == 0:
        return 0.0
    if len(idx_a) == 0 or len(idx_b) == 0:
        return inf
    d = np.max(np.abs(idx_a[:, None, :] - idx_b[None, :, :]), axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def translate_covariance_residual(spec: PairingMeasure, v, probe_radius: float,
                                  tol: float = 1e-6,
                                  domain: GridDomain | None = None) -> float:
    """Hausdorff distance (in cells) between the scan of the node-shifted
    valuation and the shifted scan of the original."""
    if not isinstance(spec, PairingMeasure):
        raise TypeError("translate covariance probe is defined for pairings")
    if domain is None:
        raise ValueError("a grid domain is required")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    shifted = spec.translate(v)
    if not np.all(domain.contains(shifted.nodes)) or \
            not np.all(domain.contains(spec.nodes)):
        raise DomainExceeded("pairing nodes leave the grid domain")
    m0 = support_scan(spec, 1, probe_radius, tol, domain)
    m1 = support_scan(shifted, 1, probe_radius, tol, domain)
    cells = np.rint(v / domain.spacing).astype(int)
    return _hausdorff_cells(m1.indices(), m0.indices() + cells)


def seminorm_estimate(spec, A_lo, A_hi, s: float, n_samples: int, seed: int,
                      domain: GridDomain | None = None) -> float:
    """Lower bound for sup{|mu(f)| : sup norm of f at most 1 on the grown box}.

    Sample 0 is the canonical cone scaled to span [-1, 1] on the norm box;
    further samples are random convex functions normalized there. Every
    sample is pushed through extend_from_subdomain before evaluation, so the
    estimate only ever sees canonical extensions of box data. Deterministic
    in `seed`; the sample stream makes the estimate monotone in n_samples.
    """
    dom = _resolve_domain(spec, None, domain)
    A_lo = np.atleast_1d(np.asarray(A_lo, dtype=float))
    A_hi = np.atleast_1d(np.asarray(A_hi, dtype=float))
    if s <= 0 or n_samples < 1:
        raise ValueError("need s > 0 and at least one sample")
    pad = 1e-9 * np.maximum(1.0, np.abs(dom.hi - dom.lo))
    if np.any(A_lo - 2 * s < dom.lo - pad) or np.any(A_hi + 2 * s > dom.hi + pad):
        raise DomainExceeded("norm box exceeds the grid domain")
    pts = dom.points()
    norm_box = np.all((pts >= A_lo - 2 * s - pad) & (pts <= A_hi + 2 * s + pad),
                      axis=1).reshape(dom.shape)
    center = (A_lo + A_hi) / 2.0
    rng = np.random.default_rng(seed)
    best = 0.0
    for i in range(n_samples):
        if i == 0:
            dist = np.linalg.norm(pts - center, axis=1).reshape(dom.shape)
            r_max = float(np.max(dist[norm_box]))
            vals = (2.0 / r_max) * dist - 1.0
            f = ExtGridFn(dom, vals)
        else:
            f = random_convex_fn(dom, rng)
        m = float(np.max(np.abs(f.values[norm_box])))
        if m > 0:
            f = ExtGridFn(dom, f.values / m)
        f_ext = extend_from_subdomain(f, A_lo, A_hi, s)
        best = max(best, abs(evaluate(spec, f_ext)))
    return best
