"""Numerical integration layer.

Three kinds of integrals appear in this package:

* smooth integrals over [0, 1] (loads, norms) -> composite Gauss-Legendre;
* interface integrals against the node weight w_k(x) = (k - x)^(-(1+2a))
  -> closed-form power antiderivatives ("kernel moments"), valid for every
  a in (0, 1) with a logarithmic case at a = 1/2;
* the singular double integral over cell pairs with kernel
  |x - y|^(-(1+2a)) -> tensor Gauss for well-separated pairs and graded
  dyadic subdivision toward the singular diagonal/corner for identical and
  adjacent pairs.  The difference factor of the integrand vanishes on the
  diagonal, so the integrand scales like |x - y|^(1-2a) and the graded sums
  converge geometrically in the subdivision depth.

Everything here is a pure function of immutable inputs; point sets are
cached per configuration and marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .domain import HybridDomain

__all__ = [
    "GaussRule",
    "KernelMoments",
    "PairTemplates",
    "build_pair_templates",
    "cell_gauss",
    "gagliardo_pair_integral",
    "gauss_rule",
    "hat_cell_moments",
    "interface_moment_blocks",
    "interval_kernel_moments",
    "kernel_moment",
    "kernel_moments",
    "smooth_integral",
]


@dataclass(frozen=True)
class GaussRule:
    """Gauss-Legendre rule on (-1, 1); exact for degree <= 2*order - 1."""

    order: int
    points: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def gauss_rule(order: int) -> GaussRule:
    if order < 1:
        raise ValueError("order must be >= 1")
    pts, wts = np.polynomial.legendre.leggauss(order)
    pts.flags.writeable = False
    wts.flags.writeable = False
    return GaussRule(order, pts, wts)


def _mapped(rule: GaussRule, lo: float, hi: float):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return mid + half * rule.points, half * rule.weights


# --- kernel moments ----------------------------------------------------------


def _power_integral(lo: float, hi: float, beta: float) -> float:
    """Integral of t^beta over [lo, hi] with 0 < lo < hi.

    Uses expm1 so the formula stays accurate when beta + 1 is tiny (the
    naive difference of powers cancels catastrophically there).
    """
    p = beta + 1.0
    if p == 0.0:
        return math.log(hi / lo)
    return lo**p * math.expm1(p * math.log(hi / lo)) / p


def interval_kernel_moments(k: int, alpha: float, lo: float, hi: float):
    """(m0, m1, m2): integrals of x^j * (k - x)^(-(1+2a)) over [lo, hi].

    Substituting t = k - x reduces each moment to power integrals of t;
    the antiderivatives are elementary for every a in (0, 1).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha out of (0,1)")
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError("moment interval must satisfy 0 <= lo < hi <= 1")
    if k < 2:
        raise ValueError("k must be >= 2")
    e = 1.0 + 2.0 * alpha
    u1, u2 = k - hi, k - lo
    m0 = _power_integral(u1, u2, -e)
    i1 = _power_integral(u1, u2, 1.0 - e)
    i2 = _power_integral(u1, u2, 2.0 - e)
    m1 = k * m0 - i1
    m2 = k * k * m0 - 2.0 * k * i1 + i2
    return m0, m1, m2


def kernel_moment(k: int, alpha: float, j: int) -> float:
    """Closed-form value of the j-th node-weight moment over [0, 1]."""
    if j not in (0, 1, 2):
        raise ValueError(f"unsupported j: {j}")
    return interval_kernel_moments(k, alpha, 0.0, 1.0)[j]


@dataclass(frozen=True)
class KernelMoments:
    """Moments of the interface weight of one node over [0, 1]."""

    node: int
    alpha: float
    m0: float
    m1: float
    m2: float


def kernel_moments(k: int, alpha: float) -> KernelMoments:
    m0, m1, m2 = interval_kernel_moments(k, alpha, 0.0, 1.0)
    return KernelMoments(node=k, alpha=alpha, m0=m0, m1=m1, m2=m2)


def hat_cell_moments(k: int, alpha: float, lo: float, hi: float):
    """Exact integrals of hat-basis products against w_k over one cell.

    Returns (g0, g1, G00, G01, G11) where g_i pairs the weight with the
    local linear shape functions lam0 = (hi - x)/h, lam1 = (x - lo)/h and
    G_ij with their products.  Products of two local hats are quadratic,
    so the three power moments determine everything exactly.
    """
    m0, m1, m2 = interval_kernel_moments(k, alpha, lo, hi)
    h = hi - lo
    g0 = (hi * m0 - m1) / h
    g1 = (m1 - lo * m0) / h
    h2 = h * h
    g00 = (hi * hi * m0 - 2.0 * hi * m1 + m2) / h2
    g11 = (m2 - 2.0 * lo * m1 + lo * lo * m0) / h2
    g01 = ((lo + hi) * m1 - lo * hi * m0 - m2) / h2
    return g0, g1, g00, g01, g11


@lru_cache(maxsize=128)
def interface_moment_blocks(alpha: float, mesh_intervals: int, num_nodes: int):
    """Assembled interface moment data for a whole mesh.

    Returns (m0, g, g_sum):
      m0[k]     zero-th moment of node k's weight over [0, 1];
      g[i, k]   integral of hat i against node k's weight;
      g_sum     sum over nodes of the hat-hat weight Gram matrices.
    """
    m = mesh_intervals
    n = num_nodes
    m0 = np.empty(n)
    g = np.zeros((m + 1, n))
    g_sum = np.zeros((m + 1, m + 1))
    for col, k in enumerate(range(2, n + 2)):
        m0[col] = kernel_moment(k, alpha, 0)
        for e in range(m):
            lo, hi = e / m, (e + 1) / m
            g0, g1, g00, g01, g11 = hat_cell_moments(k, alpha, lo, hi)
            g[e, col] += g0
            g[e + 1, col] += g1
            g_sum[e, e] += g00
            g_sum[e, e + 1] += g01
            g_sum[e + 1, e] += g01
            g_sum[e + 1, e + 1] += g11
    for arr in (m0, g, g_sum):
        arr.flags.writeable = False
    return m0, g, g_sum


# --- pair quadrature for the singular double integral ------------------------
#
# All point sets live in unit coordinates of a cell pair at integer cell
# distance d: a point (X, Y) maps to x = (e + X) * h, y = (e + d + Y) * h, so
# the kernel separation is sep = d + Y - X.  The sets below return
# (X, Y, sep, w) with plain product weights; consumers fold in the kernel
# sep^(-(1+2a)) and the global scale h^(1-2a).


@lru_cache(maxsize=None)
def _samecell_points(order: int, levels: int):
    """Identical-cell set: dyadic strips in t = |X - Y| graded to the diagonal."""
    rule = gauss_rule(order)
    xs, ys, seps, ws = [], [], [], []
    strips = []
    hi = 1.0
    for _ in range(levels):
        strips.append((hi / 2.0, hi))
        hi /= 2.0
    strips.append((0.0, hi))
    for lo, hi in strips:
        tq, tw = _mapped(rule, lo, hi)
        for t, wt in zip(tq, tw):
            # lower triangle: Y = X - t
            xq, xw = _mapped(rule, t, 1.0)
            xs.append(xq)
            ys.append(xq - t)
            seps.append(np.full_like(xq, t))
            ws.append(wt * xw)
            # upper triangle: Y = X + t
            xq, xw = _mapped(rule, 0.0, 1.0 - t)
            xs.append(xq)
            ys.append(xq + t)
            seps.append(np.full_like(xq, t))
            ws.append(wt * xw)
    out = tuple(np.concatenate(a) for a in (xs, ys, seps, ws))
    for arr in out:
        arr.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _adjacent_points(order: int, levels: int):
    """Adjacent-cell set: dyadic boxes graded toward the shared corner.

    In pair coordinates the singular point is (X, Y) = (1, 0); each level
    peels an L-shaped shell of three rectangles off the corner box.
    """
    rule = gauss_rule(order)
    rects = []
    a = 1.0
    for _ in range(levels):
        b = a / 2.0
        rects.append((1.0 - a, 1.0 - b, 0.0, b))
        rects.append((1.0 - b, 1.0, b, a))
        rects.append((1.0 - a, 1.0 - b, b, a))
        a = b
    rects.append((1.0 - a, 1.0, 0.0, a))
    xs, ys, ws = [], [], []
    for x0, x1, y0, y1 in rects:
        xq, xw = _mapped(rule, x0, x1)
        yq, yw = _mapped(rule, y0, y1)
        gx, gy = np.meshgrid(xq, yq, indexing="ij")
        gw = np.outer(xw, yw)
        xs.append(gx.ravel())
        ys.append(gy.ravel())
        ws.append(gw.ravel())
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    sep = (1.0 - x) + y
    w = np.concatenate(ws)
    for arr in (x, y, sep, w):
        arr.flags.writeable = False
    return x, y, sep, w


@lru_cache(maxsize=None)
def _offset_points(order: int):
    """Tensor Gauss set on the unit square, for well-separated pairs."""
    rule = gauss_rule(order)
    xq, xw = _mapped(rule, 0.0, 1.0)
    gx, gy = np.meshgrid(xq, xq, indexing="ij")
    gw = np.outer(xw, xw)
    x, y, w = gx.ravel(), gy.ravel(), gw.ravel()
    for arr in (x, y, w):
        arr.flags.writeable = False
    return x, y, w


@dataclass(frozen=True)
class PairTemplates:
    """Flattened per-distance quadrature data for all cell pairs of a mesh.

    Distance d occupies the slice offsets[d]:offsets[d+1] of the flat
    arrays.  a0/a1 (b0/b1) are the local hat values at the first (second)
    cell's points; w carries the plain weights, the kernel and the global
    mesh scaling, so a pair integral is a plain weighted sum.  Mirrored
    pairs (f, e) are not stored; consumers double the d >= 1 sums.
    """

    mesh_intervals: int
    alpha: float
    order: int
    subdivisions: int
    offsets: np.ndarray
    x: np.ndarray
    y: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    w: np.ndarray


@lru_cache(maxsize=64)
def build_pair_templates(
    mesh_intervals: int, alpha: float, order: int, subdivisions: int
) -> PairTemplates:
    m = mesh_intervals
    e = 1.0 + 2.0 * alpha
    scale = (1.0 / m) ** (1.0 - 2.0 * alpha)
    xs, ys, ws = [], [], []
    offsets = np.zeros(m + 1, dtype=np.int64)
    for d in range(m):
        if d == 0:
            x, y, sep, w = _samecell_points(order, subdivisions)
        elif d == 1:
            x, y, sep, w = _adjacent_points(order, subdivisions)
        else:
            x, y, w = _offset_points(order)
            sep = d + y - x
        xs.append(x)
        ys.append(y)
        ws.append(scale * w * sep**-e)
        offsets[d + 1] = offsets[d] + x.size
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    w = np.concatenate(ws)
    a0, a1 = 1.0 - x, x
    b0, b1 = 1.0 - y, y
    arrays = (offsets, x, y, a0, a1, b0, b1, w)
    for arr in arrays:
        arr.flags.writeable = False
    return PairTemplates(m, alpha, order, subdivisions, *arrays)


def gagliardo_pair_integral(
    cell_a,
    cell_b,
    fa,
    fb,
    alpha: float,
    rule: GaussRule,
    subdivisions: int,
) -> float:
    """Contribution of one cell pair to the singular double integral.

    ``cell_a``/``cell_b`` are (lo, hi) intervals of one uniform mesh and
    ``fa``/``fb`` the endpoint values of the local linear functions on
    them.  Computes the integral of (fa(x) - fb(y))^2 |x - y|^(-(1+2a))
    over cell_a x cell_b.  Pairs are evaluated once in canonical order and
    mirrored, so swapping the arguments returns bit-identical values.
    """
    (a0c, a1c), (b0c, b1c) = cell_a, cell_b
    fa0, fa1 = fa
    fb0, fb1 = fb
    if a0c > b0c:
        (a0c, a1c, b0c, b1c) = (b0c, b1c, a0c, a1c)
        (fa0, fa1, fb0, fb1) = (fb0, fb1, fa0, fa1)
    h = a1c - a0c
    if abs((b1c - b0c) - h) > 1e-12 * h:
        raise ValueError("cells must have equal width (one uniform mesh)")
    dist = (b0c - a0c) / h
    d = int(round(dist))
    if abs(dist - d) > 1e-9:
        raise ValueError("cells must be aligned to one uniform mesh")
    if d == 0:
        x, y, sep, w = _samecell_points(rule.order, subdivisions)
    elif d == 1:
        x, y, sep, w = _adjacent_points(rule.order, subdivisions)
    else:
        x, y, w = _offset_points(rule.order)
        sep = d + y - x
    e = 1.0 + 2.0 * alpha
    va = fa0 * (1.0 - x) + fa1 * x
    vb = fb0 * (1.0 - y) + fb1 * y
    diff = va - vb
    return float(h ** (1.0 - 2.0 * alpha) * np.dot(w * sep**-e, diff * diff))


# --- smooth composite quadrature over the mesh --------------------------------


@lru_cache(maxsize=64)
def cell_gauss(mesh_intervals: int, order: int):
    """Composite Gauss data: points (M, q), weights (q,), local coords (q,)."""
    rule = gauss_rule(order)
    tq, tw = _mapped(rule, 0.0, 1.0)
    m = mesh_intervals
    starts = np.arange(m)[:, None] / m
    xs = starts + tq[None, :] / m
    ws = tw / m
    tloc = tq
    for arr in (xs, ws, tloc):
        arr.flags.writeable = False
    return xs, ws, tloc


def smooth_integral(g, rule: GaussRule, mesh: HybridDomain) -> float:
    """Composite Gauss integral of ``g`` over [0, 1] on the mesh cells."""
    xs, ws, _ = cell_gauss(mesh.mesh_intervals, rule.order)
    vals = np.asarray(g(xs), dtype=float)
    if vals.shape != xs.shape:
        vals = np.vectorize(g)(xs).astype(float)
    return float(vals.sum(axis=0) @ ws)
