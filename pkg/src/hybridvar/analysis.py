"""Numerical certification of the energy inequalities.

Every check sweeps random hybrid functions (independent standard normal
coefficients and node values, seeded) and reports worst-case margins of
the claimed two-sided bounds.  Margins are scaled by the magnitude of the
larger side so a fixed tolerance stays meaningful across sample scales;
all sides of every inequality vanish together on constants.

The Poincare-type bound is certified two ways: the proof constant gives
the upper bound 1/C1, and the sharp discrete constant is computed as the
largest generalized Rayleigh quotient of the oscillation form against the
energy form with the shared constant null vector deflated.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .assembly import assemble, cc_matrix, mass_matrix_blocks
from .domain import HybridFunction, ProblemSpec, eval_continuous
from .energy import dd_weight_matrix, energy_total, pair_templates
from .quadrature import cell_gauss, interface_moment_blocks

__all__ = [
    "CoercivityConstants",
    "EigenIterationError",
    "PoincareEstimate",
    "check_coercivity",
    "check_interface_estimate",
    "check_product_norm_lower",
    "coercivity_constants",
    "direct_energy_quadrature",
    "energy_identity_residual",
    "poincare_estimate",
    "random_sample_matrix",
]


class EigenIterationError(RuntimeError):
    """Raised when the power iteration does not reach its tolerance."""


@dataclass(frozen=True)
class CoercivityConstants:
    """Explicit constants of the interface and coercivity estimates.

    c1, c2 bracket the interface energy against the plain squared gaps;
    C1 = 2*c1 and C2 = max(2N, 2 + 4*S) with S the one-sided sum of node
    interaction weights bound the full energy against seminorm plus
    oscillation plus node deviations.
    """

    c1: float
    c2: float
    C1: float
    C2: float
    inv_C1: float

    @classmethod
    def for_problem(
        cls, alpha: float, num_nodes: int, c1_scale: float = 1.0
    ) -> "CoercivityConstants":
        c1 = c1_scale * float(num_nodes + 1) ** -(1.0 + 2.0 * alpha)
        s = sum(float(m) ** -(1.0 + 2.0 * alpha) for m in range(1, num_nodes))
        c1_big = 2.0 * c1
        c2_big = max(2.0 * num_nodes, 2.0 + 4.0 * s)
        return cls(c1=c1, c2=1.0, C1=c1_big, C2=c2_big, inv_C1=1.0 / c1_big)


def coercivity_constants(spec: ProblemSpec, c1_scale: float = 1.0) -> CoercivityConstants:
    return CoercivityConstants.for_problem(
        spec.domain.alpha, spec.domain.num_nodes, c1_scale
    )


def random_sample_matrix(spec: ProblemSpec, samples: int, seed: int | None = None):
    """(samples, dim) standard-normal coefficient matrix, seeded."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    return rng.standard_normal((samples, spec.domain.dim))


@lru_cache(maxsize=32)
def _sweep_forms(spec: ProblemSpec):
    """Quadratic-form matrices used to batch the random sweeps."""
    domain = spec.domain
    a_cc = cc_matrix(
        domain.mesh_intervals, domain.alpha, spec.quad_order, spec.singular_subdivisions
    )
    m0, g, g_sum = interface_moment_blocks(
        domain.alpha, domain.mesh_intervals, domain.num_nodes
    )
    w = dd_weight_matrix(domain.num_nodes, domain.alpha)
    dd_form = 2.0 * (np.diag(w.sum(axis=1)) - w)
    mass_c = mass_matrix_blocks(domain.mesh_intervals)
    return a_cc, m0, g, g_sum, dd_form, mass_c


def _component_table(spec: ProblemSpec, x: np.ndarray) -> dict[str, np.ndarray]:
    """Batched per-sample energy components for a (samples, dim) matrix."""
    domain = spec.domain
    nc = domain.n_cont
    m = domain.mesh_intervals
    n = domain.num_nodes
    a_cc, m0, g, g_sum, dd_form, mass_c = _sweep_forms(spec)
    c = x[:, :nc]
    a = x[:, nc:]
    e_cc = np.einsum("si,ij,sj->s", c, a_cc, c)
    cross = (a * (c @ g)).sum(axis=1)
    e_cd = (a * a) @ m0 - 2.0 * cross + np.einsum("si,ij,sj->s", c, g_sum, c)
    e_dd = np.einsum("si,ij,sj->s", a, dd_form, a)
    total = e_cc + 2.0 * e_cd + e_dd
    v_bar = (0.5 * c[:, 0] + c[:, 1:-1].sum(axis=1) + 0.5 * c[:, -1]) / m
    shifted = c - v_bar[:, None]
    osc = (
        shifted[:, :-1] ** 2 + shifted[:, :-1] * shifted[:, 1:] + shifted[:, 1:] ** 2
    ).sum(axis=1) / (3.0 * m)
    dev_sum = ((a - v_bar[:, None]) ** 2).sum(axis=1)
    l2v = np.einsum("si,ij,sj->s", c, mass_c, c)
    sum_a2 = (a * a).sum(axis=1)
    # plain squared gaps, assembled directly (not through the mean identity)
    gap = sum_a2 - 2.0 * a.sum(axis=1) * v_bar + n * l2v
    return {
        "e_cc": e_cc,
        "e_cd": e_cd,
        "e_dd": e_dd,
        "total": total,
        "osc": osc,
        "dev_sum": dev_sum,
        "l2v": l2v,
        "sum_a2": sum_a2,
        "gap": gap,
    }


def _scaled_margin(diff: np.ndarray, *sides: np.ndarray) -> float:
    scale = np.maximum(1.0, np.max(np.abs(np.stack(sides)), axis=0))
    return float(np.min(diff / scale))


def check_interface_estimate(spec: ProblemSpec, samples: int, c1_scale: float = 1.0):
    """Worst margins of c1 * gap <= interface energy <= c2 * gap."""
    consts = coercivity_constants(spec, c1_scale)
    table = _component_table(spec, random_sample_matrix(spec, samples))
    lower = _scaled_margin(
        table["e_cd"] - consts.c1 * table["gap"], table["e_cd"], consts.c1 * table["gap"]
    )
    upper = _scaled_margin(
        consts.c2 * table["gap"] - table["e_cd"], table["e_cd"], consts.c2 * table["gap"]
    )
    return lower, upper


def check_coercivity(spec: ProblemSpec, samples: int, c1_scale: float = 1.0):
    """Worst margins of C1 * Q <= total energy <= C2 * Q.

    Q is the seminorm plus the oscillation plus the node deviations
    around the continuous mean.
    """
    consts = coercivity_constants(spec, c1_scale)
    table = _component_table(spec, random_sample_matrix(spec, samples))
    q = table["e_cc"] + table["osc"] + table["dev_sum"]
    lower = _scaled_margin(table["total"] - consts.C1 * q, table["total"], consts.C1 * q)
    upper = _scaled_margin(consts.C2 * q - table["total"], table["total"], consts.C2 * q)
    return lower, upper


def check_product_norm_lower(spec: ProblemSpec, samples: int) -> float:
    """Worst margin of the constant-1 product-norm lower bound.

    The squared hybrid norm dominates the continuous fractional norm plus
    the plain sum of squared node values.
    """
    table = _component_table(spec, random_sample_matrix(spec, samples))
    lhs = table["l2v"] + table["sum_a2"] + table["total"]
    rhs = table["l2v"] + table["e_cc"] + table["sum_a2"]
    return _scaled_margin(lhs - rhs, lhs, rhs)


@dataclass(frozen=True)
class PoincareEstimate:
    """Sharp discrete constant against the proof-constant upper bound."""

    theta_max: float
    upper_bound: float
    iterations: int


def _numerator_form(spec: ProblemSpec) -> np.ndarray:
    """Matrix of oscillation plus node deviations around the mean."""
    domain = spec.domain
    nc = domain.n_cont
    n = domain.num_nodes
    m = domain.mesh_intervals
    mass_c = mass_matrix_blocks(m)
    d = np.full(nc, 1.0 / m)
    d[0] = d[-1] = 0.5 / m
    b = np.zeros((domain.dim, domain.dim))
    b[:nc, :nc] = mass_c + (n - 1.0) * np.outer(d, d)
    b[:nc, nc:] = -d[:, None]
    b[nc:, :nc] = -d[None, :]
    b[np.arange(nc, domain.dim), np.arange(nc, domain.dim)] = 1.0
    return b


def poincare_estimate(
    spec: ProblemSpec, tol: float = 1e-8, max_iters: int = 200_000
) -> PoincareEstimate:
    """Largest Rayleigh quotient of the oscillation form against the energy.

    Both forms annihilate constants, so the constant vector is removed by
    an explicit orthogonal complement before the power iteration; the
    energy form is positive definite there.
    """
    system = assemble(spec)
    a = system.full_matrix()
    b = _numerator_form(spec)
    dim = spec.domain.dim
    ones = np.ones((dim, 1))
    q, _ = np.linalg.qr(ones, mode="complete")
    z = q[:, 1:]
    a_r = z.T @ a @ z
    b_r = z.T @ b @ z
    try:
        chol = scipy.linalg.cholesky(a_r, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by assembly
        raise EigenIterationError("energy form is singular on the complement") from exc
    tmp = scipy.linalg.solve_triangular(chol, b_r, lower=True)
    s = scipy.linalg.solve_triangular(chol, tmp.T, lower=True)
    s = 0.5 * (s + s.T)
    rng = np.random.default_rng(spec.seed)
    v = rng.standard_normal(dim - 1)
    v /= np.linalg.norm(v)
    theta = float(v @ s @ v)
    consts = coercivity_constants(spec)
    for iteration in range(1, max_iters + 1):
        sv = s @ v
        norm = np.linalg.norm(sv)
        if norm == 0.0:
            return PoincareEstimate(0.0, consts.inv_C1, iteration)
        v = sv / norm
        theta_new = float(v @ s @ v)
        if abs(theta_new - theta) <= tol * max(abs(theta_new), 1e-30):
            return PoincareEstimate(theta_new, consts.inv_C1, iteration)
        theta = theta_new
    raise EigenIterationError("eigeniteration did not converge")


def _interp_table(points: np.ndarray, m: int):
    """Frozen interpolation data of eval_continuous at fixed points."""
    scaled = points * m
    idx = np.clip(np.floor(scaled).astype(np.intp), 0, m - 1)
    t = scaled - idx
    near = np.clip(np.rint(scaled).astype(np.intp), 0, m)
    hit = near / m == points
    for arr in (idx, t, near, hit):
        arr.flags.writeable = False
    return idx, t, near, hit


def _interp_eval(c: np.ndarray, table) -> np.ndarray:
    idx, t, near, hit = table
    vals = c[idx] + t * (c[idx + 1] - c[idx])
    return np.where(hit, c[near], vals)


@lru_cache(maxsize=8)
def _direct_cc_points(spec: ProblemSpec):
    """Global quadrature data of all ordered cell pairs, concatenated.

    The weights fold in the ordered-pair multiplicity, so the
    continuous-continuous double integral of any g(x, y) is one weighted
    sum of pointwise values; interpolation tables are frozen because the
    points do not depend on the integrand.
    """
    domain = spec.domain
    m = domain.mesh_intervals
    h = domain.h
    tpl = pair_templates(spec)
    xs, ys, ws = [], [], []
    for d in range(m):
        sl = slice(tpl.offsets[d], tpl.offsets[d + 1])
        e = np.arange(m - d)[:, None]
        xs.append(np.clip((e + tpl.x[None, sl]) * h, 0.0, 1.0).ravel())
        ys.append(np.clip((e + d + tpl.y[None, sl]) * h, 0.0, 1.0).ravel())
        mult = 1.0 if d == 0 else 2.0
        ws.append(np.broadcast_to(mult * tpl.w[sl], (m - d, sl.stop - sl.start)).ravel())
    wg = np.concatenate(ws)
    wg.flags.writeable = False
    return _interp_table(np.concatenate(xs), m), _interp_table(np.concatenate(ys), m), wg


def direct_energy_quadrature(u: HybridFunction, spec: ProblemSpec) -> float:
    """Straightforward product-measure quadrature of the defining energy.

    Re-derives the total energy without the componentwise shortcuts: the
    continuous block is summed over ordered cell pairs from pointwise
    values of u, both mixed blocks are integrated by composite Gauss, and
    the discrete block is a raw double loop.  Serves as the oracle for the
    decomposition identity.
    """
    u.validate_for(spec.domain)
    domain = spec.domain
    m = domain.mesh_intervals
    expo = 1.0 + 2.0 * domain.alpha
    table_x, table_y, wg = _direct_cc_points(spec)
    diff = _interp_eval(u.cont_coeffs, table_x) - _interp_eval(u.cont_coeffs, table_y)
    total_cc = float(np.dot(wg, diff * diff))
    # the mixed blocks are integrated above the production order so the
    # oracle error stays below what it is checking, even on coarse meshes
    xs, ws, _ = cell_gauss(m, max(2 * spec.quad_order, 12))
    vvals = eval_continuous(u, xs.ravel()).reshape(xs.shape)
    total_cd = 0.0
    total_dc = 0.0
    for col, k in enumerate(range(2, domain.num_nodes + 2)):
        wk = (k - xs) ** -expo
        gap2 = (u.node_values[col] - vvals) ** 2
        total_cd += float(((gap2 * wk) @ ws).sum())
        gap2_rev = (vvals - u.node_values[col]) ** 2
        total_dc += float(((gap2_rev * wk) @ ws).sum())
    total_dd = 0.0
    a = u.node_values
    for i in range(a.size):
        for j in range(a.size):
            if i == j:
                continue
            total_dd += (a[i] - a[j]) ** 2 / abs(i - j) ** expo
    return total_cc + total_cd + total_dc + total_dd


def energy_identity_residual(spec: ProblemSpec, samples: int) -> float:
    """Worst relative gap between the breakdown total and the direct oracle."""
    rng = np.random.default_rng(spec.seed)
    worst = 0.0
    for _ in range(samples):
        u = HybridFunction(
            rng.standard_normal(spec.domain.n_cont),
            rng.standard_normal(spec.domain.num_nodes),
        )
        breakdown = energy_total(u, spec)
        direct = direct_energy_quadrature(u, spec)
        worst = max(worst, abs(breakdown.total - direct) / (1.0 + breakdown.total))
    return worst
