"""Solving the discrete weak problem and checking its optimality structure.

The primary solve is a Cholesky factorization of A + lambda * mass; the
factorization succeeding doubles as the positive-definiteness certificate
behind uniqueness.  Residual evaluation never reuses the assembled matrix:
weak residuals re-integrate the bilinear pairings from the solution values
(hats by a fresh quadrature pass, interface terms by composite Gauss),
so they also cross-check the assembly itself.

``minimize_functional`` is an independent oracle: a conjugate-direction
minimization of the quadratic functional driven purely by functional
evaluations.  Central differences and second differences of a quadratic
are exact at any step, so the gradient and the line search carry no
truncation error, only roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import kernels
from .assembly import AssembledSystem, assemble
from .domain import HybridFunction, ProblemSpec, eval_continuous, spec_to_dict
from .energy import dd_weight_matrix, l2_mu_inner, pair_templates
from .quadrature import cell_gauss, gauss_rule, interface_moment_blocks

__all__ = [
    "FactorizationError",
    "Solution",
    "bilinear_form",
    "evaluate_J",
    "gradient_check",
    "minimize_functional",
    "solution_to_dict",
    "solve",
    "strong_residuals",
    "weak_residual_vector",
]


class FactorizationError(RuntimeError):
    """Raised when the system matrix is not symmetric positive definite."""


@lru_cache(maxsize=16)
def _cached_system(spec: ProblemSpec) -> tuple[AssembledSystem, np.ndarray, np.ndarray]:
    system = assemble(spec)
    a_full = system.full_matrix()
    a_full.flags.writeable = False
    h = a_full + spec.lam * system.mass
    h.flags.writeable = False
    return system, a_full, h


def _spd_solve(h: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(h, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            "system matrix is not SPD; check lambda > 0 and the assembly"
        ) from exc
    return scipy.linalg.cho_solve(factor, rhs)


@dataclass(frozen=True)
class Solution:
    """A solved instance with its a-posteriori certificates."""

    u: HybridFunction
    j_value: float
    weak_residual: float
    solver_iterations: int
    spd_certified: bool


def evaluate_J(u: HybridFunction, spec: ProblemSpec) -> float:
    """Value of the quadratic functional at u.

    Equals half the total energy plus half the weighted hybrid L2 norm
    minus the load pairing; evaluated through the assembled quadratic
    forms, which agree with the componentwise energies to roundoff.
    """
    system, a_full, _ = _cached_system(spec)
    x = u.to_vector()
    quad = x @ a_full @ x + spec.lam * (x @ system.mass @ x)
    return float(0.5 * quad - system.load @ x)


def _interface_gauss_terms(u: HybridFunction, spec: ProblemSpec):
    """Composite-Gauss interface pairings, freshly evaluated from values.

    Returns (r_cont, r_node): for each hat i the value
    -2 * sum_k int (a_k - v) phi_i w_k, and for each node k the value
    2 * int (a_k - v) w_k.
    """
    domain = spec.domain
    m = domain.mesh_intervals
    xs, ws, tloc = cell_gauss(m, spec.quad_order)
    c = u.cont_coeffs
    vvals = c[:m, None] + tloc[None, :] * (c[1 : m + 1, None] - c[:m, None])
    r_cont = np.zeros(m + 1)
    r_node = np.zeros(domain.num_nodes)
    expo = 1.0 + 2.0 * domain.alpha
    for col, k in enumerate(range(2, domain.num_nodes + 2)):
        wk = (k - xs) ** -expo
        gap = u.node_values[col] - vvals
        r_node[col] = 2.0 * float(((gap * wk) @ ws).sum())
        contrib = -2.0 * (gap * wk)
        r_cont[:m] += (contrib * (1.0 - tloc)) @ ws
        r_cont[1 : m + 1] += (contrib * tloc) @ ws
    return r_cont, r_node


def weak_residual_vector(u: HybridFunction, spec: ProblemSpec) -> np.ndarray:
    """Residual of the weak identity against every basis test function.

    Continuous tests are the mesh hats, discrete tests the node
    indicators.  All pairings are re-evaluated from the function values.
    """
    u.validate_for(spec.domain)
    domain = spec.domain
    system, _, _ = _cached_system(spec)
    r = np.zeros(domain.dim)
    nc = domain.n_cont
    # energy pairings
    r[:nc] = kernels.cc_apply(u.cont_coeffs, pair_templates(spec))
    r_cont, r_node = _interface_gauss_terms(u, spec)
    r[:nc] += r_cont
    w = dd_weight_matrix(domain.num_nodes, domain.alpha)
    a = u.node_values
    r[nc:] = r_node + 2.0 * (w.sum(axis=1) * a - w @ a)
    # zero-order pairings, Gauss on the continuous part
    xs, ws, tloc = cell_gauss(domain.mesh_intervals, spec.quad_order)
    c = u.cont_coeffs
    m = domain.mesh_intervals
    vvals = c[:m, None] + tloc[None, :] * (c[1 : m + 1, None] - c[:m, None])
    r[:m] += spec.lam * ((vvals * (1.0 - tloc)) @ ws)
    r[1 : m + 1] += spec.lam * ((vvals * tloc) @ ws)
    r[nc:] += spec.lam * a
    return r - system.load


def solve(spec: ProblemSpec) -> Solution:
    """Direct SPD solve of the discrete weak problem."""
    system, _, h = _cached_system(spec)
    x = _spd_solve(h, system.load)
    u = HybridFunction.from_vector(x, spec.domain)
    residual = float(np.max(np.abs(weak_residual_vector(u, spec))))
    return Solution(
        u=u,
        j_value=evaluate_J(u, spec),
        weak_residual=residual,
        solver_iterations=0,
        spd_certified=True,
    )


def bilinear_form(u: HybridFunction, w: HybridFunction, spec: ProblemSpec) -> float:
    """The energy bilinear pairing of two hybrid functions.

    Continuous-continuous by the pair quadrature, interface by exact
    moments, discrete-discrete by the exact double sum.
    """
    u.validate_for(spec.domain)
    w.validate_for(spec.domain)
    cc = kernels.cc_pairing(u.cont_coeffs, w.cont_coeffs, pair_templates(spec))
    m0, g, g_sum = interface_moment_blocks(
        spec.domain.alpha, spec.domain.mesh_intervals, spec.domain.num_nodes
    )
    au, aw = u.node_values, w.node_values
    cu, cw = u.cont_coeffs, w.cont_coeffs
    interface = 2.0 * float(
        au @ (m0 * aw) - au @ (g.T @ cw) - aw @ (g.T @ cu) + cu @ (g_sum @ cw)
    )
    wd = dd_weight_matrix(spec.domain.num_nodes, spec.domain.alpha)
    dd = float(au @ (wd.sum(axis=1) * aw) - au @ (wd @ aw)) * 2.0
    return cc + interface + dd


def gradient_check(
    spec: ProblemSpec, u: HybridFunction, samples: int, step: float = 1e-2
) -> float:
    """Worst relative gap between the analytic derivative and differences.

    The derivative of the functional at u in direction phi is
    a(u, phi) + lambda (u, phi) - (f, phi); central differences of a
    quadratic reproduce it exactly up to roundoff for any step.
    """
    system, _, _ = _cached_system(spec)
    rng = np.random.default_rng(spec.seed)
    worst = 0.0
    for _ in range(samples):
        phi = HybridFunction(
            rng.standard_normal(spec.domain.n_cont),
            rng.standard_normal(spec.domain.num_nodes),
        )
        analytic = (
            bilinear_form(u, phi, spec)
            + spec.lam * l2_mu_inner(u, phi)
            - float(system.load @ phi.to_vector())
        )
        fd = (
            evaluate_J(u + step * phi, spec) - evaluate_J(u + (-step) * phi, spec)
        ) / (2.0 * step)
        err = abs(analytic - fd) / max(1.0, abs(analytic), abs(fd))
        worst = max(worst, err)
    return worst


def strong_residuals(
    sol: Solution,
    spec: ProblemSpec,
    sample_points: np.ndarray | None = None,
    eps: float = 1e-2,
):
    """Pointwise residuals of the formal strong system.

    Node residuals are exact rows of the Galerkin system (moment
    expansion) and vanish for a converged solve.  Continuous residuals
    approximate the principal value by symmetric exclusion of radius
    ``eps`` and are reported as diagnostics only; no convergence in eps is
    claimed.
    """
    domain = spec.domain
    u = sol.u
    c = u.cont_coeffs
    a = u.node_values
    expo = 1.0 + 2.0 * domain.alpha
    m0, g, _ = interface_moment_blocks(domain.alpha, domain.mesh_intervals, domain.num_nodes)
    w = dd_weight_matrix(domain.num_nodes, domain.alpha)
    coupling = 2.0 * (w.sum(axis=1) * a - w @ a)
    node_res = np.abs(
        2.0 * (a * m0 - g.T @ c)
        + coupling
        + spec.lam * a
        - spec.forcing.node_loads_array
    )

    if sample_points is None:
        sample_points = np.linspace(0.1, 0.9, 9)
    rule = gauss_rule(spec.quad_order)
    cont_res = np.empty(len(sample_points))
    half = 0.5 * (rule.points + 1.0)
    for i, x0 in enumerate(np.asarray(sample_points, dtype=float)):
        v0 = eval_continuous(u, x0)
        total = 0.0
        for lo, hi in ((0.0, x0 - eps), (x0 + eps, 1.0)):
            if hi <= lo:
                continue
            # split at mesh breakpoints; the interpolant kinks there
            cuts = np.unique(
                np.concatenate(
                    [[lo, hi], domain.breakpoints[(domain.breakpoints > lo) & (domain.breakpoints < hi)]]
                )
            )
            for s0, s1 in zip(cuts[:-1], cuts[1:]):
                ys = s0 + (s1 - s0) * half
                wts = 0.5 * (s1 - s0) * rule.weights
                total += float(
                    np.dot(wts, (v0 - eval_continuous(u, ys)) * np.abs(x0 - ys) ** -expo)
                )
        nodes = domain.nodes
        interface = 2.0 * float(np.sum((v0 - a) * (nodes - x0) ** -expo))
        f0 = float(spec.forcing.evaluate(np.asarray(x0)))
        cont_res[i] = abs(2.0 * total + interface + spec.lam * v0 - f0)
    return cont_res, node_res


def minimize_functional(
    spec: ProblemSpec,
    start: np.ndarray | None = None,
    max_iters: int = 100_000,
    rel_tol: float = 1e-14,
    grad_tol: float = 1e-12,
):
    """Conjugate-direction minimization of the functional, values only.

    Gradient components come from unit-step central differences of the
    functional and curvatures from second differences; both are exact for
    a quadratic.  Stops on relative functional decrease below ``rel_tol``
    once the gradient is small (``grad_tol`` polish keeps independent
    restarts agreeing far below the decrease threshold), or at the
    iteration cap.

    Returns (u, iterations, j_value).
    """
    domain = spec.domain
    dim = domain.dim

    def j_of(x: np.ndarray) -> float:
        return evaluate_J(HybridFunction.from_vector(x, domain), spec)

    def fd_gradient(x: np.ndarray) -> np.ndarray:
        grad = np.empty(dim)
        for i in range(dim):
            xp = x.copy()
            xp[i] += 1.0
            xm = x.copy()
            xm[i] -= 1.0
            grad[i] = 0.5 * (j_of(xp) - j_of(xm))
        return grad

    x = np.zeros(dim) if start is None else np.array(start, dtype=float)
    j_cur = j_of(x)
    grad = fd_gradient(x)
    direction = -grad
    gg = float(grad @ grad)
    iterations = 0
    stalled = 0
    load_scale = max(1.0, float(np.max(np.abs(_cached_system(spec)[0].load))))
    while iterations < max_iters:
        iterations += 1
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            break
        # probe along the unit direction: the second difference then sits
        # at O(1) curvature scale instead of drowning in roundoff when the
        # remaining step is tiny
        unit = direction / norm
        curvature = j_of(x + unit) - 2.0 * j_cur + j_of(x - unit)
        if curvature <= 0.0:
            break
        step = -float(grad @ unit) / curvature
        x = x + step * unit
        j_new = j_of(x)
        grad = fd_gradient(x)
        gg_new = float(grad @ grad)
        small_decrease = abs(j_cur - j_new) < rel_tol * max(1.0, abs(j_cur))
        j_cur = j_new
        stalled = stalled + 1 if small_decrease else 0
        polished = float(np.max(np.abs(grad))) <= grad_tol * load_scale
        if stalled >= 1 and (polished or stalled > 25):
            break
        if iterations % dim == 0 or gg == 0.0:
            direction = -grad
        else:
            direction = -grad + (gg_new / gg) * direction
        gg = gg_new
        if gg == 0.0:
            break
    return HybridFunction.from_vector(x, domain), iterations, j_cur


def solution_to_dict(sol: Solution, spec: ProblemSpec) -> dict:
    """JSON-ready payload: coefficients, certificates, and a spec echo."""
    _, node_res = strong_residuals(sol, spec)
    return {
        "cont_coeffs": [float(v) for v in sol.u.cont_coeffs],
        "node_values": [float(v) for v in sol.u.node_values],
        "j_value": sol.j_value,
        "weak_residual": sol.weak_residual,
        "node_residuals": [float(v) for v in node_res],
        "solver_iterations": sol.solver_iterations,
        "spd_certified": sol.spd_certified,
        "spec": spec_to_dict(spec),
    }
