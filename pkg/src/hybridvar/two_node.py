"""The packaged two-node instance and its reduced affine oracle.

This is the smallest interesting configuration: the interval coupled to
the two nodes {2, 3}, with scalar loads F and G on the nodes.  Besides a
convenience constructor for the full problem, the module carries

* ``reduced_solve``: the minimizer over the four-parameter subspace of
  affine continuous parts, assembled from closed-form moments only (no
  quadrature), usable as an explicit oracle;
* ``check_splitting``: the componentwise optimality conditions, i.e. the
  weak identity tested against continuous hats and against each node
  indicator separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .domain import Forcing, HybridDomain, HybridFunction, ProblemSpec, make_domain
from .quadrature import gauss_rule, interface_moment_blocks, kernel_moment
from .solver import Solution, weak_residual_vector

__all__ = [
    "ReducedAffineState",
    "check_splitting",
    "example_spec",
    "forcing_moments",
    "reduced_solve",
]


@dataclass(frozen=True)
class ReducedAffineState:
    """Affine continuous part (slope m, intercept c) plus node values a, b."""

    m: float
    c: float
    a: float
    b: float

    def embed(self, domain: HybridDomain) -> HybridFunction:
        """Exact representation in the hat basis of any mesh."""
        if domain.num_nodes != 2:
            raise ValueError("reduced states embed into two-node domains only")
        return HybridFunction(
            self.m * domain.breakpoints + self.c, np.array([self.a, self.b])
        )

    def to_vector(self) -> np.ndarray:
        return np.array([self.m, self.c, self.a, self.b])


def example_spec(
    alpha: float,
    lam: float,
    f: Forcing | None,
    load_a: float,
    load_g: float,
    mesh_intervals: int,
    **knobs,
) -> ProblemSpec:
    """Problem spec for the two-node instance with node loads (F, G)."""
    if f is None:
        f = Forcing(kind="constant", params=(0.0,))
    forcing = Forcing(kind=f.kind, params=f.params, node_loads=(load_a, load_g))
    return ProblemSpec(
        domain=make_domain(alpha, 2, mesh_intervals),
        lam=lam,
        forcing=forcing,
        **knobs,
    )


def forcing_moments(f: Forcing, order: int = 8) -> tuple[float, float]:
    """(integral of f, integral of x*f) over [0, 1].

    Composite Gauss on the forcing's own breakpoints (sampled tables kink
    there); exact for the closed polynomial/sampled families at order 8.
    """
    if f.kind == "sampled":
        cuts = np.array([x for x, _ in f.params])
    else:
        cuts = np.linspace(0.0, 1.0, 65)
    rule = gauss_rule(order)
    half = 0.5 * (rule.points + 1.0)
    total0 = 0.0
    total1 = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        xs = lo + (hi - lo) * half
        ws = 0.5 * (hi - lo) * rule.weights
        vals = f.evaluate(xs)
        total0 += float(ws @ vals)
        total1 += float(ws @ (xs * vals))
    return total0, total1


def _affine_quadratic_part(z: np.ndarray, alpha: float, lam: float) -> float:
    """Energy plus lam * squared hybrid L2 norm of (m*x + c, a, b), closed form."""
    m, c, a, b = z
    seminorm = m * m / ((1.0 - alpha) * (3.0 - 2.0 * alpha))
    interface = 0.0
    for k, val in ((2, a), (3, b)):
        m0 = kernel_moment(k, alpha, 0)
        m1 = kernel_moment(k, alpha, 1)
        m2 = kernel_moment(k, alpha, 2)
        interface += (
            val * val * m0
            - 2.0 * val * (m * m1 + c * m0)
            + (m * m * m2 + 2.0 * m * c * m1 + c * c * m0)
        )
    dd = 2.0 * (a - b) ** 2
    l2 = m * m / 3.0 + m * c + c * c + a * a + b * b
    return seminorm + 2.0 * interface + dd + lam * l2


def reduced_hessian(alpha: float, lam: float) -> np.ndarray:
    """4x4 Hessian of the reduced functional in (m, c, a, b)."""
    basis = np.eye(4)
    diag = np.array([_affine_quadratic_part(e, alpha, lam) for e in basis])
    h = np.zeros((4, 4))
    for i in range(4):
        for j in range(i, 4):
            if i == j:
                h[i, i] = diag[i]
            else:
                q_sum = _affine_quadratic_part(basis[i] + basis[j], alpha, lam)
                h[i, j] = h[j, i] = 0.5 * (q_sum - diag[i] - diag[j])
    return h


def reduced_functional(z, alpha: float, lam: float, rhs: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    return 0.5 * _affine_quadratic_part(z, alpha, lam) - float(rhs @ z)


def reduced_solve(
    alpha: float, lam: float, f: Forcing | None, load_a: float, load_g: float
) -> ReducedAffineState:
    """Minimize the functional over affine continuous parts, closed form.

    Builds the exact 4x4 SPD system from kernel moments and solves it
    directly.  A factorization failure cannot happen for lam > 0 and
    signals a moment bug.
    """
    if not lam > 0.0:
        raise ValueError("lambda must be > 0")
    if f is None:
        f = Forcing(kind="constant", params=(0.0,))
    f0, f1 = forcing_moments(f)
    rhs = np.array([f1, f0, load_a, load_g])
    h = reduced_hessian(alpha, lam)
    try:
        factor = scipy.linalg.cho_factor(h, lower=True)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("reduced 4x4 system is not SPD (moment bug?)") from exc
    z = scipy.linalg.cho_solve(factor, rhs)
    return ReducedAffineState(m=z[0], c=z[1], a=z[2], b=z[3])


def check_splitting(sol: Solution, spec: ProblemSpec):
    """Componentwise optimality residuals of a two-node solution.

    Returns (cont_ok, node_a_res, node_b_res): whether the weak identity
    holds against every continuous hat within tol_solve, and the absolute
    residuals of the two scalar node balance equations (exact moment
    evaluation; these are rows of the Galerkin system under node
    indicator test functions).
    """
    if spec.domain.num_nodes != 2:
        raise ValueError("check_splitting requires a two-node domain")
    residual = weak_residual_vector(sol.u, spec)
    nc = spec.domain.n_cont
    cont_ok = bool(np.max(np.abs(residual[:nc])) <= spec.tol_solve)

    m0, g, _ = interface_moment_blocks(
        spec.domain.alpha, spec.domain.mesh_intervals, 2
    )
    c = sol.u.cont_coeffs
    a, b = sol.u.node_values
    load_a, load_g = spec.forcing.node_loads
    res_a = abs(
        2.0 * (a * m0[0] - float(g[:, 0] @ c)) + 2.0 * (a - b) + spec.lam * a - load_a
    )
    res_b = abs(
        2.0 * (b * m0[1] - float(g[:, 1] @ c)) + 2.0 * (b - a) + spec.lam * b - load_g
    )
    return cont_ok, float(res_a), float(res_b)
