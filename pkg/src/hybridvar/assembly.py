"""Galerkin assembly of the energy bilinear form, mass matrix, and loads.

The full system matrix acts on stacked coefficients x = (c, a) and
reproduces the energy as the quadratic form x^T A x; every factor of 2
from the mirrored mixed measure blocks lives inside the assembled blocks,
never in the solver.

Block layout (continuous dofs first, then node dofs):

    A = [[ a_cc + a_int_vv,  a_int_vn          ],
         [ a_int_vn^T,       a_int_nn + a_dd   ]]

* a_cc: dense hat-hat matrix of the singular pair quadrature; on a
  uniform mesh the local pair matrices depend only on the cell distance,
  so one local matrix per distance is scattered along the diagonal.
* interface blocks: exact kernel-moment integrals (2 G_sum, -2 g, 2 m0).
* a_dd: twice the weighted graph Laplacian of the node interaction.
* mass: exact piecewise-linear mass on [0, 1] plus the identity on nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .domain import HybridDomain, HybridFunction, ProblemSpec
from .energy import dd_weight_matrix
from .quadrature import build_pair_templates, cell_gauss, interface_moment_blocks

__all__ = [
    "AssembledSystem",
    "assemble",
    "assemble_load",
    "cc_matrix",
    "dump_matrix",
    "mass_matrix",
]


@lru_cache(maxsize=64)
def cc_matrix(mesh_intervals: int, alpha: float, order: int, subdivisions: int) -> np.ndarray:
    """Hat-hat matrix of the continuous-continuous pair quadrature.

    On a uniform mesh the local pair matrix depends only on the cell
    distance.  Shared dofs of identical/adjacent pairs are merged into
    difference rows BEFORE any product with a weight: each merged row
    vanishes at the kernel singularity, which keeps the near-diagonal
    weights (which grow with the grading depth) multiplied by
    correspondingly small factors.  Folding products afterwards would
    cancel catastrophically.
    """
    m = mesh_intervals
    tpl = build_pair_templates(m, alpha, order, subdivisions)
    a = np.zeros((m + 1, m + 1))
    for d in range(m):
        sl = slice(tpl.offsets[d], tpl.offsets[d + 1])
        if d == 0:
            rows_d = np.stack([tpl.a0[sl] - tpl.b0[sl], tpl.a1[sl] - tpl.b1[sl]])
            rel = (0, 1)
        elif d == 1:
            rows_d = np.stack([tpl.a0[sl], tpl.a1[sl] - tpl.b0[sl], -tpl.b1[sl]])
            rel = (0, 1, 2)
        else:
            rows_d = np.stack([tpl.a0[sl], tpl.a1[sl], -tpl.b0[sl], -tpl.b1[sl]])
            rel = (0, 1, d, d + 1)
        local = (rows_d * tpl.w[sl]) @ rows_d.T
        if d > 0:
            local = 2.0 * local
        k = len(rel)
        e = np.arange(m - d)
        rel_arr = np.asarray(rel)
        shape = (m - d, k, k)
        rows = np.broadcast_to(e[:, None, None] + rel_arr[None, :, None], shape).ravel()
        cols = np.broadcast_to(e[:, None, None] + rel_arr[None, None, :], shape).ravel()
        vals = np.broadcast_to(local, shape).ravel()
        np.add.at(a, (rows, cols), vals)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=64)
def mass_matrix_blocks(mesh_intervals: int):
    """Exact tridiagonal hat mass matrix on [0, 1] (continuous block only)."""
    m = mesh_intervals
    h = 1.0 / m
    mc = np.zeros((m + 1, m + 1))
    diag = np.full(m + 1, 2.0 * h / 3.0)
    diag[0] = diag[-1] = h / 3.0
    mc[np.arange(m + 1), np.arange(m + 1)] = diag
    off = np.full(m, h / 6.0)
    mc[np.arange(m), np.arange(1, m + 1)] = off
    mc[np.arange(1, m + 1), np.arange(m)] = off
    mc.flags.writeable = False
    return mc


def mass_matrix(domain: HybridDomain) -> np.ndarray:
    """Block-diagonal hybrid mass: hat mass on [0, 1], identity on nodes."""
    nc = domain.n_cont
    full = np.zeros((domain.dim, domain.dim))
    full[:nc, :nc] = mass_matrix_blocks(domain.mesh_intervals)
    idx = np.arange(nc, domain.dim)
    full[idx, idx] = 1.0
    return full


def assemble_load(spec: ProblemSpec) -> np.ndarray:
    """Load vector: Gauss integrals of f against the hats, then node loads."""
    domain = spec.domain
    xs, ws, tloc = cell_gauss(domain.mesh_intervals, spec.quad_order)
    fvals = spec.forcing.evaluate(xs)
    load = np.zeros(domain.dim)
    left = (fvals * (1.0 - tloc)) @ ws
    right = (fvals * tloc) @ ws
    load[: domain.mesh_intervals] += left
    load[1 : domain.mesh_intervals + 1] += right
    load[domain.n_cont :] = spec.forcing.node_loads_array
    return load


@dataclass(frozen=True)
class AssembledSystem:
    """Assembled blocks of the energy form, the mass, and the load.

    Immutable and shareable; entry values are deterministic for a fixed
    spec (fixed summation order throughout).
    """

    a_cc: np.ndarray
    a_int_vv: np.ndarray
    a_int_vn: np.ndarray
    a_int_nn: np.ndarray
    a_dd: np.ndarray
    mass: np.ndarray
    load: np.ndarray
    dim: int
    spec: ProblemSpec

    def full_matrix(self) -> np.ndarray:
        """Full energy matrix A with x^T A x equal to the total energy."""
        nc = self.a_cc.shape[0]
        a = np.zeros((self.dim, self.dim))
        a[:nc, :nc] = self.a_cc + self.a_int_vv
        a[:nc, nc:] = self.a_int_vn
        a[nc:, :nc] = self.a_int_vn.T
        a[nc:, nc:] = self.a_int_nn + self.a_dd
        return a

    def system_matrix(self, lam: float | None = None) -> np.ndarray:
        """A + lambda * mass (SPD for lambda > 0)."""
        lam = self.spec.lam if lam is None else lam
        return self.full_matrix() + lam * self.mass

    def quadratic_energy(self, u: HybridFunction) -> float:
        x = u.to_vector()
        return float(x @ self.full_matrix() @ x)


def assemble(spec: ProblemSpec) -> AssembledSystem:
    domain = spec.domain
    a_cc = cc_matrix(
        domain.mesh_intervals, domain.alpha, spec.quad_order, spec.singular_subdivisions
    )
    m0, g, g_sum = interface_moment_blocks(
        domain.alpha, domain.mesh_intervals, domain.num_nodes
    )
    w = dd_weight_matrix(domain.num_nodes, domain.alpha)
    a_dd = 2.0 * (np.diag(w.sum(axis=1)) - w)
    system = AssembledSystem(
        a_cc=np.array(a_cc),
        a_int_vv=2.0 * g_sum,
        a_int_vn=-2.0 * g,
        a_int_nn=np.diag(2.0 * m0),
        a_dd=a_dd,
        mass=mass_matrix(domain),
        load=assemble_load(spec),
        dim=domain.dim,
        spec=spec,
    )
    for arr in (
        system.a_cc,
        system.a_int_vv,
        system.a_int_vn,
        system.a_int_nn,
        system.a_dd,
        system.mass,
        system.load,
    ):
        arr.flags.writeable = False
    return system


def dump_matrix(system: AssembledSystem, path, which: str = "full") -> None:
    """Write a dense block as CSV with a one-line parameter header."""
    blocks = {
        "full": system.full_matrix(),
        "a_cc": system.a_cc,
        "mass": system.mass,
    }
    if which not in blocks:
        raise ValueError(f"unknown block '{which}'")
    spec = system.spec
    header = (
        f"dim={system.dim},alpha={spec.domain.alpha},lambda={spec.lam},"
        f"N={spec.domain.num_nodes},M={spec.domain.mesh_intervals}"
    )
    np.savetxt(path, blocks[which], delimiter=",", header=header)
