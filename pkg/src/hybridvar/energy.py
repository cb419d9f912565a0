"""Energy components, norms, and mean-decomposition statistics.

The full interaction energy of u = (v, a_2, ..., a_{N+1}) splits into

* a continuous-continuous part: the squared fractional seminorm of v,
  evaluated by the graded pair quadrature;
* a continuous-discrete interface part coupling each node value to the
  continuous profile, evaluated exactly through kernel moments (the node
  weight is smooth on [0, 1], and v is piecewise linear);
* a discrete-discrete part: an exact weighted double sum over node pairs.

``total`` weights the interface part by 2, which accounts for the two
mirrored mixed blocks of the product measure.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .domain import EnergyBreakdown, HybridFunction, ProblemSpec
from .quadrature import build_pair_templates, interface_moment_blocks

__all__ = [
    "MeanStats",
    "dd_weight_matrix",
    "energy_cc",
    "energy_cd",
    "energy_dd",
    "energy_total",
    "hybrid_norm_sq",
    "l2_cont_inner",
    "l2_mu_inner",
    "l2_mu_norm_sq",
    "mean_stats",
    "pair_templates",
]


def pair_templates(spec: ProblemSpec):
    return build_pair_templates(
        spec.domain.mesh_intervals,
        spec.domain.alpha,
        spec.quad_order,
        spec.singular_subdivisions,
    )


@lru_cache(maxsize=128)
def dd_weight_matrix(num_nodes: int, alpha: float) -> np.ndarray:
    """Pairwise node weights |i - j|^(-(1+2a)) with zero diagonal."""
    idx = np.arange(num_nodes, dtype=float)
    gaps = np.abs(idx[:, None] - idx[None, :])
    with np.errstate(divide="ignore"):
        w = gaps ** -(1.0 + 2.0 * alpha)
    np.fill_diagonal(w, 0.0)
    w.flags.writeable = False
    return w


def energy_cc(u: HybridFunction, spec: ProblemSpec) -> float:
    """Squared fractional seminorm of the continuous part (quadrature)."""
    u.validate_for(spec.domain)
    return kernels.cc_energy(u.cont_coeffs, pair_templates(spec))


def energy_cd(u: HybridFunction, spec: ProblemSpec) -> float:
    """Interface energy: sum over nodes of the weighted squared gap to v.

    Expanded exactly in kernel moments: |a_k - v|^2 integrates to
    a_k^2 m0_k - 2 a_k <g_k, c> + c^T G_k c for piecewise-linear v.
    """
    u.validate_for(spec.domain)
    m0, g, g_sum = interface_moment_blocks(
        spec.domain.alpha, spec.domain.mesh_intervals, spec.domain.num_nodes
    )
    c = u.cont_coeffs
    a = u.node_values
    value = float(a @ (m0 * a) - 2.0 * (a @ (g.T @ c)) + c @ (g_sum @ c))
    return max(value, 0.0)


def energy_dd(u: HybridFunction, alpha: float) -> float:
    """Exact double sum over ordered node pairs of weighted squared gaps."""
    a = u.node_values
    w = dd_weight_matrix(a.size, alpha)
    diffs = a[:, None] - a[None, :]
    return float(np.sum(w * diffs * diffs))


def energy_total(u: HybridFunction, spec: ProblemSpec) -> EnergyBreakdown:
    e_cc = energy_cc(u, spec)
    e_cd = energy_cd(u, spec)
    e_dd = energy_dd(u, spec.domain.alpha)
    return EnergyBreakdown.from_components(e_cc, e_cd, e_dd)


@dataclass(frozen=True)
class MeanStats:
    """Mean of the continuous part and squared deviations around it."""

    v_bar: float
    osc_sq: float
    node_dev_sq: np.ndarray


def _cont_mean(c: np.ndarray) -> float:
    m = c.size - 1
    interior = float(c[1:-1].sum()) if m >= 2 else 0.0
    return (0.5 * float(c[0]) + interior + 0.5 * float(c[-1])) / m


def mean_stats(u: HybridFunction) -> MeanStats:
    """Exact mean, oscillation, and node deviations for the hat basis.

    The oscillation is integrated cellwise on the mean-shifted
    coefficients, which keeps it nonnegative by construction.
    """
    c = u.cont_coeffs
    m = c.size - 1
    v_bar = _cont_mean(c)
    s = c - v_bar
    osc = float((s[:-1] ** 2 + s[:-1] * s[1:] + s[1:] ** 2).sum()) / (3.0 * m)
    dev = (u.node_values - v_bar) ** 2
    dev.flags.writeable = False
    return MeanStats(v_bar=v_bar, osc_sq=max(osc, 0.0), node_dev_sq=dev)


def l2_cont_inner(c: np.ndarray, p: np.ndarray) -> float:
    """Exact integral over [0, 1] of the product of two hat expansions."""
    m = c.size - 1
    terms = (
        2.0 * c[:-1] * p[:-1] + c[:-1] * p[1:] + c[1:] * p[:-1] + 2.0 * c[1:] * p[1:]
    )
    return float(terms.sum()) / (6.0 * m)


def l2_mu_inner(u: HybridFunction, w: HybridFunction) -> float:
    """Exact inner product in the hybrid L2 space."""
    return l2_cont_inner(u.cont_coeffs, w.cont_coeffs) + float(
        u.node_values @ w.node_values
    )


def l2_mu_norm_sq(u: HybridFunction) -> float:
    return l2_mu_inner(u, u)


def hybrid_norm_sq(u: HybridFunction, spec: ProblemSpec) -> float:
    """Squared natural norm: hybrid L2 norm plus the full energy."""
    return l2_mu_norm_sq(u) + energy_total(u, spec).total
