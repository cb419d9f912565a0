import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridvar import (
    EnergyBreakdown,
    Forcing,
    HybridFunction,
    ProblemSpec,
    energy_cc,
    energy_cd,
    energy_dd,
    energy_total,
    gagliardo_pair_integral,
    gauss_rule,
    hybrid_norm_sq,
    l2_mu_norm_sq,
    make_domain,
    mean_stats,
)
from hybridvar.analysis import direct_energy_quadrature
from hybridvar.energy import l2_cont_inner


def _spec(alpha=0.5, n=2, m=16, subdivisions=36):
    return ProblemSpec(
        domain=make_domain(alpha, n, m),
        lam=1.0,
        forcing=Forcing("constant", (0.0,), tuple([0.0] * n)),
        singular_subdivisions=subdivisions,
        seed=11,
    )


def _random_u(spec, rng):
    return HybridFunction(
        rng.standard_normal(spec.domain.n_cont),
        rng.standard_normal(spec.domain.num_nodes),
    )


def test_energy_cc_constant_is_zero():
    spec = _spec()
    u = HybridFunction.constant(4.2, spec.domain)
    assert energy_cc(u, spec) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("alpha", [0.25, 0.5])
def test_energy_cc_identity_closed_form(alpha):
    spec = _spec(alpha=alpha, m=64)
    u = HybridFunction(spec.domain.breakpoints, np.zeros(2))
    exact = 1.0 / ((1.0 - alpha) * (3.0 - 2.0 * alpha))
    assert energy_cc(u, spec) == pytest.approx(exact, abs=1e-6)


def test_energy_cc_matches_pairwise_sum():
    # the fast kernel agrees with explicit per-pair integrals
    spec = _spec(m=6, subdivisions=10)
    dom = spec.domain
    rng = np.random.default_rng(5)
    u = _random_u(spec, rng)
    rule = gauss_rule(spec.quad_order)
    total = 0.0
    bp = dom.breakpoints
    for e in range(dom.mesh_intervals):
        for f in range(dom.mesh_intervals):
            total += gagliardo_pair_integral(
                (bp[e], bp[e + 1]),
                (bp[f], bp[f + 1]),
                (u.cont_coeffs[e], u.cont_coeffs[e + 1]),
                (u.cont_coeffs[f], u.cont_coeffs[f + 1]),
                dom.alpha,
                rule,
                spec.singular_subdivisions,
            )
    assert energy_cc(u, spec) == pytest.approx(total, rel=1e-12, abs=1e-12)


def test_energy_cd_examples():
    spec = _spec()
    u = HybridFunction(np.zeros(17), [1.0, 1.0])
    assert energy_cd(u, spec) == pytest.approx(2.0 / 3.0, abs=1e-10)
    u = HybridFunction(np.zeros(17), [1.0, 0.0])
    assert energy_cd(u, spec) == pytest.approx(0.5, abs=1e-10)
    u = HybridFunction.constant(3.0, spec.domain)
    assert energy_cd(u, spec) == pytest.approx(0.0, abs=1e-12)


def test_energy_cd_affine_frozen_value():
    # v(x) = x against node values (1, 1): moment expansion in closed form
    spec = _spec(m=64)
    u = HybridFunction(spec.domain.breakpoints, [1.0, 1.0])
    expected = (1.5 - 2.0 * math.log(2.0)) + (5.0 / 3.0 - 4.0 * math.log(1.5))
    assert energy_cd(u, spec) == pytest.approx(expected, abs=1e-12)


def test_energy_dd_examples():
    u = HybridFunction(np.zeros(3), [1.0, 0.0])
    assert energy_dd(u, 0.5) == pytest.approx(2.0, abs=1e-14)
    assert energy_dd(u, 0.25) == pytest.approx(2.0, abs=1e-14)
    u = HybridFunction(np.zeros(3), [2.0, 2.0, 2.0])
    assert energy_dd(u, 0.5) == 0.0
    # ordered pairs at gaps 1 and 2; the gap-2 weight is 2^-(1+2a) = 1/4
    u = HybridFunction(np.zeros(3), [1.0, 0.0, 0.0])
    assert energy_dd(u, 0.5) == pytest.approx(2.0 * (1.0 + 0.25), abs=1e-14)


def test_energy_total_breakdown_examples():
    spec = _spec()
    u = HybridFunction.constant(2.0, spec.domain)
    b = energy_total(u, spec)
    for val in (b.e_cc, b.e_cd, b.e_dd, b.total):
        assert val == pytest.approx(0.0, abs=1e-12)

    u = HybridFunction(np.zeros(17), [1.0, 0.0])
    b = energy_total(u, spec)
    assert b.e_cc == pytest.approx(0.0, abs=1e-14)
    assert b.e_cd == pytest.approx(0.5, abs=1e-10)
    assert b.e_dd == pytest.approx(2.0, abs=1e-14)
    assert b.total == pytest.approx(3.0, abs=1e-10)

    spec64 = _spec(m=64)
    u = HybridFunction(spec64.domain.breakpoints, [1.0, 1.0])
    b = energy_total(u, spec64)
    assert b.e_cc == pytest.approx(1.0, abs=1e-6)
    assert b.e_dd == 0.0
    assert b.total == b.e_cc + 2.0 * b.e_cd + b.e_dd


def test_breakdown_serialization_keys():
    b = EnergyBreakdown.from_components(1.0, 0.25, 2.0)
    assert b.to_dict() == {"e_cc": 1.0, "e_cd": 0.25, "e_dd": 2.0, "total": 3.5}


def test_mean_stats_affine_example():
    dom = make_domain(0.5, 2, 4)
    u = HybridFunction(dom.breakpoints, [1.0, 1.0])
    ms = mean_stats(u)
    assert ms.v_bar == pytest.approx(0.5, abs=1e-15)
    assert ms.osc_sq == pytest.approx(1.0 / 12.0, abs=1e-15)
    # int (1 - x)^2 dx = 1/3 splits as 1/4 + 1/12
    assert ms.node_dev_sq[0] + ms.osc_sq == pytest.approx(1.0 / 3.0, abs=1e-14)


def test_mean_stats_constant():
    dom = make_domain(0.5, 2, 8)
    u = HybridFunction(np.full(9, 2.0), [5.0, -1.0])
    ms = mean_stats(u)
    assert ms.osc_sq == 0.0
    assert np.allclose(ms.node_dev_sq, [9.0, 9.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mean_decomposition_exact(seed):
    rng = np.random.default_rng(seed)
    dom = make_domain(0.5, 3, 8)
    u = HybridFunction(rng.standard_normal(9), rng.standard_normal(3))
    ms = mean_stats(u)
    scale = float(np.max(np.abs(u.cont_coeffs))) ** 2 + 1.0
    for k, a_k in enumerate(u.node_values):
        shifted = a_k - u.cont_coeffs
        lhs = float(
            (shifted[:-1] ** 2 + shifted[:-1] * shifted[1:] + shifted[1:] ** 2).sum()
        ) / (3.0 * 8)
        assert abs(lhs - (ms.node_dev_sq[k] + ms.osc_sq)) <= 1e-12 * scale
    # summed identity: total gap equals deviations plus N * oscillation
    lhs_sum = sum(
        float(((a_k - u.cont_coeffs)[:-1] ** 2
               + (a_k - u.cont_coeffs)[:-1] * (a_k - u.cont_coeffs)[1:]
               + (a_k - u.cont_coeffs)[1:] ** 2).sum()) / 24.0
        for a_k in u.node_values
    )
    rhs_sum = float(ms.node_dev_sq.sum()) + 3 * ms.osc_sq
    assert abs(lhs_sum - rhs_sum) <= 1e-12 * scale


def test_l2_mu_norm_examples():
    dom = make_domain(0.5, 2, 16)
    assert l2_mu_norm_sq(HybridFunction.constant(1.0, dom)) == pytest.approx(3.0, abs=1e-14)
    u = HybridFunction(dom.breakpoints, [0.0, 0.0])
    assert l2_mu_norm_sq(u) == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert l2_mu_norm_sq(HybridFunction.constant(0.0, dom)) == 0.0


def test_l2_cont_inner_is_exact_mass_pairing():
    rng = np.random.default_rng(3)
    c, p = rng.standard_normal(9), rng.standard_normal(9)
    import scipy.integrate

    v = lambda x: np.interp(x, np.arange(9) / 8, c)
    w = lambda x: np.interp(x, np.arange(9) / 8, p)
    ref, _ = scipy.integrate.quad(lambda x: v(x) * w(x), 0, 1, limit=200)
    assert l2_cont_inner(c, p) == pytest.approx(ref, abs=1e-9)


def test_hybrid_norm_examples():
    spec = _spec()
    assert hybrid_norm_sq(HybridFunction.constant(1.0, spec.domain), spec) == pytest.approx(
        3.0, abs=1e-10
    )
    u = HybridFunction(spec.domain.breakpoints, [0.0, 0.0])
    expected = 1.0 / 3.0 + energy_total(u, spec).total
    assert hybrid_norm_sq(u, spec) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(-100.0, 100.0).filter(lambda t: abs(t) > 1e-3))
def test_hybrid_norm_quadratic_scaling(t):
    spec = _spec(m=8)
    rng = np.random.default_rng(1)
    u = _random_u(spec, rng)
    base = hybrid_norm_sq(u, spec)
    assert hybrid_norm_sq(t * u, spec) == pytest.approx(t * t * base, rel=1e-12)


def test_decomposition_identity_random_sweep():
    spec = _spec(m=16)
    rng = np.random.default_rng(spec.seed)
    for _ in range(20):
        u = _random_u(spec, rng)
        b = energy_total(u, spec)
        direct = direct_energy_quadrature(u, spec)
        assert abs(b.total - direct) <= 1e-8 * (1.0 + b.total)


def test_energy_nonnegative_and_zero_only_on_constants():
    spec = _spec(m=8)
    rng = np.random.default_rng(2)
    for _ in range(20):
        u = _random_u(spec, rng)
        total = energy_total(u, spec).total
        assert total >= 0.0
        if total <= spec.tol_identity:
            vec = u.to_vector()
            assert np.max(np.abs(vec - vec[0])) < 1e-6
    assert energy_total(HybridFunction.constant(-3.0, spec.domain), spec).total <= spec.tol_identity
