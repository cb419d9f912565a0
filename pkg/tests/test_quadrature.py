import math

import numpy as np
import pytest
import scipy.integrate

from hybridvar import (
    Forcing,
    HybridFunction,
    ProblemSpec,
    energy_cc,
    gagliardo_pair_integral,
    gauss_rule,
    kernel_moment,
    kernel_moments,
    make_domain,
)
from hybridvar.quadrature import hat_cell_moments, interval_kernel_moments


def closed_form_seminorm(alpha):
    # squared fractional seminorm of v(x) = x on (0, 1)
    return 1.0 / ((1.0 - alpha) * (3.0 - 2.0 * alpha))


@pytest.mark.parametrize("order", [1, 2, 4, 6, 10])
def test_gauss_rule_monomial_exactness(order):
    rule = gauss_rule(order)
    assert np.all(rule.weights > 0)
    assert np.all(np.abs(rule.points) < 1.0)
    for j in range(2 * order):
        exact = 0.0 if j % 2 else 2.0 / (j + 1)
        got = float(rule.weights @ rule.points**j)
        assert got == pytest.approx(exact, abs=1e-13)


def test_gauss_rule_rejects_bad_order():
    with pytest.raises(ValueError):
        gauss_rule(0)


def test_kernel_moment_examples():
    assert kernel_moment(2, 0.5, 0) == pytest.approx(0.5, abs=1e-14)
    assert kernel_moment(2, 0.5, 1) == pytest.approx(1.0 - math.log(2.0), abs=1e-14)
    assert kernel_moment(3, 0.5, 0) == pytest.approx(1.0 / 6.0, abs=1e-14)


def test_kernel_moment_rejects_unsupported_j():
    with pytest.raises(ValueError, match="unsupported j"):
        kernel_moment(2, 0.5, 3)


@pytest.mark.parametrize("k", [2, 3, 6])
@pytest.mark.parametrize("alpha", [0.25, 0.41, 0.5, 0.5 + 1e-13, 0.75])
@pytest.mark.parametrize("j", [0, 1, 2])
def test_kernel_moment_vs_adaptive_quadrature(k, alpha, j):
    closed = kernel_moment(k, alpha, j)
    ref, _ = scipy.integrate.quad(
        lambda x: x**j * (k - x) ** -(1.0 + 2.0 * alpha), 0.0, 1.0,
        epsabs=1e-13, epsrel=1e-13,
    )
    assert closed == pytest.approx(ref, abs=1e-10)


def test_kernel_moments_m0_closed_form_invariant():
    for k in (2, 3, 5):
        for alpha in (0.25, 0.5, 0.75):
            km = kernel_moments(k, alpha)
            expected = ((k - 1.0) ** (-2 * alpha) - k ** (-2 * alpha)) / (2 * alpha)
            assert km.m0 > 0
            assert km.m0 == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.75])
def test_hat_cell_moments_vs_gauss(alpha):
    # interface integrals two ways: closed-form moments vs adaptive quadrature
    k, lo, hi = 2, 0.25, 0.375
    h = hi - lo
    g0, g1, g00, g01, g11 = hat_cell_moments(k, alpha, lo, hi)
    w = lambda x: (k - x) ** -(1.0 + 2.0 * alpha)
    lam0 = lambda x: (hi - x) / h
    lam1 = lambda x: (x - lo) / h
    for got, fn in [
        (g0, lambda x: lam0(x) * w(x)),
        (g1, lambda x: lam1(x) * w(x)),
        (g00, lambda x: lam0(x) ** 2 * w(x)),
        (g01, lambda x: lam0(x) * lam1(x) * w(x)),
        (g11, lambda x: lam1(x) ** 2 * w(x)),
    ]:
        ref, _ = scipy.integrate.quad(fn, lo, hi, epsabs=1e-13, epsrel=1e-13)
        assert got == pytest.approx(ref, abs=1e-10)


def test_pair_integral_identical_constants_is_zero():
    rule = gauss_rule(6)
    val = gagliardo_pair_integral(
        (0.25, 0.5), (0.25, 0.5), (2.0, 2.0), (2.0, 2.0), 0.5, rule, 8
    )
    assert val == 0.0


def test_pair_integral_symmetry_exact():
    rule = gauss_rule(6)
    a = gagliardo_pair_integral((0.0, 0.25), (0.5, 0.75), (1.0, 1.5), (0.0, -0.25), 0.3, rule, 8)
    b = gagliardo_pair_integral((0.5, 0.75), (0.0, 0.25), (0.0, -0.25), (1.0, 1.5), 0.3, rule, 8)
    assert a == b


def test_pair_integral_disjoint_vs_dblquad():
    rule = gauss_rule(6)
    got = gagliardo_pair_integral((0.0, 0.25), (0.5, 0.75), (1.0, 1.5), (0.0, -0.25), 0.3, rule, 8)
    ref, _ = scipy.integrate.dblquad(
        lambda y, x: (2.0 * x + 1.0 - (0.5 - y)) ** 2 * abs(x - y) ** -1.6,
        0.0, 0.25, 0.5, 0.75, epsabs=1e-12,
    )
    assert got == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_pair_integral_samecell_closed_form(alpha):
    # v(x) = x restricted to one cell of width h
    rule = gauss_rule(6)
    got = gagliardo_pair_integral((0.0, 0.5), (0.0, 0.5), (0.0, 0.5), (0.0, 0.5), alpha, rule, 36)
    exact = 0.5 ** (3.0 - 2.0 * alpha) * closed_form_seminorm(alpha)
    assert got == pytest.approx(exact, rel=1e-6)


def test_pair_integral_rejects_mismatched_cells():
    rule = gauss_rule(4)
    with pytest.raises(ValueError, match="equal width"):
        gagliardo_pair_integral((0.0, 0.5), (0.5, 0.6), (0.0, 0.0), (0.0, 0.0), 0.5, rule, 4)
    with pytest.raises(ValueError, match="aligned"):
        gagliardo_pair_integral((0.0, 0.25), (0.3, 0.55), (0.0, 0.0), (0.0, 0.0), 0.5, rule, 4)


def _seminorm_of_identity(alpha, mesh, subdivisions):
    dom = make_domain(alpha, 2, mesh)
    spec = ProblemSpec(
        domain=dom,
        lam=1.0,
        forcing=Forcing("constant", (0.0,), (0.0, 0.0)),
        singular_subdivisions=subdivisions,
    )
    return energy_cc(HybridFunction(dom.breakpoints, np.zeros(2)), spec)


@pytest.mark.parametrize("alpha", [0.25, 0.5])
def test_full_seminorm_closed_form(alpha):
    got = _seminorm_of_identity(alpha, 64, 36)
    assert got == pytest.approx(closed_form_seminorm(alpha), abs=1e-6)


def test_monotone_refinement_at_fixed_rate():
    # the only depth-dependent error is the graded part near the diagonal;
    # it shrinks by a fixed factor 2^(-(2-2a)) per added level
    alpha = 0.75
    exact = closed_form_seminorm(alpha)
    errors = [abs(_seminorm_of_identity(alpha, 8, L) - exact) for L in (4, 6, 8, 10, 12)]
    assert all(b < a for a, b in zip(errors, errors[1:]))
    ratios = [b / a for a, b in zip(errors, errors[1:])]
    expected = 2.0 ** (-2.0 * (2.0 - 2.0 * alpha))  # two levels per step
    for r in ratios:
        assert r == pytest.approx(expected, rel=0.1)


def test_smooth_integral_examples():
    from hybridvar import smooth_integral

    dom = make_domain(0.5, 2, 8)
    rule = gauss_rule(6)
    assert smooth_integral(lambda x: np.ones_like(x), rule, dom) == pytest.approx(1.0, abs=1e-13)
    assert smooth_integral(lambda x: x**2, rule, dom) == pytest.approx(1.0 / 3.0, abs=1e-13)
    # the interface weight integrates to the zero-th kernel moment
    got = smooth_integral(lambda x: (2.0 - x) ** -2, rule, dom)
    assert got == pytest.approx(kernel_moment(2, 0.5, 0), abs=1e-10)


def test_interval_moments_bad_inputs():
    with pytest.raises(ValueError):
        interval_kernel_moments(1, 0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        interval_kernel_moments(2, 1.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        interval_kernel_moments(2, 0.5, 0.5, 0.25)
