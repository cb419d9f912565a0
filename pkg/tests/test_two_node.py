import numpy as np
import pytest

from hybridvar import (
    Forcing,
    HybridFunction,
    Solution,
    check_splitting,
    energy_total,
    evaluate_J,
    example_spec,
    kernel_moment,
    reduced_solve,
    solve,
)
from hybridvar.two_node import (
    ReducedAffineState,
    forcing_moments,
    reduced_functional,
    reduced_hessian,
)


@pytest.fixture(scope="module")
def spec64():
    return example_spec(0.5, 1.0, None, 1.0, 1.0, 64)


@pytest.fixture(scope="module")
def sol64(spec64):
    return solve(spec64)


def test_example_spec_shape(spec64):
    assert spec64.domain.num_nodes == 2
    assert np.array_equal(spec64.domain.nodes, [2.0, 3.0])
    assert spec64.forcing.node_loads == (1.0, 1.0)


def test_example_spec_propagates_domain_errors():
    with pytest.raises(ValueError, match="alpha out of"):
        example_spec(1.5, 1.0, None, 1.0, 1.0, 16)


def test_energy_matches_two_node_structure():
    # total = seminorm + 2 * (both interface integrals) + 2 |a - b|^2
    spec = example_spec(0.5, 1.0, None, 0.0, 0.0, 64)
    m, c, a, b = 0.7, -0.2, 1.3, 0.4
    u = HybridFunction(m * spec.domain.breakpoints + c, [a, b])
    breakdown = energy_total(u, spec)
    seminorm = m * m / ((1.0 - 0.5) * (3.0 - 2.0 * 0.5))
    interface = 0.0
    for k, val in ((2, a), (3, b)):
        m0 = kernel_moment(k, 0.5, 0)
        m1 = kernel_moment(k, 0.5, 1)
        m2 = kernel_moment(k, 0.5, 2)
        interface += val * val * m0 - 2.0 * val * (m * m1 + c * m0) + (
            m * m * m2 + 2.0 * m * c * m1 + c * c * m0
        )
    assert breakdown.e_cc == pytest.approx(seminorm, abs=1e-6)
    assert breakdown.e_cd == pytest.approx(interface, abs=1e-12)
    assert breakdown.e_dd == pytest.approx(2.0 * (a - b) ** 2, abs=1e-12)


def test_zero_data_solves_to_zero():
    spec = example_spec(0.5, 1.0, None, 0.0, 0.0, 16)
    assert np.max(np.abs(solve(spec).u.to_vector())) <= 1e-14
    state = reduced_solve(0.5, 1.0, None, 0.0, 0.0)
    assert state == ReducedAffineState(0.0, 0.0, 0.0, 0.0)


def test_reduced_solve_constant_data():
    # f = lam * c0 everywhere: the constant c0 is the minimizer
    lam, c0 = 2.0, 0.75
    f = Forcing("constant", (lam * c0,))
    state = reduced_solve(0.5, lam, f, lam * c0, lam * c0)
    assert state.m == pytest.approx(0.0, abs=1e-12)
    assert state.c == pytest.approx(c0, abs=1e-12)
    assert state.a == pytest.approx(c0, abs=1e-12)
    assert state.b == pytest.approx(c0, abs=1e-12)


def _brute_force_reduced(alpha, lam, rhs):
    best, best_z = None, None
    grid = np.linspace(-2.0, 2.0, 9)
    for m_ in grid:
        for c_ in grid:
            for a_ in grid:
                for b_ in grid:
                    val = reduced_functional((m_, c_, a_, b_), alpha, lam, rhs)
                    if best is None or val < best:
                        best, best_z = val, np.array([m_, c_, a_, b_])
    z = best_z.copy()
    for _ in range(400):
        moved = 0.0
        for i in range(4):
            h = 0.25
            for _ in range(80):
                zp, zm = z.copy(), z.copy()
                zp[i] += h
                zm[i] -= h
                f0 = reduced_functional(z, alpha, lam, rhs)
                fp = reduced_functional(zp, alpha, lam, rhs)
                fm = reduced_functional(zm, alpha, lam, rhs)
                denom = fp - 2.0 * f0 + fm
                if denom <= 0.0:
                    break
                step = 0.5 * h * (fm - fp) / denom
                if abs(step) < 1e-15:
                    break
                z[i] += step
                moved = max(moved, abs(step))
                h = max(abs(step), 1e-8)
        if moved < 1e-13:
            break
    return z


def test_reduced_solve_matches_brute_force():
    state = reduced_solve(0.5, 1.0, None, 1.0, 1.0)
    z = _brute_force_reduced(0.5, 1.0, np.array([0.0, 0.0, 1.0, 1.0]))
    assert np.max(np.abs(z - state.to_vector())) <= 1e-6


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.5, 0.75, 0.9])
@pytest.mark.parametrize("lam", [0.5, 1.0, 4.0])
def test_reduced_hessian_spd(alpha, lam):
    h = reduced_hessian(alpha, lam)
    assert np.allclose(h, h.T, atol=1e-12)
    np.linalg.cholesky(h)


def test_reduced_solve_rejects_bad_lambda():
    with pytest.raises(ValueError, match="lambda"):
        reduced_solve(0.5, 0.0, None, 1.0, 1.0)


def test_forcing_moments_polynomial():
    f = Forcing("polynomial", (1.0, 2.0))  # 1 + 2x
    total, first = forcing_moments(f)
    assert total == pytest.approx(2.0, abs=1e-13)
    assert first == pytest.approx(0.5 + 2.0 / 3.0, abs=1e-13)


def test_forcing_moments_sampled_exact():
    f = Forcing("sampled", ((0.0, 0.0), (0.5, 1.0), (1.0, 0.0)))
    total, first = forcing_moments(f)
    assert total == pytest.approx(0.5, abs=1e-13)
    assert first == pytest.approx(0.25, abs=1e-13)


def test_galerkin_dominates_reduced(sol64, spec64):
    state = reduced_solve(0.5, 1.0, None, 1.0, 1.0)
    embedded = state.embed(spec64.domain)
    assert sol64.j_value <= evaluate_J(embedded, spec64) + 1e-12


def test_check_splitting_converged(sol64, spec64):
    cont_ok, res_a, res_b = check_splitting(sol64, spec64)
    assert cont_ok
    assert res_a <= 1e-8 and res_b <= 1e-8


def test_check_splitting_constant_solution():
    c = 1.5
    spec = example_spec(0.5, 1.0, Forcing("constant", (c,)), c, c, 16)
    sol = solve(spec)
    cont_ok, res_a, res_b = check_splitting(sol, spec)
    assert cont_ok
    assert res_a <= 1e-12 and res_b <= 1e-12


def test_check_splitting_perturbation_grows(sol64, spec64):
    bumped = HybridFunction(sol64.u.cont_coeffs, sol64.u.node_values + np.array([0.1, 0.0]))
    perturbed = Solution(
        u=bumped, j_value=0.0, weak_residual=1.0, solver_iterations=0, spd_certified=True
    )
    _, res_a, _ = check_splitting(perturbed, spec64)
    # the diagonal coefficient of the first node equation is 2 m0 + 2 + lam
    m0 = kernel_moment(2, 0.5, 0)
    assert res_a >= 0.1 * (spec64.lam + 2.0 * m0 + 2.0) - 1e-9
    assert res_a >= 0.05


def test_splitting_iff_weak_residual(sol64, spec64):
    from hybridvar import weak_residual_vector

    # converged: both criteria hold
    cont_ok, res_a, res_b = check_splitting(sol64, spec64)
    assert cont_ok and max(res_a, res_b) <= spec64.tol_solve
    assert sol64.weak_residual <= spec64.tol_solve
    # perturbed: both criteria fail together
    bad_u = HybridFunction(
        sol64.u.cont_coeffs + 0.05, sol64.u.node_values - np.array([0.0, 0.2])
    )
    bad = Solution(bad_u, 0.0, 0.0, 0, True)
    cont_ok, res_a, res_b = check_splitting(bad, spec64)
    weak = float(np.max(np.abs(weak_residual_vector(bad_u, spec64))))
    assert weak > spec64.tol_solve
    assert (not cont_ok) or max(res_a, res_b) > spec64.tol_solve


def test_check_splitting_requires_two_nodes():
    from hybridvar import ProblemSpec, make_domain

    spec = ProblemSpec(
        domain=make_domain(0.5, 3, 8),
        lam=1.0,
        forcing=Forcing("constant", (0.0,), (0.0, 0.0, 0.0)),
    )
    sol = solve(spec)
    with pytest.raises(ValueError, match="two-node"):
        check_splitting(sol, spec)


def test_embed_requires_two_nodes():
    from hybridvar import make_domain

    state = ReducedAffineState(1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError, match="two-node"):
        state.embed(make_domain(0.5, 3, 8))
