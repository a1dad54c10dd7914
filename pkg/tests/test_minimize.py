import numpy as np
import pytest

from helpers import make_quadratic_problem
from minfem.coloring import recover_hessian
from minfem.energies import bar_dirichlet_values, build_problem
from minfem.minimize import (
    NewtonConfig,
    NewtonError,
    benchmark_initial_guess,
    golden_section,
    newton_minimize,
)


def test_golden_parabola():
    alpha = golden_section(lambda a: (a - 1.0) ** 2, 2.0)
    assert abs(alpha - 1.0) < 1e-9


def test_golden_monotone_increasing_goes_to_zero():
    alpha = golden_section(lambda a: a, 2.0)
    assert 0.0 <= alpha < 1e-9


def test_golden_handles_infinite_region():
    def phi(a):
        return (a - 0.3) ** 2 if a <= 0.5 else np.inf

    # dense-sampling oracle: the minimum over the finite region sits at 0.3
    grid = np.linspace(0.0, 0.5, 5001)
    assert abs(grid[np.argmin((grid - 0.3) ** 2)] - 0.3) < 1e-3
    alpha = golden_section(phi, 2.0)
    assert abs(alpha - 0.3) < 1e-8


def test_golden_never_worsens_phi0():
    # worst case: every positive sample is worse than the start
    calls = []

    def phi(a):
        calls.append(a)
        return 1.0 + a**2

    alpha = golden_section(phi, 2.0, max_evals=40)
    assert phi(alpha) <= phi(0.0)


def test_newton_quadratic_single_step():
    rng = np.random.default_rng(12)
    m = rng.standard_normal((5, 5))
    a = m.T @ m + 5.0 * np.eye(5)
    b = rng.standard_normal(5)
    problem = make_quadratic_problem(a, b)
    result = newton_minimize(problem, np.zeros(5))
    assert result.converged
    assert result.iterations == 1
    assert np.allclose(result.u_star, np.linalg.solve(a, b), atol=1e-8)
    assert abs(result.iteration_log[0].alpha - 1.0) < 1e-6
    assert result.iteration_log[0].shift == 0.0  # plain Newton, no regularization


def test_newton_plaplace_level1_matches_table():
    problem = build_problem("plaplace", 1)
    result = newton_minimize(problem, benchmark_initial_guess(problem))
    assert abs(result.energy - (-7.3411)) < 5e-4
    assert 1 <= result.iterations <= 8
    assert all(rec.shift == 0.0 for rec in result.iteration_log)  # stays convex


def test_newton_gl_level2_matches_table():
    problem = build_problem("ginzburg_landau", 2)
    result = newton_minimize(problem, benchmark_initial_guess(problem))
    assert abs(result.energy - 0.3547) < 5e-4


def test_monotone_descent_and_first_order_optimality():
    problem = build_problem("ginzburg_landau", 2)
    u0 = benchmark_initial_guess(problem)
    result = newton_minimize(problem, u0)
    energies = [rec.energy for rec in result.iteration_log] + [result.energy]
    assert all(b <= a for a, b in zip(energies, energies[1:]))
    j0 = problem.program.evaluate(u0)
    assert result.grad_norm <= 1e-6 * (1.0 + abs(j0))


@pytest.mark.parametrize("level", [1, 2])
def test_plaplace_hessian_psd_at_solution(level):
    problem = build_problem("plaplace", level)
    result = newton_minimize(problem, benchmark_initial_guess(problem))
    h = recover_hessian(
        problem.hvp_operator(result.u_star), problem.coloring, problem.pattern
    ).toarray()
    eigs = np.linalg.eigvalsh(h)
    assert eigs.min() >= -1e-8 * np.abs(eigs).max()


def test_max_iters_error_carries_best_iterate():
    problem = build_problem("ginzburg_landau", 1)
    config = NewtonConfig(max_iters=1, grad_tol=1e-14)
    with pytest.raises(NewtonError) as info:
        newton_minimize(problem, benchmark_initial_guess(problem), config)
    best = info.value.best
    assert best is not None and best.iterations == 1
    assert best.energy <= problem.program.evaluate(benchmark_initial_guess(problem))


def test_nonfinite_initial_energy_raises(tiny_bar_problem):
    with pytest.raises(NewtonError, match="non-finite"):
        newton_minimize(tiny_bar_problem, np.zeros(tiny_bar_problem.n_dofs))


def test_continuation_first_step_warm_start(tiny_bar_problem):
    problem = tiny_bar_problem
    # untwisted state: stress-free reference, zero gradient
    assert abs(problem.program.evaluate(problem.initial_guess)) < 1e-18
    assert np.abs(problem.program.gradient(problem.initial_guess)).max() < 1e-9
    stepped = problem.with_dirichlet(bar_dirichlet_values(problem.mesh, np.pi / 3.0))
    result = newton_minimize(stepped, problem.initial_guess)
    assert result.converged and result.energy > 0.0
    assert np.isfinite(result.energy)


def test_solver_override_is_honored():
    problem = build_problem("plaplace", 2)
    config = NewtonConfig(solver="diag-cg")
    result = newton_minimize(problem, benchmark_initial_guess(problem), config)
    assert abs(result.energy - (-7.7767)) < 5e-4
    assert all(rec.solver == "diag-cg" for rec in result.iteration_log)
    assert all(rec.inner_iterations > 0 for rec in result.iteration_log)


def test_benchmark_initial_guess_plaplace_is_harmonic_like():
    problem = build_problem("plaplace", 1)
    u0 = benchmark_initial_guess(problem)
    # the quadratic bootstrap solves the p = 2 problem exactly: nonzero,
    # negative under the downward load, and finite p = 3 energy
    assert np.all(np.isfinite(u0)) and u0.max() < 0.0
    assert np.isfinite(problem.program.evaluate(u0))
