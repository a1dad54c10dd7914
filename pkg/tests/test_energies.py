import numpy as np
import pytest

from helpers import dense_hessian_by_probes, random_benchmark_state
from minfem.energies import (
    GinzburgLandauParams,
    NeoHookeParams,
    PLaplaceParams,
    bar_dirichlet_values,
    build_problem,
    energy_neohooke,
    energy_plaplace,
    problem_from_mesh,
    record_plaplace,
)
from minfem.fem import build_dofmap, precompute_gradients
from minfem.mesh import MeshData, Region, bar_mesh_from_cells


def single_triangle_setup():
    mesh = MeshData(
        2,
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        np.array([[0, 1, 2]]),
        np.array([], dtype=np.int64),
        Region.SQUARE,
    )
    elemdata = precompute_gradients(mesh)
    dofmap = build_dofmap(mesh, 1, {})
    return mesh, elemdata, dofmap


def test_plaplace_zero_state_zero_energy():
    problem = build_problem("plaplace", 1)
    assert problem.program.evaluate(np.zeros(problem.n_dofs)) == 0.0


def test_plaplace_single_triangle_hand_value():
    _, elemdata, dofmap = single_triangle_setup()
    params = PLaplaceParams(p=3.0, f_vec=np.zeros(3))
    value = energy_plaplace(np.array([0.0, 1.0, 0.0]), dofmap, elemdata, params)
    # F = (1, 0): J = (1/3) * 1 * (1/2)
    assert abs(value - 1.0 / 6.0) < 1e-15


def test_gl_constant_states():
    problem = build_problem("ginzburg_landau", 1)
    ones = np.ones(problem.n_dofs)
    zeros = np.zeros(problem.n_dofs)
    # v = 1 needs Dirichlet 1 as well: rebind the scaffold to all ones;
    # the quadrature weights sum to 1 only to round-off, hence the 1e-30
    lifted = problem.program.rebind("u_0", np.ones(problem.dofmap.n_total))
    assert abs(lifted.evaluate(ones)) < 1e-30
    # v = 0 everywhere: constant integrand 1/4 over |Omega| = 4
    assert abs(problem.program.evaluate(zeros) - 1.0) < 1e-14


def test_neohooke_identity_is_stress_free(tiny_bar_problem):
    problem = tiny_bar_problem
    u = problem.initial_guess
    assert abs(problem.program.evaluate(u)) < 1e-18
    assert np.abs(problem.program.gradient(u)).max() < 1e-9


def test_neohooke_uniform_dilation_hand_value():
    mesh = MeshData(
        3,
        np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0], [0.0, 0, 1]]),
        np.array([[0, 1, 2, 3]]),
        np.array([], dtype=np.int64),
        Region.BAR,
    )
    elemdata = precompute_gradients(mesh)
    dofmap = build_dofmap(mesh, 3, {})
    params = NeoHookeParams.from_moduli()
    u = 2.0 * mesh.nodes.ravel()
    value = energy_neohooke(u, dofmap, elemdata, params)
    expected = (params.c1 * (12.0 - 3.0 - 2.0 * np.log(8.0)) + params.d1 * 49.0) / 6.0
    assert abs(value - expected) < 1e-9 * abs(expected)


def test_neohooke_translation_and_rotation_invariance(free_bar_problem):
    problem = free_bar_problem
    rng = np.random.default_rng(9)
    v = problem.initial_guess + 2e-4 * rng.standard_normal(problem.n_dofs)
    j0 = problem.program.evaluate(v)
    shifted = (v.reshape(-1, 3) + np.array([0.3, -1.2, 0.7])).ravel()
    assert abs(problem.program.evaluate(shifted) - j0) <= 1e-10 * abs(j0)
    angle = 0.83
    rot = np.array(
        [
            [np.cos(angle), -np.sin(angle), 0.0],
            [np.sin(angle), np.cos(angle), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    rotated = (v.reshape(-1, 3) @ rot.T).ravel()
    assert abs(problem.program.evaluate(rotated) - j0) <= 1e-8 * abs(j0)


def straight_loop_gl(v_full, mesh, elemdata, params):
    """Independent per-element evaluation of the double-well energy."""
    total = 0.0
    for e in range(mesh.n_elems):
        vloc = v_full[mesh.elems[e]]
        fx = float((vloc * elemdata.dvx[e]).sum())
        fy = float((vloc * elemdata.dvy[e]).sum())
        e1 = 0.5 * params.eps * (fx**2 + fy**2)
        q = vloc @ params.ip
        e2 = 0.25 * float((((q**2 - 1.0) ** 2) * params.w).sum())
        total += (e1 + e2) * elemdata.vol[e]
    return total


def test_gl_matches_independent_element_loop():
    problem = build_problem("ginzburg_landau", 1)
    states = [np.ones(problem.n_dofs)]
    rng = np.random.default_rng(41)
    states.append(1.0 + 0.5 * rng.standard_normal(problem.n_dofs))
    for u in states:
        v_full = problem.full_field(u)
        expected = straight_loop_gl(v_full, problem.mesh, problem.elemdata, problem.params)
        got = problem.program.evaluate(u)
        assert abs(got - expected) <= 1e-12 * (1.0 + abs(expected))


def test_plaplace_energy_is_convex_on_segments():
    problem = build_problem("plaplace", 1)
    rng = np.random.default_rng(13)
    for _ in range(10):
        u1 = rng.standard_normal(problem.n_dofs)
        u2 = rng.standard_normal(problem.n_dofs)
        mid = problem.program.evaluate(0.5 * (u1 + u2))
        avg = 0.5 * (problem.program.evaluate(u1) + problem.program.evaluate(u2))
        assert mid <= avg + 1e-12


def test_hessian_nonzeros_stay_inside_pattern(tiny_bar_problem):
    problems = [
        build_problem("plaplace", 1),
        build_problem("ginzburg_landau", 1),
        tiny_bar_problem,
    ]
    rng = np.random.default_rng(29)
    for problem in problems:
        u = random_benchmark_state(problem, rng)
        dense = dense_hessian_by_probes(problem, u)
        outside = np.ones_like(dense, dtype=bool)
        rows, cols = problem.pattern.rows_cols()
        outside[rows, cols] = False
        scale = np.abs(dense).max()
        assert np.abs(dense[outside]).max() <= 1e-14 * scale


def test_build_problem_shapes_and_counts():
    problem = build_problem("plaplace", 1)
    assert problem.n_dofs == 33
    assert np.all(problem.pattern.tocsr().diagonal() == 1.0)
    bar = build_problem("neohooke", 1)
    assert bar.n_dofs == 2133
    # each tetrahedron couples its 12 vector dofs densely
    mat = bar.pattern.tocsr()
    elem = bar.mesh.elems[0]
    dofs = np.array([3 * n + c for n in elem for c in range(3)])
    free_pos = np.searchsorted(bar.dofmap.freedofs, dofs)
    inside = np.isin(dofs, bar.dofmap.freedofs)
    sub = mat[free_pos[inside]][:, free_pos[inside]].toarray()
    assert np.all(sub == 1.0)


def test_build_problem_deterministic():
    a = build_problem("ginzburg_landau", 1)
    b = build_problem("ginzburg_landau", 1)
    assert a.program.signature() == b.program.signature()
    assert np.array_equal(a.coloring.color_of, b.coloring.color_of)


def test_with_dirichlet_reuses_tape(tiny_bar_problem):
    problem = tiny_bar_problem
    twisted = problem.with_dirichlet(bar_dirichlet_values(problem.mesh, np.pi / 6))
    assert twisted.program.instrs is problem.program.instrs
    assert twisted.coloring is problem.coloring
    assert not np.array_equal(twisted.dofmap.u_0, problem.dofmap.u_0)
    # identity free part under twisted faces stores finite energy
    assert np.isfinite(twisted.program.evaluate(problem.initial_guess))


def test_bar_dirichlet_rotation_values():
    mesh = bar_mesh_from_cells(4, 2, 2, 0.005)
    theta = np.pi / 2.0
    values = bar_dirichlet_values(mesh, theta)
    for node, val in values.items():
        x, y, z = mesh.nodes[node]
        if x > 0.01:  # right face: quarter turn maps (y, z) -> (z, -y)
            assert np.allclose(val, [x, z, -y], atol=1e-15)
        else:
            assert np.allclose(val, [x, y, z])


def test_param_validation():
    with pytest.raises(ValueError):
        PLaplaceParams(p=1.0, f_vec=np.zeros(3))
    with pytest.raises(ValueError):
        GinzburgLandauParams(eps=-0.1)
    with pytest.raises(ValueError):
        GinzburgLandauParams(eps=0.01, ip=np.eye(3) * 2.0)
    with pytest.raises(ValueError):
        NeoHookeParams(c1=-1.0, d1=1.0)
    with pytest.raises(ValueError):
        build_problem("unknown", 1)


def test_quadrature_defaults_match_rule():
    params = GinzburgLandauParams(eps=0.01)
    assert np.allclose(params.ip.sum(axis=1), 1.0)
    assert np.allclose(np.sort(params.ip[0]), [1 / 6, 1 / 6, 2 / 3])
    assert np.allclose(params.w, 1 / 3)


def test_record_consistency_between_surfaces():
    _, elemdata, dofmap = single_triangle_setup()
    params = PLaplaceParams(p=3.0, f_vec=np.array([1.0, 2.0, 3.0]))
    program = record_plaplace(dofmap, elemdata, params)
    u = np.array([0.5, -1.0, 2.0])
    assert program.evaluate(u) == energy_plaplace(u, dofmap, elemdata, params)
