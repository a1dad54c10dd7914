"""The three benchmark energy functionals as recorded tape programs.

Each ``record_*`` function writes the energy onto a fresh tape over the
free-dof vector; the resulting program supplies values, exact gradients,
and Hessian-vector products.  ``build_problem`` bundles mesh, element
tables, Dirichlet scaffolding, tape, sparsity pattern, and coloring into a
reusable problem object.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Program, Recorder
from .coloring import Coloring, color_pattern
from .fem import (
    DofMap,
    ElementData,
    SparsityPattern,
    assemble_load_vector,
    build_dofmap,
    precompute_gradients,
    sparsity_pattern,
)
from .mesh import MeshData, build_bar_mesh, build_lshape_mesh, build_square_mesh

__all__ = [
    "PLaplaceParams",
    "GinzburgLandauParams",
    "NeoHookeParams",
    "EnergyProblem",
    "record_plaplace",
    "record_ginzburg_landau",
    "record_neohooke",
    "energy_plaplace",
    "energy_ginzburg_landau",
    "energy_neohooke",
    "identity_deformation",
    "bar_dirichlet_values",
    "problem_from_mesh",
    "build_problem",
    "BENCHMARK_KINDS",
]

BENCHMARK_KINDS = ("plaplace", "ginzburg_landau", "neohooke")


def _default_quad_points() -> np.ndarray:
    return np.array(
        [
            [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        ]
    )


def _default_quad_weights() -> np.ndarray:
    return np.full(3, 1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class PLaplaceParams:
    """Power p > 1 and the assembled nodal load vector."""

    p: float
    f_vec: np.ndarray

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")


@dataclass(frozen=True, eq=False)
class GinzburgLandauParams:
    """Interface parameter and the 3-point barycentric quadrature rule.

    The rule integrates quadratics exactly but not the quartic well term;
    that inexactness is accepted at linear-element convergence order.
    """

    eps: float
    ip: np.ndarray = field(default_factory=_default_quad_points)
    w: np.ndarray = field(default_factory=_default_quad_weights)

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not np.allclose(self.ip.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("quadrature point rows must sum to 1")
        if not np.isclose(self.w.sum(), 1.0, atol=1e-12):
            raise ValueError("quadrature weights must sum to 1")


@dataclass(frozen=True)
class NeoHookeParams:
    """Compressible Neo-Hookean material constants (both positive)."""

    c1: float
    d1: float

    def __post_init__(self):
        if self.c1 <= 0.0 or self.d1 <= 0.0:
            raise ValueError("material constants must be positive")

    @classmethod
    def from_moduli(cls, young: float = 2.0e8, poisson: float = 0.3) -> "NeoHookeParams":
        """Constants from Young's modulus and Poisson's ratio."""
        mu = young / (2.0 * (1.0 + poisson))
        bulk = young / (3.0 * (1.0 - 2.0 * poisson))
        return cls(c1=mu / 2.0, d1=bulk / 2.0)


# ---------------------------------------------------------------------------
# tape recordings


def _scatter_full(rec: Recorder, dofmap: DofMap):
    u0 = rec.constant(dofmap.u_0, name="u_0")
    return rec.scatter(u0, dofmap.freedofs, rec.input_var)


def record_plaplace(dofmap: DofMap, elemdata: ElementData, params: PLaplaceParams) -> Program:
    """Tape of J(v) = sum (1/p)|grad v|^p vol - f . v over the free dofs."""
    rec = Recorder(dofmap.n_free)
    v = _scatter_full(rec, dofmap)
    v_elems = v[elemdata.elems]
    f_x = (v_elems * elemdata.dvx).sum(axis=1)
    f_y = (v_elems * elemdata.dvy).sum(axis=1)
    intgrds = (1.0 / params.p) * (f_x**2 + f_y**2) ** (params.p / 2.0)
    return rec.build((intgrds * elemdata.vol).sum() - ad.dot(params.f_vec, v))


def record_ginzburg_landau(
    dofmap: DofMap, elemdata: ElementData, params: GinzburgLandauParams
) -> Program:
    """Tape of the double-well energy with the inexact 3-point quadrature."""
    rec = Recorder(dofmap.n_free)
    v = _scatter_full(rec, dofmap)
    v_elems = v[elemdata.elems]
    f_x = (v_elems * elemdata.dvx).sum(axis=1)
    f_y = (v_elems * elemdata.dvy).sum(axis=1)
    e_1 = 0.5 * params.eps * (f_x**2 + f_y**2)
    e_2 = 0.25 * (((v_elems @ params.ip) ** 2 - 1.0) ** 2 @ params.w)
    return rec.build(((e_1 + e_2) * elemdata.vol).sum())


def record_neohooke(
    dofmap: DofMap,
    elemdata: ElementData,
    params: NeoHookeParams,
    sample_input: np.ndarray | None = None,
) -> Program:
    """Tape of the compressible Neo-Hookean energy over interleaved dofs.

    The determinant enters through its absolute value, so inverted states
    keep a finite density; det = 0 yields -inf via the log and is left for
    the line search to reject.
    """
    rec = Recorder(dofmap.n_free, sample_input=sample_input)
    v = _scatter_full(rec, dofmap)
    elems = elemdata.elems
    vx = v[3 * elems]
    vy = v[3 * elems + 1]
    vz = v[3 * elems + 2]

    f = {}
    for row, comp in (("1", vx), ("2", vy), ("3", vz)):
        for col, dv in (("1", elemdata.dvx), ("2", elemdata.dvy), ("3", elemdata.dvz)):
            f[row + col] = (comp * dv).sum(axis=1)

    i1 = (
        f["11"] ** 2 + f["12"] ** 2 + f["13"] ** 2
        + f["21"] ** 2 + f["22"] ** 2 + f["23"] ** 2
        + f["31"] ** 2 + f["32"] ** 2 + f["33"] ** 2
    )
    det = abs(
        f["11"] * f["22"] * f["33"]
        - f["11"] * f["23"] * f["32"]
        - f["12"] * f["21"] * f["33"]
        + f["12"] * f["23"] * f["31"]
        + f["13"] * f["21"] * f["32"]
        - f["13"] * f["22"] * f["31"]
    )
    w = params.c1 * (i1 - 3.0 - 2.0 * ad.log(det)) + params.d1 * (det - 1.0) ** 2
    return rec.build((w * elemdata.vol).sum())


# evaluation-style surface: record on demand and replay once


def energy_plaplace(u, dofmap, elemdata, params: PLaplaceParams) -> float:
    return record_plaplace(dofmap, elemdata, params).evaluate(u)


def energy_ginzburg_landau(u, dofmap, elemdata, params: GinzburgLandauParams) -> float:
    return record_ginzburg_landau(dofmap, elemdata, params).evaluate(u)


def energy_neohooke(u, dofmap, elemdata, params: NeoHookeParams) -> float:
    return record_neohooke(dofmap, elemdata, params).evaluate(u)


# ---------------------------------------------------------------------------
# benchmark problem assembly


@dataclass(frozen=True, eq=False)
class EnergyProblem:
    """Reusable bundle of one benchmark on one mesh level."""

    kind: str
    mesh: MeshData
    elemdata: ElementData
    dofmap: DofMap
    params: object
    program: Program
    pattern: SparsityPattern
    coloring: Coloring
    initial_guess: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_free

    def near_nullspace(self) -> np.ndarray:
        """Constant (per component) modes over the free dofs, as columns."""
        c = self.dofmap.components
        if c == 1:
            return np.ones((self.n_dofs, 1))
        modes = np.zeros((self.n_dofs, c))
        comp = self.dofmap.freedofs % c
        modes[np.arange(self.n_dofs), comp] = 1.0
        return modes

    def hvp_operator(self, u: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        """Hessian-probe closure at fixed u, accepting stacked directions."""
        u = np.array(u, dtype=float)
        return lambda s: self.program.hessian_vector_product(u, s)

    def full_field(self, u: np.ndarray) -> np.ndarray:
        """Free-dof vector scattered into the Dirichlet scaffolding."""
        v = self.dofmap.u_0.copy()
        v[self.dofmap.freedofs] = u
        return v

    def with_dirichlet(self, dirichlet: Mapping) -> "EnergyProblem":
        """Same tape and coloring under new boundary values.

        The free-dof set must be unchanged; only u_0 is rebuilt and
        rebound in the program.
        """
        dofmap = build_dofmap(self.mesh, self.dofmap.components, dirichlet)
        if not np.array_equal(dofmap.freedofs, self.dofmap.freedofs):
            raise ValueError("new Dirichlet data changes the free-dof set")
        program = self.program.rebind("u_0", dofmap.u_0)
        return dataclasses.replace(self, dofmap=dofmap, program=program)


def identity_deformation(mesh: MeshData, dofmap: DofMap) -> np.ndarray:
    """Free part of the deformation v(x) = x (interleaved components)."""
    return mesh.nodes.ravel()[dofmap.freedofs]


def bar_dirichlet_values(mesh: MeshData, twist_angle: float) -> dict[int, np.ndarray]:
    """End-face deformation values for the twisted-bar benchmark.

    The left face (x = 0) stays at its reference position; the right face
    rotates about the bar axis by ``twist_angle``, clockwise:
    (y, z) -> (y cos t + z sin t, -y sin t + z cos t).
    """
    length = float(mesh.nodes[:, 0].max())
    cos_t, sin_t = np.cos(twist_angle), np.sin(twist_angle)
    values: dict[int, np.ndarray] = {}
    for node in mesh.boundary_nodes:
        x, y, z = mesh.nodes[node]
        if x > length / 2.0:
            values[int(node)] = np.array([x, y * cos_t + z * sin_t, -y * sin_t + z * cos_t])
        else:
            values[int(node)] = np.array([x, y, z])
    return values


def problem_from_mesh(kind: str, mesh: MeshData, params=None) -> EnergyProblem:
    """Assemble a benchmark energy problem on a given mesh.

    Applies the benchmark's Dirichlet data (zero for the scalar problems,
    untwisted end faces for the bar) and default parameters, records the
    tape, and builds the sparsity pattern and coloring.
    """
    elemdata = precompute_gradients(mesh)
    if kind == "plaplace":
        dofmap = build_dofmap(mesh, 1, {int(b): 0.0 for b in mesh.boundary_nodes})
        if params is None:
            params = PLaplaceParams(p=3.0, f_vec=assemble_load_vector(mesh, elemdata, -10.0))
        program = record_plaplace(dofmap, elemdata, params)
        start = np.zeros(dofmap.n_free)
    elif kind == "ginzburg_landau":
        dofmap = build_dofmap(mesh, 1, {int(b): 0.0 for b in mesh.boundary_nodes})
        if params is None:
            params = GinzburgLandauParams(eps=0.01)
        program = record_ginzburg_landau(dofmap, elemdata, params)
        start = np.ones(dofmap.n_free)
    elif kind == "neohooke":
        dofmap = build_dofmap(mesh, 3, bar_dirichlet_values(mesh, 0.0))
        if params is None:
            params = NeoHookeParams.from_moduli()
        start = identity_deformation(mesh, dofmap)
        program = record_neohooke(dofmap, elemdata, params, sample_input=start)
    else:
        raise ValueError(f"unknown benchmark kind {kind!r}; expected one of {BENCHMARK_KINDS}")

    pattern = sparsity_pattern(mesh, dofmap)
    coloring = color_pattern(pattern)
    return EnergyProblem(
        kind=kind,
        mesh=mesh,
        elemdata=elemdata,
        dofmap=dofmap,
        params=params,
        program=program,
        pattern=pattern,
        coloring=coloring,
        initial_guess=start,
    )


def build_problem(kind: str, mesh_level: int, params=None) -> EnergyProblem:
    """Build mesh, element tables, dofmap, tape, pattern, and coloring.

    ``kind`` is one of ``plaplace`` (L-shape, p = 3, f = -10, zero
    Dirichlet), ``ginzburg_landau`` (square, eps = 0.01, zero Dirichlet,
    all-ones start), or ``neohooke`` (bar, untwisted end faces, identity
    start).  The returned problem is reusable across repeated
    minimizations on the same mesh.
    """
    if kind == "plaplace":
        mesh = build_lshape_mesh(mesh_level)
    elif kind == "ginzburg_landau":
        mesh = build_square_mesh(mesh_level)
    elif kind == "neohooke":
        mesh = build_bar_mesh(mesh_level)
    else:
        raise ValueError(f"unknown benchmark kind {kind!r}; expected one of {BENCHMARK_KINDS}")
    return problem_from_mesh(kind, mesh, params)
