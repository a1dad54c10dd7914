import dataclasses
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from minfem.energies import EnergyProblem, problem_from_mesh
from minfem.mesh import bar_mesh_from_cells


@pytest.fixture(scope="session")
def tiny_bar_problem() -> EnergyProblem:
    """Neo-Hookean problem on a 4x2x2-cell bar: 81 dofs, well under 200."""
    mesh = bar_mesh_from_cells(4, 2, 2, 0.005)
    return problem_from_mesh("neohooke", mesh)


@pytest.fixture(scope="session")
def free_bar_problem() -> EnergyProblem:
    """Tiny bar with no Dirichlet boundary: the energy sees all nodal values."""
    mesh = bar_mesh_from_cells(3, 2, 2, 0.005)
    mesh = dataclasses.replace(mesh, boundary_nodes=np.array([], dtype=np.int64))
    return problem_from_mesh("neohooke", mesh)
