"""Grid-data precomputation for linear nodal elements.

Produces the per-element basis-gradient tables and volumes, the Dirichlet
scaffolding (free-dof indexing and boundary-value vector), constant load
vectors, and the symmetric sparsity pattern of the energy Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .mesh import MeshData

__all__ = [
    "ElementData",
    "DofMap",
    "SparsityPattern",
    "precompute_gradients",
    "build_dofmap",
    "assemble_load_vector",
    "sparsity_pattern",
]


@dataclass(frozen=True, eq=False)
class ElementData:
    """Per-element tables of the linear nodal basis.

    ``dvx[e, i]`` is the (constant) x-derivative of basis function i on
    element e; ``vol`` holds element areas/volumes.  ``elems`` repeats the
    mesh connectivity so the tables form a self-contained input bundle.
    """

    elems: np.ndarray
    dvx: np.ndarray
    dvy: np.ndarray
    vol: np.ndarray
    dvz: np.ndarray | None = None

    @property
    def n_elems(self) -> int:
        return self.vol.shape[0]


@dataclass(frozen=True, eq=False)
class DofMap:
    """Free/fixed dof bookkeeping for a scalar or vector-valued field.

    Vector dofs interleave per node: node k's components occupy slots
    ``components*k .. components*k + components - 1``.  ``u_0`` carries the
    Dirichlet values at fixed dofs and zeros at free dofs.
    """

    n_total: int
    components: int
    freedofs: np.ndarray
    u_0: np.ndarray

    @property
    def n_free(self) -> int:
        return self.freedofs.shape[0]


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """Symmetric nonzero structure of the Hessian over the free dofs.

    Stored in row-pointer (CSR) form with sorted column indices and a full
    diagonal.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def nnz(self) -> int:
        return self.indices.shape[0]

    def rows_cols(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate form (row, col) of the stored entries."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return rows, self.indices

    def tocsr(self, dtype=np.float64) -> sp.csr_matrix:
        data = np.ones(self.nnz, dtype=dtype)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    @classmethod
    def from_csr(cls, a: sp.spmatrix) -> "SparsityPattern":
        a = sp.csr_matrix(a)
        a.sum_duplicates()
        a.sort_indices()
        return cls(a.shape[0], a.indptr.astype(np.int64), a.indices.astype(np.int64))


def precompute_gradients(mesh: MeshData) -> ElementData:
    """Basis gradients and volumes of every simplex.

    The gradients come from the inverse of the per-element edge matrix;
    the volume is |det| / 2 in 2D and |det| / 6 in 3D.  Raises on a
    degenerate (zero-volume) simplex, naming the element index.
    """
    coords = mesh.nodes[mesh.elems]  # (ne, npe, dim)
    edges = coords[:, 1:, :] - coords[:, :1, :]  # rows are edge vectors
    det = np.linalg.det(edges)
    scale = np.abs(edges).max(axis=(1, 2))
    bad = np.abs(det) <= 1e-12 * np.maximum(scale, 1e-300) ** mesh.dim
    if bad.any():
        raise ValueError(f"degenerate simplex at element {int(np.nonzero(bad)[0][0])}")

    # rows of inv(edges)^T are the gradients of basis functions 1..dim;
    # basis 0 closes the partition of unity
    grads = np.linalg.inv(edges).transpose(0, 2, 1)
    full = np.empty((mesh.n_elems, mesh.dim + 1, mesh.dim))
    full[:, 1:, :] = grads
    full[:, 0, :] = -grads.sum(axis=1)

    vol = np.abs(det) / (2.0 if mesh.dim == 2 else 6.0)
    dvz = full[:, :, 2].copy() if mesh.dim == 3 else None
    return ElementData(
        elems=mesh.elems,
        dvx=full[:, :, 0].copy(),
        dvy=full[:, :, 1].copy(),
        vol=vol,
        dvz=dvz,
    )


def build_dofmap(
    mesh: MeshData,
    components: int,
    dirichlet: Mapping[int, float | Sequence[float]],
) -> DofMap:
    """Free-dof indexing and Dirichlet-value vector.

    ``dirichlet`` maps every boundary node to its prescribed value (a
    scalar for ``components == 1``, a length-``components`` sequence
    otherwise).  A value for a non-boundary node, or a missing boundary
    node, is an error.
    """
    if components not in (1, mesh.dim):
        raise ValueError(f"components must be 1 or {mesh.dim}, got {components}")
    boundary = set(int(b) for b in mesh.boundary_nodes)
    given = set(int(k) for k in dirichlet)
    if given - boundary:
        raise ValueError(
            f"Dirichlet value prescribed at non-boundary node {sorted(given - boundary)[0]}"
        )
    if boundary - given:
        raise ValueError(
            f"missing Dirichlet value for boundary node {sorted(boundary - given)[0]}"
        )

    n_total = mesh.n_nodes * components
    u_0 = np.zeros(n_total)
    fixed = np.zeros(n_total, dtype=bool)
    for node, value in dirichlet.items():
        if components == 1:
            vals = [float(value)]
        else:
            vals = [float(v) for v in np.asarray(value).ravel()]
            if len(vals) != components:
                raise ValueError(
                    f"Dirichlet value at node {node} has {len(vals)} components, "
                    f"expected {components}"
                )
        for c, v in enumerate(vals):
            dof = components * int(node) + c
            u_0[dof] = v
            fixed[dof] = True
    freedofs = np.nonzero(~fixed)[0]
    return DofMap(n_total=n_total, components=components, freedofs=freedofs, u_0=u_0)


def assemble_load_vector(mesh: MeshData, elemdata: ElementData, f_const: float) -> np.ndarray:
    """Nodal load vector of a constant source: f_i = f * integral of basis i.

    For linear elements the exact integral of basis function i over an
    element is vol / nodes_per_elem.
    """
    npe = mesh.elems.shape[1]
    weights = np.repeat(elemdata.vol / npe, npe)
    out = np.bincount(mesh.elems.ravel(), weights=weights, minlength=mesh.n_nodes)
    return f_const * out


def sparsity_pattern(mesh: MeshData, dofmap: DofMap) -> SparsityPattern:
    """Hessian nonzero structure over the free dofs.

    Two free dofs are connected iff their nodes share an element; vector
    problems expand each node adjacency into a dense components^2 block.
    The result is symmetric with a full diagonal, reindexed to free-dof
    positions.
    """
    elems = mesh.elems
    npe = elems.shape[1]
    rows = np.repeat(elems, npe, axis=1).ravel()
    cols = np.tile(elems, (1, npe)).ravel()
    data = np.ones(rows.size, dtype=np.int8)
    adj = sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    adj.data[:] = 1

    c = dofmap.components
    if c > 1:
        adj = sp.kron(adj, np.ones((c, c), dtype=np.int8), format="csr")
    free = dofmap.freedofs
    restricted = adj[free][:, free].tocsr()
    return SparsityPattern.from_csr(restricted)
