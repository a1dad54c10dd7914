"""Distance-2 column coloring and compressed sparse-Hessian recovery.

A valid coloring groups columns so that no two same-colored columns share
a structurally nonzero row; one Hessian-vector product per color then
determines every stored entry exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .fem import SparsityPattern

__all__ = ["Coloring", "ColoringError", "color_pattern", "recover_hessian"]


class ColoringError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Coloring:
    """Column-color assignment for a symmetric sparsity pattern."""

    color_of: np.ndarray
    n_colors: int


def color_pattern(pattern: SparsityPattern) -> Coloring:
    """Greedy distance-2 coloring of the pattern's columns.

    Columns are visited in descending-degree order (ties by ascending
    index); each takes the smallest color not used by any column within
    distance 2 in the adjacency graph.  Deterministic for a given pattern.
    """
    n = pattern.n
    a = pattern.tocsr(dtype=np.int8)
    # columns conflict iff they share a row; for a symmetric pattern with a
    # full diagonal that is exactly the structure of A @ A
    conflict = (a @ a).tocsr()
    conflict.sort_indices()

    degree = np.diff(a.indptr)
    order = np.lexsort((np.arange(n), -degree))
    color = np.full(n, -1, dtype=np.int64)
    indptr, indices = conflict.indptr, conflict.indices
    for j in order:
        used = color[indices[indptr[j] : indptr[j + 1]]]
        used = np.unique(used[used >= 0])
        gap = np.nonzero(used != np.arange(used.size))[0]
        color[j] = int(gap[0]) if gap.size else used.size
    return Coloring(color_of=color, n_colors=int(color.max()) + 1 if n else 0)


def recover_hessian(
    hvp: Callable[[np.ndarray], np.ndarray],
    coloring: Coloring,
    pattern: SparsityPattern,
    probe_block: int = 8,
) -> sp.csr_matrix:
    """Assemble the sparse Hessian from one probe per color.

    ``hvp`` must map stacked directions of shape (n, k) to the matching
    products (n, k).  Probes use the color indicator vectors; entry (i, j)
    is read from component i of the probe for j's color.  The result is
    symmetrized as (H + H^T) / 2; values outside the pattern are
    discarded.  A non-finite probe raises, naming the color.
    """
    n, k = pattern.n, coloring.n_colors
    seeds = np.zeros((n, k))
    seeds[np.arange(n), coloring.color_of] = 1.0

    probes = np.empty((n, k))
    for start in range(0, k, probe_block):
        stop = min(start + probe_block, k)
        block = np.asarray(hvp(seeds[:, start:stop]))
        if block.shape != (n, stop - start):
            raise ValueError(f"hvp returned shape {block.shape}, expected ({n}, {stop - start})")
        probes[:, start:stop] = block
    finite = np.isfinite(probes).all(axis=0)
    if not finite.all():
        raise ColoringError(f"non-finite Hessian probe for color {int(np.nonzero(~finite)[0][0])}")

    rows, cols = pattern.rows_cols()
    data = probes[rows, coloring.color_of[cols]]
    h = sp.csr_matrix((data, pattern.indices, pattern.indptr), shape=(n, n))
    return ((h + h.T) * 0.5).tocsr()
