"""Sparse symmetric linear solvers for the Newton systems.

Small systems go through a direct sparse factorization; large ones use
conjugate gradients preconditioned by one V(1,1) cycle of a
smoothed-aggregation multigrid hierarchy with symmetric Gauss-Seidel
smoothing.  The switch happens at ``DIRECT_DOF_LIMIT`` unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "DIRECT_DOF_LIMIT",
    "SolverError",
    "IndefiniteSystemError",
    "AmgHierarchy",
    "solve_direct",
    "build_amg",
    "pcg_solve",
    "solve_auto",
]

DIRECT_DOF_LIMIT = 15_000  # systems up to this size are solved directly


class SolverError(RuntimeError):
    pass


class IndefiniteSystemError(SolverError):
    """CG met a direction of non-positive curvature."""


def solve_direct(a: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    """Sparse factorization solve with a fill-reducing ordering.

    Raises ``SolverError`` on factorization breakdown or when the computed
    solution fails the 1e-10 relative-residual contract (near-singular
    systems).
    """
    b = np.asarray(b, dtype=float)
    try:
        lu = spla.splu(sp.csc_matrix(a))
        x = lu.solve(b)
    except RuntimeError as exc:  # SuperLU signals exactly-singular factors
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("sparse factorization produced non-finite values")
    bnorm = np.linalg.norm(b)
    resid = np.linalg.norm(a @ x - b)
    if resid > 1e-10 * max(bnorm, 1e-300):
        # one refinement step, then accept down to the backward-stable floor
        x = x + lu.solve(b - a @ x)
        resid = np.linalg.norm(a @ x - b)
        floor = float(np.abs(a).sum(axis=1).max()) * np.linalg.norm(x)
        if resid > 1e-10 * max(bnorm + floor, 1e-300):
            raise SolverError(
                f"direct solve residual {resid:.3e} exceeds 1e-10 relative tolerance"
            )
    return x


# ---------------------------------------------------------------------------
# smoothed-aggregation hierarchy


@dataclass(eq=False)
class _AmgLevel:
    a: sp.csr_matrix
    p: sp.csr_matrix | None = None
    r: sp.csr_matrix | None = None
    lower_solve: Callable[[np.ndarray], np.ndarray] | None = None
    upper_solve: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(eq=False)
class AmgHierarchy:
    """Multigrid levels plus a factorization of the coarsest operator.

    ``apply`` runs one V(1,1) cycle with symmetric Gauss-Seidel pre/post
    smoothing, which is a symmetric positive definite preconditioner.
    """

    levels: list[_AmgLevel]
    coarse_solve: Callable[[np.ndarray], np.ndarray]

    @property
    def n(self) -> int:
        return self.levels[0].a.shape[0]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level_sizes(self) -> list[int]:
        return [lvl.a.shape[0] for lvl in self.levels]

    def apply(self, residual: np.ndarray) -> np.ndarray:
        return self._cycle(0, np.asarray(residual, dtype=float))

    def _cycle(self, k: int, b: np.ndarray) -> np.ndarray:
        lvl = self.levels[k]
        if k == len(self.levels) - 1:
            return self.coarse_solve(b)
        a = lvl.a
        # pre-smooth: one symmetric Gauss-Seidel sweep from zero
        x = lvl.lower_solve(b)
        x = x + lvl.upper_solve(b - a @ x)
        x = x + lvl.p @ self._cycle(k + 1, lvl.r @ (b - a @ x))
        # post-smooth: one more symmetric sweep
        x = x + lvl.lower_solve(b - a @ x)
        x = x + lvl.upper_solve(b - a @ x)
        return x


def _triangular_solver(mat: sp.spmatrix) -> Callable[[np.ndarray], np.ndarray]:
    # LU of a triangular matrix is itself; natural ordering keeps it that way
    lu = spla.splu(
        sp.csc_matrix(mat),
        permc_spec="NATURAL",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": False},
    )
    return lu.solve


def _aggregate(a: sp.csr_matrix) -> tuple[np.ndarray, int]:
    """Greedy standard aggregation over all symmetric nonzero connections."""
    n = a.shape[0]
    indptr, indices = a.indptr, a.indices
    agg = np.full(n, -1, dtype=np.int64)
    next_agg = 0

    def neighbors(i: int) -> np.ndarray:
        nbr = indices[indptr[i] : indptr[i + 1]]
        return nbr[nbr != i]

    # pass 1: roots whose whole neighborhood is untouched
    for i in range(n):
        if agg[i] != -1:
            continue
        nbr = neighbors(i)
        if (agg[nbr] == -1).all():
            agg[i] = next_agg
            agg[nbr] = next_agg
            next_agg += 1
    # pass 2: attach leftovers to the first adjacent aggregate
    attach: list[tuple[int, int]] = []
    for i in range(n):
        if agg[i] != -1:
            continue
        cand = agg[neighbors(i)]
        cand = cand[cand >= 0]
        if cand.size:
            attach.append((i, int(cand[0])))
    for i, k in attach:
        agg[i] = k
    # pass 3: islands form their own aggregates
    for i in range(n):
        if agg[i] != -1:
            continue
        nbr = neighbors(i)
        agg[i] = next_agg
        agg[nbr[agg[nbr] == -1]] = next_agg
        next_agg += 1
    return agg, next_agg


def _tentative_prolongator(
    agg: np.ndarray, n_agg: int, b: np.ndarray
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Near-nullspace restricted to aggregates, locally orthonormalized."""
    n, m = b.shape
    order = np.argsort(agg, kind="stable")
    bounds = np.searchsorted(agg[order], np.arange(n_agg + 1))

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    coarse_rows: list[np.ndarray] = []
    col_offset = 0
    for k in range(n_agg):
        members = order[bounds[k] : bounds[k + 1]]
        local = b[members]  # (q, m)
        q_mat, r_mat = np.linalg.qr(local)
        diag = np.abs(np.diag(r_mat))
        keep = diag > 1e-12 * max(diag.max(), 1e-300)
        if not keep.any():
            keep[0] = True
        q_mat = q_mat[:, keep]
        kk = q_mat.shape[1]
        rows.append(np.repeat(members, kk))
        cols.append(np.tile(np.arange(col_offset, col_offset + kk), members.size))
        vals.append(q_mat.ravel())
        coarse_rows.append(r_mat[keep, :])
        col_offset += kk

    t = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, col_offset),
    )
    return t, np.vstack(coarse_rows)


def _spectral_radius_estimate(a: sp.csr_matrix, d_inv: np.ndarray, iters: int = 10) -> float:
    """Power-iteration estimate of rho(D^-1 A), deterministic start."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(a.shape[0])
    rho = 1.0
    for _ in range(iters):
        w = d_inv * (a @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 1.0
        rho = norm / np.linalg.norm(v)
        v = w / norm
    return rho


def build_amg(a: sp.spmatrix, near_nullspace: Sequence[np.ndarray] | np.ndarray) -> AmgHierarchy:
    """Smoothed-aggregation hierarchy for a symmetric positive-diagonal matrix.

    Strength of connection keeps every symmetric nonzero (theta = 0); the
    tentative prolongator carries the near-nullspace; one damped-Jacobi
    step (omega = 4/3 over a 10-step power-iteration estimate of
    rho(D^-1 A)) smooths it.  Coarse operators are Galerkin products;
    coarsening stops at 64 dofs or when aggregation stalls.
    """
    a = sp.csr_matrix(a)
    b = np.asarray(near_nullspace, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    elif b.shape[0] != a.shape[0]:
        b = np.column_stack(list(near_nullspace))
    if np.any(a.diagonal() <= 0.0):
        raise SolverError("matrix has a non-positive diagonal entry")

    levels: list[_AmgLevel] = []
    rng = np.random.default_rng(7)
    while a.shape[0] > 64:
        agg, n_agg = _aggregate(a)
        if n_agg >= a.shape[0]:
            break
        t, b_coarse = _tentative_prolongator(agg, n_agg, b)
        d_inv = 1.0 / a.diagonal()
        rho = _spectral_radius_estimate(a, d_inv)
        omega = (4.0 / 3.0) / rho
        p = (t - sp.diags(omega * d_inv) @ (a @ t)).tocsr()
        r = p.T.tocsr()
        a_coarse = (r @ (a @ p)).tocsr()
        # Galerkin identity spot check on random probes
        for _ in range(2):
            probe = rng.standard_normal(p.shape[1])
            lhs = a_coarse @ probe
            rhs = r @ (a @ (p @ probe))
            if np.linalg.norm(lhs - rhs) > 1e-10 * max(np.linalg.norm(rhs), 1e-300):
                raise SolverError("Galerkin coarse-operator identity violated")
        levels.append(
            _AmgLevel(
                a=a,
                p=p,
                r=r,
                lower_solve=_triangular_solver(sp.tril(a, 0)),
                upper_solve=_triangular_solver(sp.triu(a, 0)),
            )
        )
        a, b = a_coarse, b_coarse
    levels.append(_AmgLevel(a=a))
    if a.shape[0] <= 2000:
        coarse_factor = scipy.linalg.lu_factor(a.toarray())
        coarse_solve = lambda rhs: scipy.linalg.lu_solve(coarse_factor, rhs)
    else:  # aggregation stalled on an unusually weak graph; stay sparse
        coarse_solve = spla.splu(sp.csc_matrix(a)).solve
    return AmgHierarchy(levels=levels, coarse_solve=coarse_solve)


# ---------------------------------------------------------------------------
# preconditioned conjugate gradients


def pcg_solve(
    a: sp.spmatrix,
    b: np.ndarray,
    precond: AmgHierarchy | np.ndarray | None,
    rtol: float,
    maxiter: int,
) -> tuple[np.ndarray, int]:
    """Preconditioned CG; returns (solution, iterations).

    ``precond`` is an AMG hierarchy (one V-cycle per application), the
    diagonal of ``a`` (Jacobi preconditioning), or None.  Raises
    ``IndefiniteSystemError`` on non-positive curvature and
    ``SolverError`` when ``maxiter`` is exceeded.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if isinstance(precond, AmgHierarchy):
        apply_m = precond.apply
    elif precond is None:
        apply_m = lambda r: r
    else:
        d_inv = 1.0 / np.asarray(precond, dtype=float)
        apply_m = lambda r: d_inv * r

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    x = np.zeros(n)
    r = b.copy()
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, maxiter + 1):
        ap = a @ p
        pap = float(p @ ap)
        if pap <= 0.0:
            raise IndefiniteSystemError(
                f"non-positive curvature p^T A p = {pap:.3e} at iteration {k}"
            )
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= rtol * bnorm:
            # recursive residual can drift; accept only the true one
            true_r = b - a @ x
            if np.linalg.norm(true_r) <= rtol * bnorm:
                return x, k
            r = true_r
        z = apply_m(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not reach rtol {rtol:g} in {maxiter} iterations "
        f"(relative residual {np.linalg.norm(r) / bnorm:.3e})"
    )


def solve_auto(
    a: sp.spmatrix,
    b: np.ndarray,
    near_nullspace: Sequence[np.ndarray] | np.ndarray | None = None,
) -> np.ndarray:
    """Direct solve up to DIRECT_DOF_LIMIT unknowns, AMG-CG above it."""
    n = a.shape[0]
    if n <= DIRECT_DOF_LIMIT:
        return solve_direct(a, b)
    if near_nullspace is None:
        near_nullspace = np.ones((n, 1))
    hierarchy = build_amg(a, near_nullspace)
    x, _ = pcg_solve(a, b, hierarchy, rtol=1e-8, maxiter=400)
    return x
