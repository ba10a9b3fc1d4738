"""Dirichlet problem ``-div(a grad u) + q u = F``, ``u = f`` on the boundary.

Boundary values are eliminated into the right-hand side, leaving a symmetric
system over interior nodes that is solved by Jacobi-preconditioned CG.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import norms
from .admissibility import in_coercive_union
from .fields import BoundaryTrace, ScalarField, as_matrix_field
from .linalg import NotPositiveDefinite, SolverError, pcg
from .operators import stiffness_matrix

__all__ = [
    "AssembledSystem", "SolveStats", "SolverError", "NotPositiveDefinite", "ContractionError",
    "assemble", "solve", "solve_perturbative", "estimate_operator_norm_inverse", "estimate_delta",
]


class ContractionError(SolverError):
    reason = "contraction failure"

    def __init__(self, message: str, history: ContractionHistory | None = None):
        super().__init__(message)
        self.history = history


def _fingerprint(*arrays) -> str:
    h = hashlib.sha256()
    for arr in arrays:
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    grid: object
    fingerprint: str
    boundary_values: np.ndarray

    def expand(self, x_interior: np.ndarray) -> ScalarField:
        g = self.grid
        full = np.empty(g.size)
        full[g.interior_indices] = x_interior
        full[g.boundary_indices] = self.boundary_values
        return ScalarField(g, full.reshape(g.shape))


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    residual: float
    wall_time: float
    method: str = "pcg-jacobi"


def _trace_values(f, grid) -> np.ndarray:
    if isinstance(f, BoundaryTrace):
        if f.grid != grid:
            raise ValueError("boundary trace lives on a different grid")
        return np.asarray(f.values)
    return np.full(len(grid.boundary_indices), float(f))


def assemble(a, q: ScalarField, f, source: ScalarField | None = None) -> AssembledSystem:
    a = as_matrix_field(a)
    g = q.grid
    if a.grid != g:
        raise ValueError("a and q live on different grids")
    I, B = g.interior_indices, g.boundary_indices
    K = stiffness_matrix(a)
    fb = _trace_values(f, g)
    A = (K[I][:, I] + sp.diags(q.values.ravel()[I])).tocsr()
    rhs = -(K[I][:, B] @ fb)
    if source is not None:
        rhs = rhs + source.values.ravel()[I]
    return AssembledSystem(A, rhs, g, _fingerprint(a.a11, a.a12, a.a22, q.values), fb)


def solve(a, q: ScalarField, f, tol: float = 1e-10, force: bool = False,
          source: ScalarField | None = None) -> tuple[ScalarField, SolveStats]:
    """Solve the Dirichlet problem; ``u`` equals ``f`` exactly on the boundary.

    Unless ``force`` is set, ``(a, q)`` must satisfy ``mu*lam < lambda_1`` for
    its tightest ellipticity/lower bounds.  CG breakdown on a non-positive
    direction raises :class:`NotPositiveDefinite` either way.
    """
    if not force:
        ok, prod, lam1 = in_coercive_union(a, q)
        if not ok:
            raise NotPositiveDefinite(
                f"coefficients outside the coercive class: mu*lam = {prod:.6g} >= lambda_1 = {lam1:.6g}")
    t0 = time.perf_counter()
    system = assemble(a, q, f, source)
    res = pcg(system.matrix, system.rhs, tol=tol)
    stats = SolveStats(res.iterations, res.residual, time.perf_counter() - t0)
    return system.expand(res.x), stats


def _interior_l2(diff: np.ndarray, grid) -> float:
    # the iterates share boundary values, so only interior nodes contribute
    return float(np.sqrt(np.sum(diff**2) * grid.hx * grid.hy))


@dataclass(frozen=True)
class ContractionHistory:
    differences: tuple[float, ...]
    ratios: tuple[float, ...]
    iterations: int

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0


def solve_perturbative(a0, q0: ScalarField, q_pert: ScalarField, f, source: ScalarField | None = None,
                       tol: float = 1e-10, max_iter: int = 500, delta: float | None = None,
                       force: bool = False, solver_tol: float = 1e-12, fail_on_ratio: bool = True,
                       ) -> tuple[ScalarField, ContractionHistory]:
    """Fixed-point solve of the perturbed problem around the base operator.

    Iterates ``u <- S(-q_pert * u + F, f)`` where ``S`` solves the problem with
    ``(a0, q0)``, starting from ``S(F, f)``.  Successive differences are measured
    in the discrete L2 norm; their ratios are the observed contraction factors.
    Ratios are only formed while the previous difference exceeds ``10 * tol`` so
    that solver round-off does not masquerade as expansion.
    """
    g = q0.grid
    if not force:
        if delta is None:
            delta = estimate_delta(a0, q0)
        if norms.linf(q_pert) >= delta:
            raise ContractionError(
                f"|q_pert|_inf = {norms.linf(q_pert):.4g} is not below delta = {delta:.4g}")
    system = assemble(a0, q0, f)
    A, rhs0 = system.matrix, system.rhs
    I = g.interior_indices
    F = np.zeros(len(I)) if source is None else source.values.ravel()[I]
    qp = q_pert.values.ravel()[I]

    x = pcg(A, rhs0 + F, tol=solver_tol).x
    diffs: list[float] = []
    ratios: list[float] = []
    for k in range(1, max_iter + 1):
        x_new = pcg(A, rhs0 + F - qp * x, tol=solver_tol, x0=x).x
        d = _interior_l2(x_new - x, g)
        if diffs and diffs[-1] > 10 * tol:
            ratios.append(d / diffs[-1])
            if fail_on_ratio and ratios[-1] >= 1.0:
                raise ContractionError(f"observed ratio {ratios[-1]:.4f} >= 1 at step {k}",
                                       ContractionHistory(tuple(diffs + [d]), tuple(ratios), k))
        diffs.append(d)
        x = x_new
        if d < tol:
            return system.expand(x), ContractionHistory(tuple(diffs), tuple(ratios), k)
    raise ContractionError(f"fixed-point iteration did not reach {tol:.1e} in {max_iter} steps",
                           ContractionHistory(tuple(diffs), tuple(ratios), max_iter))


def estimate_operator_norm_inverse(a0, q0: ScalarField, tol: float = 1e-6,
                                   max_iter: int = 10_000) -> float:
    """Discrete L2 -> L2 norm of the inverse interior operator, by power iteration.

    The interior operator is symmetric, so this equals one over its smallest
    eigenvalue; each power step costs one CG solve.
    """
    if not in_coercive_union(a0, q0)[0]:
        raise NotPositiveDefinite("base coefficients are outside the coercive class")
    A = assemble(a0, q0, 0.0).matrix
    v = np.ones(A.shape[0])
    v /= np.linalg.norm(v)
    est_old = 0.0
    for _ in range(max_iter):
        w = pcg(A, v, tol=1e-12).x
        est = float(v @ w)
        v = w / np.linalg.norm(w)
        if abs(est - est_old) <= tol * abs(est):
            return est
        est_old = est
    raise SolverError("power iteration for the inverse norm did not converge")


def estimate_delta(a0, q0: ScalarField, tol: float = 1e-6) -> float:
    """Contraction radius ``1 / (2 |P^{-1}|)`` with the discrete L2 proxy for the operator norm."""
    return 1.0 / (2.0 * estimate_operator_norm_inverse(a0, q0, tol=tol))
