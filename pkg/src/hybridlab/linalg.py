"""Preconditioned conjugate gradients for the assembled SPD systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SolverError(RuntimeError):
    reason = "solver"


class NotPositiveDefinite(SolverError):
    reason = "not positive definite"


class NoConvergence(SolverError):
    reason = "no convergence"


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float


def pcg(A, b: np.ndarray, tol: float = 1e-10, max_iter: int | None = None,
        x0: np.ndarray | None = None) -> CGResult:
    """Jacobi-preconditioned CG on ``A x = b``, stopping at ``|b - Ax| <= tol |b|``.

    Raises :class:`NotPositiveDefinite` as soon as a search direction with
    ``p^T A p <= 0`` (or a non-positive diagonal) shows up.
    """
    n = b.shape[0]
    max_iter = 10 * n if max_iter is None else max_iter
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise NotPositiveDefinite("non-positive diagonal entry in assembled matrix")
    minv = 1.0 / diag

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    target = tol * bnorm
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return CGResult(x, 0, rnorm / bnorm)
    z = minv * r
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise NotPositiveDefinite(f"p^T A p = {pAp:.3e} at CG iteration {k}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # confirm against the true residual; recurrence drift is possible
            r = b - A @ x
            rnorm = np.linalg.norm(r)
            if rnorm <= target:
                return CGResult(x, k, rnorm / bnorm)
            # restart from the true residual
            z = minv * r
            p = z.copy()
            rz = r @ z
            continue
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergence(f"CG did not reach {tol:.1e} in {max_iter} iterations "
                        f"(residual {rnorm / bnorm:.3e})")


def inverse_power(A, tol: float, max_iter: int, solve_tol: float = 1e-11,
                  start: np.ndarray | None = None) -> tuple[float, np.ndarray, int]:
    """Smallest eigenvalue of SPD ``A`` by inverse iteration with Rayleigh quotients.

    Returns ``(eigenvalue, unit eigenvector, iterations)``.
    """
    n = A.shape[0]
    v = np.ones(n) if start is None else np.array(start, dtype=float)
    v /= np.linalg.norm(v)
    lam_old = float(v @ (A @ v))
    for k in range(1, max_iter + 1):
        w = pcg(A, v, tol=solve_tol).x
        v = w / np.linalg.norm(w)
        lam = float(v @ (A @ v))
        if abs(lam - lam_old) <= tol * abs(lam):
            return lam, v, k
        lam_old = lam
    raise NoConvergence(f"inverse iteration did not converge in {max_iter} steps")
