"""Internal data synthesized from a forward solution, plus measurement noise."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import norms
from .fields import ScalarField, as_matrix_field
from .operators import divergence_a_grad, gradient

__all__ = ["DataKind", "synthesize", "quotient_transform", "FloorViolation", "NoiseSpec", "add_noise"]


class DataKind(str, enum.Enum):
    """Kinds of internal measurement.

    ``QU`` is ``q u`` (photoacoustic, unit Grueneisen factor), ``QU2`` is
    ``q u^2``, ``POWER`` is the dissipated power ``grad u . a grad u`` and
    ``RAW_U`` is the solution itself.
    """

    QU = "qu"
    QU2 = "qu2"
    POWER = "power"
    RAW_U = "raw_u"

    @property
    def exponent(self) -> int | None:
        return {DataKind.QU: 1, DataKind.QU2: 2}.get(self)


def synthesize(kind: DataKind | str, a, q: ScalarField, u: ScalarField) -> ScalarField:
    kind = DataKind(kind)
    if q.grid != u.grid:
        raise ValueError("q and u live on different grids")
    if kind is DataKind.QU:
        return q * u
    if kind is DataKind.QU2:
        return q * u * u
    if kind is DataKind.POWER:
        a = as_matrix_field(a)
        ux, uy = (c.values for c in gradient(u))
        return u.with_values(a.a11 * ux**2 + 2 * a.a12 * ux * uy + a.a22 * uy**2)
    return u.with_values(u.values)


class FloorViolation(ValueError):
    reason = "u_floor"


def quotient_transform(u1: ScalarField, u2: ScalarField, a, floor: float = 1e-8
                       ) -> tuple[ScalarField, ScalarField, float]:
    """Return ``(w, sigma, residual)`` with ``w = u2/u1`` and ``sigma = a u1^2``.

    ``residual`` is the interior sup norm of ``div(sigma grad w)``, which
    vanishes up to discretization error when both loads share ``(a, q)``.
    Only scalar ``a`` is supported.
    """
    a = as_matrix_field(a)
    if not a.is_scalar:
        raise ValueError("quotient transform needs a scalar diffusion coefficient")
    low = float(u1.values.min())
    if low < floor:
        raise FloorViolation(f"u1 drops to {low:.3e}, below the floor {floor:.1e}")
    w = u2 / u1
    sigma = a.scalar() * u1 * u1
    res = norms.linf(divergence_a_grad(sigma, w), u1.grid.interior_mask)
    return w, sigma, res


@dataclass(frozen=True)
class NoiseSpec:
    model: str = "none"
    level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("none", "additive-gaussian", "relative-gaussian"):
            raise ValueError(f"unknown noise model {self.model!r}")
        if not self.level >= 0:
            raise ValueError("noise level must be non-negative")


def add_noise(H: ScalarField, spec: NoiseSpec) -> ScalarField:
    if spec.model == "none" or spec.level == 0:
        return H.with_values(H.values)
    g = np.random.default_rng(spec.seed).standard_normal(H.grid.shape)
    if spec.model == "additive-gaussian":
        return H.with_values(H.values + spec.level * g)
    return H.with_values(H.values * (1.0 + spec.level * g))
