"""Coefficient classes, the first Dirichlet eigenvalue, samplers and manufactured cases."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import norms
from .fields import BoundaryTrace, Grid, MatrixField, ScalarField, as_matrix_field
from .linalg import inverse_power
from .operators import stiffness_matrix


@lru_cache(maxsize=64)
def first_dirichlet_eigenvalue(grid: Grid, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Smallest eigenvalue of the five-point Dirichlet Laplacian on ``grid``."""
    if min(grid.nx, grid.ny) < 5:
        raise ValueError(f"eigenvalue estimate needs at least 5 nodes per axis, got {grid.nx}x{grid.ny}")
    K = stiffness_matrix(MatrixField.identity(grid))
    I = grid.interior_indices
    A = K[I][:, I].tocsr()
    lam, _, _ = inverse_power(A, tol=tol, max_iter=max_iter)
    return lam


def discrete_eigenvalue_closed_form(grid: Grid) -> float:
    return (4 / grid.hx**2) * math.sin(math.pi * grid.hx / 2) ** 2 \
        + (4 / grid.hy**2) * math.sin(math.pi * grid.hy / 2) ** 2


@dataclass(frozen=True)
class AdmissibleClass:
    """Bounds describing one of the coefficient classes.

    ``mu`` bounds the ellipticity of ``a``; ``lam`` (if given) asks ``q >= -lam``
    and ``nonpositive`` adds ``q <= 0``.  ``(q_minus, q_plus)`` selects the class
    of negative potentials ``q_minus <= -q <= q_plus``; ``(q_low, q_high, m)``
    the bounded positive class used with illuminations ``f >= m``.  ``rho``
    bounds discrete C^{0,1} norms, ``(kappa, Lambda, beta)`` the Hoelder class
    of pairs with ``a >= kappa`` and ``q >= 0``.
    """

    mu: float = 1.0
    lam: float | None = None
    nonpositive: bool = False
    q_minus: float | None = None
    q_plus: float | None = None
    q_low: float | None = None
    q_high: float | None = None
    m: float | None = None
    rho: float | None = None
    kappa: float | None = None
    Lambda: float | None = None
    beta: float = 0.5

    def __post_init__(self):
        if self.mu < 1:
            raise ValueError("mu must be >= 1")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lam must be >= 0")
        if (self.q_minus is None) != (self.q_plus is None):
            raise ValueError("q_minus and q_plus go together")
        if self.q_minus is not None and not 0 < self.q_minus <= self.q_plus:
            raise ValueError("need 0 < q_minus <= q_plus")
        if (self.q_low is None) != (self.q_high is None):
            raise ValueError("q_low and q_high go together")
        if self.q_low is not None and not 0 < self.q_low < self.q_high:
            raise ValueError("need 0 < q_low < q_high")
        if self.m is not None and self.m <= 0:
            raise ValueError("m must be positive")
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be positive")
        if (self.kappa is None) != (self.Lambda is None):
            raise ValueError("kappa and Lambda go together")
        if self.kappa is not None and not 0 < self.kappa <= self.Lambda:
            raise ValueError("need 0 < kappa <= Lambda")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")

    def q_bounds(self) -> tuple[float, float]:
        lo, hi = -math.inf, math.inf
        if self.lam is not None:
            lo = max(lo, -self.lam)
        if self.nonpositive:
            hi = min(hi, 0.0)
        if self.q_minus is not None:
            lo, hi = max(lo, -self.q_plus), min(hi, -self.q_minus)
        if self.q_low is not None:
            lo, hi = max(lo, self.q_low), min(hi, self.q_high)
        if self.kappa is not None:
            lo = max(lo, 0.0)
        return lo, hi

    def a_bounds(self) -> tuple[float, float]:
        lo, hi = 1.0 / self.mu, self.mu
        if self.kappa is not None:
            lo, hi = max(lo, self.kappa), min(hi, self.Lambda)
        return lo, hi


@dataclass(frozen=True)
class CheckItem:
    name: str
    passed: bool
    value: float
    bound: float
    informational: bool = False


@dataclass(frozen=True)
class ValidationReport:
    items: tuple[CheckItem, ...]

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items if not it.informational)

    @property
    def failures(self) -> list[str]:
        return [it.name for it in self.items if not it.passed and not it.informational]

    def __str__(self):
        lines = []
        for it in self.items:
            tag = "info" if it.informational else ("pass" if it.passed else "FAIL")
            lines.append(f"  [{tag}] {it.name}: {it.value:.6g} vs {it.bound:.6g}")
        return "\n".join(lines)


def effective_parameters(a, q: ScalarField) -> tuple[float, float]:
    """Tightest (mu, lam) with a in A_mu and q >= -lam."""
    lo, hi = as_matrix_field(a).eigenvalues()
    emin, emax = float(lo.min()), float(hi.max())
    mu = math.inf if emin <= 0 else max(1.0, emax, 1.0 / emin)
    lam = max(0.0, -float(q.values.min()))
    return mu, lam


def in_coercive_union(a, q: ScalarField) -> tuple[bool, float, float]:
    """Membership of (a, q) in the union over admissible (mu, lam): returns (ok, mu*lam, lambda_1)."""
    mu, lam = effective_parameters(a, q)
    lam1 = first_dirichlet_eigenvalue(q.grid)
    prod = mu * lam if math.isfinite(mu) else math.inf
    return prod < lam1, prod, lam1


def validate(a, q: ScalarField, cls: AdmissibleClass) -> ValidationReport:
    a = as_matrix_field(a)
    if a.grid != q.grid:
        raise ValueError("a and q live on different grids")
    lo, hi = a.eigenvalues()
    emin, emax = float(lo.min()), float(hi.max())
    qmin, qmax = float(q.values.min()), float(q.values.max())
    eps = 1e-12
    items = [
        CheckItem("ellipticity_lower", emin >= 1.0 / cls.mu - eps, emin, 1.0 / cls.mu),
        CheckItem("ellipticity_upper", emax <= cls.mu + eps, emax, cls.mu),
    ]
    ok, prod, lam1 = in_coercive_union(a, q)
    items.append(CheckItem("coercive_mu_lambda", ok, prod, lam1))
    if cls.lam is not None:
        items.append(CheckItem("q_lower", qmin >= -cls.lam - eps, qmin, -cls.lam))
        items.append(CheckItem("class_mu_lambda_in_J", cls.mu * cls.lam < lam1,
                               cls.mu * cls.lam, lam1, informational=True))
    if cls.nonpositive:
        items.append(CheckItem("q_nonpositive", qmax <= eps, qmax, 0.0))
    if cls.q_minus is not None:
        items.append(CheckItem("q_class_lower", qmin >= -cls.q_plus - eps, qmin, -cls.q_plus))
        items.append(CheckItem("q_class_upper", qmax <= -cls.q_minus + eps, qmax, -cls.q_minus))
        items.append(CheckItem("q_plus_below_lambda1", cls.q_plus < lam1, cls.q_plus, lam1,
                               informational=True))
    if cls.q_low is not None:
        items.append(CheckItem("q_bold_lower", qmin >= cls.q_low - eps, qmin, cls.q_low))
        items.append(CheckItem("q_bold_upper", qmax <= cls.q_high + eps, qmax, cls.q_high))
        items.append(CheckItem("q_high_below_lambda1_over_mu", cls.q_high < lam1 / cls.mu,
                               cls.q_high, lam1 / cls.mu, informational=True))
    a_lip = max(norms.lipschitz_norm(ScalarField(a.grid, p)) for p in (a.a11, a.a12, a.a22))
    q_lip = norms.lipschitz_norm(q)
    if cls.rho is not None:
        items.append(CheckItem("a_c01", a_lip <= cls.rho + eps, a_lip, cls.rho))
        items.append(CheckItem("q_c01", q_lip <= cls.rho + eps, q_lip, cls.rho))
    else:
        items.append(CheckItem("a_c01", True, a_lip, math.inf, informational=True))
    if cls.kappa is not None:
        items.append(CheckItem("q_nonnegative", qmin >= -eps, qmin, 0.0))
        items.append(CheckItem("a_above_kappa", emin >= cls.kappa - eps, emin, cls.kappa))
        hn = holder_class_norm(a, q, cls.beta)
        items.append(CheckItem("c1beta_plus_c0beta", hn <= cls.Lambda + eps, hn, cls.Lambda))
    return ValidationReport(tuple(items))


def holder_class_norm(a, q: ScalarField, beta: float) -> float:
    """Discrete proxy for ``|a|_{C^{1,beta}} + |q|_{C^{0,beta}}`` (scalar a)."""
    a = as_matrix_field(a)
    return (norms.c1beta_norm(ScalarField(a.grid, a.a11), beta)
            + norms.holder_norm(q, beta))


# ---------------------------------------------------------------------------
# sampling


class ClampWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    """Truncated cosine/sine series with coefficients ``amp * g / (1 + k^2 + l^2)^p``."""

    seed: int = 0
    modes: int = 4
    amplitude: float = 0.1
    decay: float = 1.5
    clamp: tuple[float, float] | None = None
    basis: str = "cos"

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("need at least one mode")
        if self.decay <= 1:
            raise ValueError("decay exponent must exceed 1")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.basis not in ("cos", "sin"):
            raise ValueError("basis must be 'cos' or 'sin'")
        if self.clamp is not None and not self.clamp[0] <= self.clamp[1]:
            raise ValueError("clamp bounds out of order")


def series_coefficients(cfg: SamplerConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mode numbers (k, l) and their coefficients, deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    K = cfg.modes
    g = rng.standard_normal((K + 1, K + 1))
    k, l = np.meshgrid(np.arange(K + 1), np.arange(K + 1), indexing="ij")
    c = cfg.amplitude * g / (1.0 + k**2 + l**2) ** cfg.decay
    if cfg.basis == "sin":
        keep = (k >= 1) & (l >= 1)
    else:
        keep = (k + l) >= 1
    return k[keep], l[keep], c[keep]


def series_field(cfg: SamplerConfig, grid: Grid) -> np.ndarray:
    X, Y = grid.coords
    fx = np.cos if cfg.basis == "cos" else np.sin
    out = np.zeros(grid.shape)
    for k, l, c in zip(*series_coefficients(cfg)):
        out += c * fx(k * np.pi * X) * fx(l * np.pi * Y)
    return out


def series_lipschitz_bound(cfg: SamplerConfig) -> float:
    k, l, c = series_coefficients(cfg)
    return float(np.sum(np.abs(c) * np.pi * (k + l)))


def _clamp_sample(center, fluct, lo, hi, grid, accept):
    s = 1.0
    for _ in range(64):
        vals = np.clip(center + s * fluct, lo, hi)
        f = ScalarField(grid, vals)
        if accept(f):
            break
        s *= 0.5
    else:
        f = ScalarField.constant(grid, center)
    if np.ptp(fluct) > 0 and np.ptp(f.values) == 0:
        warnings.warn("clamping collapsed the sample to a constant", ClampWarning, stacklevel=3)
    return f


def sample_coefficient(cfg: SamplerConfig, cls: AdmissibleClass, grid: Grid, target: str = "q"):
    """Random admissible coefficient: ``center + series`` clamped into the class bounds.

    ``target='q'`` returns a ScalarField, ``target='a'`` an isotropic MatrixField.
    The fluctuation is halved until the class Lipschitz / Hoelder bounds hold, so
    the result always passes :func:`validate` for its own component.
    """
    if target == "q":
        lo, hi = cls.q_bounds()
    elif target == "a":
        lo, hi = cls.a_bounds()
    else:
        raise ValueError("target must be 'q' or 'a'")
    if cfg.clamp is not None:
        lo, hi = max(lo, cfg.clamp[0]), min(hi, cfg.clamp[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"no finite sampling interval for {target}: [{lo}, {hi}]")
    center = 0.5 * (lo + hi)
    fluct = series_field(cfg, grid)

    def accept(f):
        if cls.rho is not None and norms.lipschitz_norm(f) > cls.rho:
            return False
        if cls.kappa is not None:
            if target == "a":
                part = norms.c1beta_norm(f, cls.beta)
            else:
                part = norms.holder_norm(f, cls.beta)
            if part > cls.Lambda / 2:
                return False
        return True

    f = _clamp_sample(center, fluct, lo, hi, grid, accept)
    return f if target == "q" else MatrixField.isotropic(f)


def sample_anisotropic(cfg: SamplerConfig, cls: AdmissibleClass, grid: Grid, angle: float) -> MatrixField:
    """``R diag(d1, d2) R^T`` with seeded scalar d1, d2 in the class and a constant rotation."""
    d1 = sample_coefficient(cfg, cls, grid, "a").scalar()
    cfg2 = SamplerConfig(seed=cfg.seed + 1, modes=cfg.modes, amplitude=cfg.amplitude,
                         decay=cfg.decay, clamp=cfg.clamp, basis=cfg.basis)
    d2 = sample_coefficient(cfg2, cls, grid, "a").scalar()
    return MatrixField.rotated(d1, d2, angle)


# ---------------------------------------------------------------------------
# illuminations and manufactured solutions


@dataclass(frozen=True)
class Illumination:
    """Catalogue of Dirichlet data on the unit square.

    ``constant``: ``value``; ``linear``: ``alpha*x + beta*y + gamma``;
    ``x``: trace of x; ``bilinear``: ``(1+x)(1+y)``; ``cos_arclength``:
    ``value * cos(pi*(s - gamma))`` with s the counter-clockwise arclength from
    the origin (``gamma = 0.5`` moves the extrema from the corners to the side
    midpoints).
    """

    profile: str = "constant"
    value: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0

    def field(self, grid: Grid) -> ScalarField:
        X, Y = grid.coords
        p = self.profile
        if p == "constant":
            v = np.full(grid.shape, self.value)
        elif p == "linear":
            v = self.alpha * X + self.beta * Y + self.gamma
        elif p == "x":
            v = X.copy()
        elif p == "bilinear":
            v = (1 + X) * (1 + Y)
        elif p == "cos_arclength":
            v = self.value * np.cos(np.pi * (arclength(grid) - self.gamma))
        else:
            raise ValueError(f"unknown illumination profile {p!r}")
        return ScalarField(grid, v)

    def trace(self, grid: Grid) -> BoundaryTrace:
        return self.field(grid).trace()


def arclength(grid: Grid) -> np.ndarray:
    """Counter-clockwise boundary arclength from (0, 0); interior entries are meaningless."""
    X, Y = grid.coords
    s = np.zeros(grid.shape)
    bottom = np.isclose(Y, 0)
    right = np.isclose(X, 1) & ~bottom
    top = np.isclose(Y, 1) & ~right
    left = np.isclose(X, 0) & ~bottom & ~top
    s[bottom] = X[bottom]
    s[right] = 1 + Y[right]
    s[top] = 2 + (1 - X[top])
    s[left] = 3 + (1 - Y[left])
    return s


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    name: str
    a: MatrixField
    q: ScalarField
    f: BoundaryTrace
    u_exact: ScalarField
    params: dict = field(default_factory=dict)


def manufactured_case(name: str, grid: Grid, c: float = 1.0, alpha: float = 1.0,
                      beta: float = 0.0, gamma: float = 0.0) -> ManufacturedCase:
    """Exact solutions of ``-div(a grad u) + q u = 0`` with ``a = I``.

    ``exp``: q = c > 0, u = exp(sqrt(c) x); ``helmholtz``: q = -c, u = sin(sqrt(c) x);
    ``linear``: q = 0, u = alpha x + beta y + gamma.
    """
    a = MatrixField.identity(grid)
    if name == "exp":
        if c <= 0:
            raise ValueError("exp case needs c > 0")
        q = ScalarField.constant(grid, c)
        u = ScalarField.from_function(grid, lambda X, Y: np.exp(np.sqrt(c) * X))
        params = {"c": c}
    elif name == "helmholtz":
        if c <= 0:
            raise ValueError("helmholtz case needs c > 0")
        q = ScalarField.constant(grid, -c)
        u = ScalarField.from_function(grid, lambda X, Y: np.sin(np.sqrt(c) * X))
        params = {"c": c}
    elif name == "linear":
        q = ScalarField.constant(grid, 0.0)
        u = ScalarField.from_function(grid, lambda X, Y: alpha * X + beta * Y + gamma)
        params = {"alpha": alpha, "beta": beta, "gamma": gamma}
    else:
        raise ValueError(f"unknown manufactured case {name!r}")
    return ManufacturedCase(name, a, q, u.trace(), u, params)
