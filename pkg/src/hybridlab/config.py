"""JSON run configuration, validated before any computation.

Unknown keys are rejected at every level.  The top-level ``seed`` can be
overridden with the ``HIF_SEED`` environment variable.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .admissibility import AdmissibleClass, Illumination, SamplerConfig
from .internal_data import NoiseSpec
from .reconstruction import ReconConfig

COMMANDS = ("solve", "synth", "reconstruct", "stability", "eig")


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class IlluminationCfg(_Strict):
    profile: Literal["constant", "linear", "x", "bilinear", "cos_arclength"] = "constant"
    value: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0

    def build(self) -> Illumination:
        return Illumination(**self.model_dump())


class ClassCfg(_Strict):
    mu: float = 1.0
    lam: Optional[float] = None
    nonpositive: bool = False
    q_minus: Optional[float] = None
    q_plus: Optional[float] = None
    q_low: Optional[float] = None
    q_high: Optional[float] = None
    m: Optional[float] = None
    rho: Optional[float] = None
    kappa: Optional[float] = None
    Lambda: Optional[float] = None
    beta: float = 0.5

    def build(self) -> AdmissibleClass:
        return AdmissibleClass(**self.model_dump())


class NoiseCfg(_Strict):
    model: Literal["none", "additive-gaussian", "relative-gaussian"] = "none"
    level: float = Field(0.0, ge=0)
    seed: int = 0

    def build(self) -> NoiseSpec:
        return NoiseSpec(**self.model_dump())


class SamplerCfg(_Strict):
    seed: int = 0
    modes: int = Field(4, ge=1)
    amplitude: float = Field(0.1, ge=0)
    decay: float = Field(1.5, gt=1)
    clamp: Optional[tuple[float, float]] = None
    basis: Literal["cos", "sin"] = "cos"

    def build(self) -> SamplerConfig:
        return SamplerConfig(**self.model_dump())


class ReconCfg(_Strict):
    tol: float = Field(1e-10, gt=0)
    max_iters: int = Field(200, ge=1)
    u_floor: float = Field(1e-8, gt=0)
    reg: float = Field(1e-6, ge=0)
    interior_margin: float = Field(0.15, gt=0, lt=0.5)
    solver_tol: float = Field(1e-12, gt=0)

    def build(self) -> ReconConfig:
        return ReconConfig(**self.model_dump())


class CaseCfg(_Strict):
    """Manufactured case from the catalogue."""

    name: Literal["linear", "exp", "helmholtz"]
    c: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0


class ProblemCfg(_Strict):
    """Coefficients and boundary data: a catalogue case, or field files plus an illumination."""

    case: Optional[CaseCfg] = None
    a: Optional[str] = None
    q: Optional[str] = None
    q_value: Optional[float] = None
    illumination: IlluminationCfg = IlluminationCfg()

    @model_validator(mode="after")
    def _one_q(self):
        if self.q is not None and self.q_value is not None:
            raise ValueError("give either q (file) or q_value, not both")
        if self.case is not None and any(v is not None for v in (self.a, self.q, self.q_value)):
            raise ValueError("a catalogue case fixes a and q; drop a/q/q_value")
        return self


class SolveCfg(_Strict):
    problem: ProblemCfg = ProblemCfg(case=CaseCfg(name="linear"))
    tol: float = Field(1e-12, gt=0)


class SynthCfg(_Strict):
    kind: Literal["qu", "qu2", "power", "raw_u"] = "qu"
    problem: ProblemCfg = ProblemCfg(case=CaseCfg(name="exp"))
    noise: NoiseCfg = NoiseCfg()


class ReconstructCfg(_Strict):
    method: Literal["qu", "qu2", "direct_q", "a_scalar", "two_loads"]
    problem: Optional[ProblemCfg] = None
    data: Optional[str] = None
    data2: Optional[str] = None
    a0: Optional[str] = None
    q_known: Optional[str] = None
    q_known_value: Optional[float] = None
    a_boundary: float = Field(1.0, gt=0)
    q_boundary: float = 1.0
    illumination2: Optional[IlluminationCfg] = None
    noise: NoiseCfg = NoiseCfg()
    recon: ReconCfg = ReconCfg()

    @model_validator(mode="after")
    def _source(self):
        if self.problem is None and self.data is None:
            raise ValueError("need either a problem to synthesize data from, or a data file")
        if self.method == "two_loads" and self.problem is None and self.data2 is None:
            raise ValueError("two_loads needs data2 (second internal solution) or a problem")
        return self


class PlanCfg(_Strict):
    kind: Literal["lip_j1", "lip_j2", "mt3", "hs1", "hs3", "glb", "pos", "interp", "vanish", "contract"]
    samples: Optional[int] = Field(None, ge=1)
    t0: Optional[float] = Field(None, gt=0)
    ratio: Optional[float] = Field(None, gt=0, lt=1)
    n_scales: Optional[int] = Field(None, ge=1)
    cls: Optional[ClassCfg] = Field(None, alias="class")
    illumination: Optional[IlluminationCfg] = None
    illumination2: Optional[IlluminationCfg] = None
    noise: Optional[NoiseCfg] = None
    sampler: Optional[SamplerCfg] = None
    options: dict = Field(default_factory=dict)

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class RunConfig(_Strict):
    command: Optional[Literal["solve", "synth", "reconstruct", "stability", "eig"]] = None
    n: int = Field(65, ge=3)
    seed: int = 0
    solve: Optional[SolveCfg] = None
    synth: Optional[SynthCfg] = None
    reconstruct: Optional[ReconstructCfg] = None
    stability: Optional[PlanCfg] = None

    @field_validator("n")
    @classmethod
    def _n(cls, v):
        if v > 4097:
            raise ValueError("grid larger than 4097 per axis is not supported")
        return v


def load_config(path: str | os.PathLike | None, command: str, env=None) -> RunConfig:
    """Read and validate a config; ``path=None`` gives the defaults for ``command``.

    Raises :class:`ConfigError` for schema problems and :class:`FileNotFoundError`
    when the config file itself is missing.
    """
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    if "HIF_SEED" in env and env["HIF_SEED"] != "":
        try:
            raw["seed"] = int(env["HIF_SEED"])
        except ValueError:
            raise ConfigError(f"HIF_SEED must be an integer, got {env['HIF_SEED']!r}") from None
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_summarize(exc)) from None
    if cfg.command is not None and cfg.command != command:
        raise ConfigError(f"config is for command {cfg.command!r}, not {command!r}")
    return cfg


def _summarize(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "invalid config: " + "; ".join(parts)
