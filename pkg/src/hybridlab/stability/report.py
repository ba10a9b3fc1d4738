"""Experiment plans, reports and the shared log-log fit."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from ..admissibility import AdmissibleClass, Illumination, SamplerConfig
from ..internal_data import NoiseSpec

DOMAIN_NOTE = "domain: unit square (the theorems assume a C^3 boundary; corners are a known deviation)"


class PlanError(ValueError):
    """An experiment plan that cannot be run as specified."""


@dataclass(frozen=True)
class Criterion:
    """One pass/fail check with its threshold stored next to the measured value.

    ``comparison`` is one of ``<=``, ``>=``, ``<``, ``>``, ``in`` (closed
    interval given as ``(lo, hi)``) or ``finite``.  Soft criteria are reported
    but never fail a run.
    """

    name: str
    value: float
    threshold: float | tuple[float, float] | None
    comparison: str
    hard: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        v, t, c = self.value, self.threshold, self.comparison
        if c == "finite":
            return math.isfinite(v)
        if not math.isfinite(v):
            return False
        if c == "<=":
            return v <= t
        if c == ">=":
            return v >= t
        if c == "<":
            return v < t
        if c == ">":
            return v > t
        if c == "in":
            return t[0] <= v <= t[1]
        if c == "(]":
            return t[0] < v <= t[1]
        raise ValueError(f"unknown comparison {c!r}")

    def threshold_text(self) -> str:
        t = self.threshold
        if t is None:
            return ""
        if isinstance(t, tuple):
            return f"{_fmt(t[0])};{_fmt(t[1])}"
        return _fmt(t)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float
    ci_low: float
    ci_high: float
    points: int


def loglog_fit(x, y) -> LogLogFit:
    """Least-squares line through ``(log x, log y)`` with a 95% t-interval on the slope."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    lx, ly = np.log(x[ok]), np.log(y[ok])
    n = lx.size
    if n < 3:
        raise PlanError(f"need at least 3 valid ladder points for a fit, got {n}")
    res = stats.linregress(lx, ly)
    half = stats.t.ppf(0.975, n - 2) * res.stderr if n > 2 else math.inf
    return LogLogFit(float(res.slope), float(res.intercept), float(res.rvalue**2),
                     float(res.slope - half), float(res.slope + half), n)


@dataclass
class StabilityReport:
    kind: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    criteria: list[Criterion] = field(default_factory=list)
    summary: dict[str, float | str] = field(default_factory=dict)
    fingerprint: dict[str, str] = field(default_factory=dict)
    norm_labels: dict[str, str] = field(default_factory=dict)

    def add_row(self, values: dict) -> None:
        missing = set(self.columns) - set(values)
        if missing:
            raise KeyError(f"row lacks columns {sorted(missing)}")
        self.rows.append([values[c] for c in self.columns])

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def check(self, name, value, threshold, comparison, hard=True, note="") -> Criterion:
        c = Criterion(name, float(value), threshold, comparison, hard, note)
        self.criteria.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria if c.hard)

    def samples_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def criteria_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["criterion", "value", "comparison", "threshold", "hard", "passed", "note"])
        for c in self.criteria:
            w.writerow([c.name, _fmt(c.value), c.comparison, c.threshold_text(), int(c.hard),
                        int(c.passed), c.note])
        return buf.getvalue()

    def summary_text(self, timestamp: bool = True) -> str:
        lines = [f"experiment: {self.kind}", DOMAIN_NOTE]
        if timestamp:
            lines.append(f"generated: {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}")
        for k in sorted(self.fingerprint):
            lines.append(f"fingerprint.{k}: {self.fingerprint[k]}")
        for k in sorted(self.norm_labels):
            lines.append(f"norm.{k}: {self.norm_labels[k]}")
        for k, v in self.summary.items():
            lines.append(f"{k}: {_fmt(v)}")
        for c in self.criteria:
            tag = "PASS" if c.passed else ("FAIL" if c.hard else "soft-fail")
            lines.append(f"[{tag}] {c.name}: {_fmt(c.value)} {c.comparison} {c.threshold_text()}"
                         + (f"  ({c.note})" if c.note else ""))
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def body_digest(self) -> str:
        """Hash of everything except the timestamp line, for determinism checks."""
        h = hashlib.sha256()
        for part in (self.samples_csv(), self.criteria_csv(), self.summary_text(timestamp=False)):
            h.update(part.encode())
        return h.hexdigest()

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            f"{self.kind}_samples.csv": self.samples_csv(),
            f"{self.kind}_criteria.csv": self.criteria_csv(),
            f"{self.kind}_summary.txt": self.summary_text(),
        }
        paths = []
        for name, text in files.items():
            p = out / name
            tmp = p.with_suffix(p.suffix + ".tmp")
            tmp.write_text(text, encoding="utf-8")
            os.replace(tmp, p)
            paths.append(p)
        return paths


FIT_KINDS = {"lip_j1", "lip_j2", "hs1", "hs3"}


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to rerun one experiment bit-for-bit.

    The perturbation ladder is ``t_i = t0 * ratio**i`` for ``i < n_scales``.
    Kind-specific knobs live in ``options``.
    """

    kind: str
    n: int = 65
    samples: int = 10
    t0: float = 0.1
    ratio: float = 0.1
    n_scales: int = 4
    seed: int = 0
    cls: AdmissibleClass = field(default_factory=AdmissibleClass)
    illumination: Illumination = field(default_factory=Illumination)
    illumination2: Illumination | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    jobs: int = 1
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples < 1:
            raise PlanError("sample count must be at least 1")
        if self.n < 5:
            raise PlanError("grid needs at least 5 nodes per axis")
        if self.kind in FIT_KINDS and self.n_scales < 3:
            raise PlanError("exponent fits need at least 3 perturbation scales")
        if not (self.t0 > 0 and 0 < self.ratio < 1):
            raise PlanError("ladder needs t0 > 0 and 0 < ratio < 1")
        if self.jobs < 1:
            raise PlanError("jobs must be at least 1")

    @property
    def ladder(self) -> np.ndarray:
        return self.t0 * self.ratio ** np.arange(self.n_scales)

    def sampler_for(self, index: int, **overrides) -> SamplerConfig:
        kw = dict(seed=self.seed * 100_003 + self.sampler.seed + index, modes=self.sampler.modes,
                  amplitude=self.sampler.amplitude, decay=self.sampler.decay,
                  clamp=self.sampler.clamp, basis=self.sampler.basis)
        kw.update(overrides)
        return SamplerConfig(**kw)

    def base_fingerprint(self) -> dict[str, str]:
        return {"grid": f"{self.n}x{self.n}", "seed": str(self.seed), "samples": str(self.samples),
                "ladder": ";".join(repr(float(t)) for t in self.ladder),
                "illumination": self.illumination.profile}


def run_map(fn, items, jobs: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a process pool; order is always preserved."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
