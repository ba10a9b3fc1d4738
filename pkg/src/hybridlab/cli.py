"""Command-line front end: ``hybridlab {solve,synth,reconstruct,stability,eig}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import hif, norms
from .admissibility import (Illumination, discrete_eigenvalue_closed_form, first_dirichlet_eigenvalue,
                            manufactured_case)
from .config import ConfigError, ProblemCfg, RunConfig, SolveCfg, SynthCfg, load_config
from .fields import Grid, MatrixField, ScalarField, as_matrix_field
from .internal_data import DataKind, FloorViolation, NoiseSpec, add_noise, synthesize
from .linalg import SolverError
from .reconstruction import (ReconstructionError, recover_a_scalar, recover_aq_two_loads, recover_q_direct,
                             recover_q_power)
from .solver import assemble, solve
from .stability import EXPERIMENTS, PlanError, default_plan, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER, EXIT_RECON, EXIT_STABILITY = 0, 2, 3, 4, 5, 6

SOLVE_COLUMNS = ["command", "n", "case", "iterations", "residual", "error_linf", "fingerprint"]
SYNTH_COLUMNS = ["kind", "n", "noise_model", "noise_level", "noise_seed", "H_min", "H_max", "H_l2"]
RECON_COLUMNS = ["method", "n", "success", "reason", "iterations", "refit_residual", "rho_hat",
                 "q_error_linf", "a_error_linf", "a_error_linf_omega", "q_error_linf_omega", "flags"]

_EPILOGS = {
    "solve": "writes u.hif and solve.csv with columns: " + ",".join(SOLVE_COLUMNS)
             + ". Wall time goes to run.log.",
    "synth": "writes H.hif and synth.csv with columns: " + ",".join(SYNTH_COLUMNS),
    "reconstruct": "methods: qu, qu2, direct_q, a_scalar, two_loads. Writes the recovered fields "
                   "(q.hif / a.hif) and reconstruct.csv with columns: " + ",".join(RECON_COLUMNS)
                   + ". Failures print a JSON object with a 'reason' to stderr and exit 5.",
    "stability": "kinds: " + ", ".join(EXPERIMENTS) + ". Writes <kind>_samples.csv (columns depend "
                 "on the kind and are listed in its header), <kind>_criteria.csv (criterion,value,"
                 "comparison,threshold,hard,passed,note) and <kind>_summary.txt. Exits 6 when a hard "
                 "criterion fails.",
    "eig": "prints 'n,lambda1,closed_form' for the discrete Dirichlet Laplacian.",
}

EXIT_HELP = "exit codes: 0 success, 2 config, 3 I/O, 4 solver, 5 reconstruction, 6 stability criterion"


class InputError(OSError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _check_inputs(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise InputError(f"input file not found: {p}")


def _read_scalar(path, grid: Grid) -> ScalarField:
    f = hif.read_field(path)
    if not isinstance(f, ScalarField):
        raise ConfigError(f"{path}: expected a scalar field")
    if f.grid != grid:
        raise ConfigError(f"{path}: grid {f.grid.nx}x{f.grid.ny} does not match n = {grid.nx}")
    return f


def _read_diffusion(path, grid: Grid) -> MatrixField:
    f = hif.read_field(path)
    if f.grid != grid:
        raise ConfigError(f"{path}: grid {f.grid.nx}x{f.grid.ny} does not match n = {grid.nx}")
    return as_matrix_field(f)


@dataclasses.dataclass
class Problem:
    a: MatrixField
    q: ScalarField | None
    illumination: Illumination | None
    f: object
    exact: ScalarField | None = None
    case: str = ""


def _problem_paths(p: ProblemCfg | None):
    return () if p is None else (p.a, p.q)


def _build_problem(p: ProblemCfg, grid: Grid) -> Problem:
    if p.case is not None:
        c = manufactured_case(p.case.name, grid, c=p.case.c, alpha=p.case.alpha, beta=p.case.beta,
                              gamma=p.case.gamma)
        return Problem(c.a, c.q, None, c.f, c.u_exact, p.case.name)
    a = _read_diffusion(p.a, grid) if p.a else MatrixField.identity(grid)
    if p.q:
        q = _read_scalar(p.q, grid)
    elif p.q_value is not None:
        q = ScalarField.constant(grid, p.q_value)
    else:
        q = None
    ill = p.illumination.build()
    return Problem(a, q, ill, ill.trace(grid), None, "files" if (p.a or p.q) else "")


def _write_outputs(out: Path, fields: dict, texts: dict, figures: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, field in fields.items():
        hif.write_field(field, out / f"{name}.hif")
    for name, text in texts.items():
        tmp = out / f"{name}.tmp"
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(out / name)
    if figures:
        from .plotting import plot_field

        for name, field in fields.items():
            if isinstance(field, ScalarField):
                plot_field(field, out / f"{name}.png", title=name)


def _log_run(out: Path, command: str, wall: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    with open(out / "run.log", "a", encoding="utf-8") as fh:
        fh.write(f"{stamp} {command} wall_time={wall:.3f}s\n")


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig, args) -> int:
    sc = cfg.solve or SolveCfg()
    _check_inputs(*_problem_paths(sc.problem))
    grid = Grid.square(cfg.n)
    prob = _build_problem(sc.problem, grid)
    q = prob.q if prob.q is not None else ScalarField.constant(grid, 0.0)
    t0 = time.perf_counter()
    u, stats = solve(prob.a, q, prob.f, tol=sc.tol, force=args.force)
    wall = time.perf_counter() - t0
    err = norms.linf(u - prob.exact) if prob.exact is not None else None
    row = {"command": "solve", "n": cfg.n, "case": prob.case, "iterations": stats.iterations,
           "residual": float(stats.residual), "error_linf": err,
           "fingerprint": assemble(prob.a, q, prob.f).fingerprint}
    out = Path(args.out)
    _write_outputs(out, {"u": u}, {"solve.csv": _csv_text(SOLVE_COLUMNS, [row])}, args.figures)
    _log_run(out, "solve", wall)
    return EXIT_OK


def cmd_synth(cfg: RunConfig, args) -> int:
    sc = cfg.synth or SynthCfg()
    _check_inputs(*_problem_paths(sc.problem))
    grid = Grid.square(cfg.n)
    prob = _build_problem(sc.problem, grid)
    q = prob.q if prob.q is not None else ScalarField.constant(grid, 0.0)
    t0 = time.perf_counter()
    u, _ = solve(prob.a, q, prob.f, tol=1e-12, force=args.force)
    H = synthesize(DataKind(sc.kind), prob.a, q, u)
    noise = _seeded_noise(sc.noise.build(), cfg.seed)
    H = add_noise(H, noise)
    row = {"kind": sc.kind, "n": cfg.n, "noise_model": noise.model, "noise_level": noise.level,
           "noise_seed": noise.seed, "H_min": float(H.values.min()), "H_max": float(H.values.max()),
           "H_l2": norms.l2(H)}
    out = Path(args.out)
    _write_outputs(out, {"H": H}, {"synth.csv": _csv_text(SYNTH_COLUMNS, [row])}, args.figures)
    _log_run(out, "synth", time.perf_counter() - t0)
    return EXIT_OK


def _seeded_noise(spec: NoiseSpec, seed: int) -> NoiseSpec:
    return NoiseSpec(spec.model, spec.level, seed * 1_000_003 + spec.seed)


def cmd_reconstruct(cfg: RunConfig, args) -> int:
    rc = cfg.reconstruct
    if rc is None:
        raise ConfigError("reconstruct needs a 'reconstruct' section with at least 'method'")
    _check_inputs(*_problem_paths(rc.problem), rc.data, rc.data2, rc.a0, rc.q_known)
    grid = Grid.square(cfg.n)
    prob = _build_problem(rc.problem, grid) if rc.problem is not None else None
    recon = rc.recon.build()
    noise = _seeded_noise(rc.noise.build(), cfg.seed)
    t0 = time.perf_counter()

    a0 = _read_diffusion(rc.a0, grid) if rc.a0 else (prob.a if prob else MatrixField.identity(grid))
    f = prob.f if prob else Illumination().trace(grid)
    q_true = prob.q if prob else None
    a_true = prob.a.scalar() if prob and prob.a.is_scalar else None

    def forward(kind: DataKind, f_trace=None) -> ScalarField:
        if prob is None or prob.q is None:
            raise ConfigError("synthesizing data needs a problem with a potential (q or q_value)")
        u, _ = solve(prob.a, prob.q, f if f_trace is None else f_trace, tol=recon.solver_tol,
                     force=args.force)
        return add_noise(synthesize(kind, prob.a, prob.q, u), noise)

    row = {"method": rc.method, "n": cfg.n}
    fields = {}
    if rc.method in ("qu", "qu2"):
        H = _read_scalar(rc.data, grid) if rc.data else forward(DataKind(rc.method))
        res = recover_q_power(H, a0, f, 1 if rc.method == "qu" else 2, recon)
        fields["q"] = res.q
    elif rc.method == "direct_q":
        u = _read_scalar(rc.data, grid) if rc.data else forward(DataKind.RAW_U)
        res = recover_q_direct(u, recon)
        fields["q"] = res.q
    elif rc.method == "a_scalar":
        u = _read_scalar(rc.data, grid) if rc.data else forward(DataKind.RAW_U)
        if rc.q_known:
            qk = _read_scalar(rc.q_known, grid)
        elif rc.q_known_value is not None:
            qk = ScalarField.constant(grid, rc.q_known_value)
        elif q_true is not None:
            qk = q_true
        else:
            raise ConfigError("a_scalar needs q_known, q_known_value or a problem potential")
        ab = a_true.trace() if a_true is not None else rc.a_boundary
        res = recover_a_scalar(u, qk, ab, recon, a_true=a_true)
        fields["a"] = res.a
    else:
        f2 = (rc.illumination2.build() if rc.illumination2 else
              Illumination("linear", alpha=1.0, beta=0.0, gamma=1.0)).trace(grid)
        u1 = _read_scalar(rc.data, grid) if rc.data else forward(DataKind.RAW_U)
        u2 = _read_scalar(rc.data2, grid) if rc.data2 else forward(DataKind.RAW_U, f2)
        ab = a_true.trace() if a_true is not None else rc.a_boundary
        qb = q_true.trace() if q_true is not None else rc.q_boundary
        res = recover_aq_two_loads(u1, u2, ab, qb, recon, a_true=a_true, q_true=q_true)
        fields["a"], fields["q"] = res.a, res.q

    row.update(success=res.success, reason=res.reason or "", iterations=res.iterations,
               refit_residual=res.refit_residual, rho_hat=res.rho_hat, flags=";".join(res.flags))
    if "q" in fields and q_true is not None:
        row["q_error_linf"] = norms.linf(fields["q"] - q_true, grid.interior_mask)
    if "a" in fields and a_true is not None:
        row["a_error_linf"] = norms.linf(fields["a"] - a_true, grid.interior_mask)
    row["a_error_linf_omega"] = res.metrics.get("error_linf_omega", res.metrics.get("a_error_linf_omega"))
    row["q_error_linf_omega"] = res.metrics.get("q_error_linf_omega")
    out = Path(args.out)
    _write_outputs(out, fields, {"reconstruct.csv": _csv_text(RECON_COLUMNS, [row])}, args.figures)
    _log_run(out, "reconstruct", time.perf_counter() - t0)
    if not res.success:
        _reason_json("reconstruction", res.reason or "failed", "reconstruction did not succeed")
        return EXIT_RECON
    return EXIT_OK


def _plan_from_config(cfg: RunConfig, jobs: int):
    pc = cfg.stability
    if pc is None:
        raise ConfigError("stability needs a 'stability' section with at least 'kind'")
    over = {"n": cfg.n, "seed": cfg.seed, "jobs": jobs}
    for name in ("samples", "t0", "ratio", "n_scales"):
        v = getattr(pc, name)
        if v is not None:
            over[name] = v
    if pc.cls is not None:
        over["cls"] = pc.cls.build()
    if pc.illumination is not None:
        over["illumination"] = pc.illumination.build()
    if pc.illumination2 is not None:
        over["illumination2"] = pc.illumination2.build()
    if pc.noise is not None:
        over["noise"] = pc.noise.build()
    if pc.sampler is not None:
        over["sampler"] = pc.sampler.build()
    if pc.options:
        over["options"] = dict(pc.options)
    return default_plan(pc.kind, **over)


def cmd_stability(cfg: RunConfig, args) -> int:
    plan = _plan_from_config(cfg, args.jobs)
    t0 = time.perf_counter()
    report = run_experiment(plan)
    out = Path(args.out)
    report.write(out)
    if args.figures:
        from .plotting import plot_report

        plot_report(report, out)
    _log_run(out, f"stability:{plan.kind}", time.perf_counter() - t0)
    for c in report.criteria:
        tag = "PASS" if c.passed else ("FAIL" if c.hard else "soft-fail")
        print(f"[{tag}] {plan.kind}.{c.name} = {c.value!r} ({c.comparison} {c.threshold_text()})")
    return EXIT_OK if report.passed else EXIT_STABILITY


def cmd_eig(cfg: RunConfig, args) -> int:
    if cfg.n < 5:
        raise ConfigError(f"eigenvalue estimate needs at least 5 nodes per axis, got {cfg.n}")
    grid = Grid.square(cfg.n)
    lam = first_dirichlet_eigenvalue(grid)
    print("n,lambda1,closed_form")
    print(f"{cfg.n},{lam!r},{discrete_eigenvalue_closed_form(grid)!r}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "synth": cmd_synth, "reconstruct": cmd_reconstruct,
            "stability": cmd_stability, "eig": cmd_eig}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults are used when omitted)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for stability samples")
    common.add_argument("--out", default="hybridlab-out", help="output directory (default: %(default)s)")
    common.add_argument("--force", action="store_true", help="skip the admissibility pre-checks")
    common.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
    parser = argparse.ArgumentParser(
        prog="hybridlab",
        description="Forward solves, internal data, coefficient recovery and stability experiments "
                    "for -div(a grad u) + q u = 0 on the unit square.",
        epilog=EXIT_HELP + ". HIF_SEED overrides the config seed.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=_EPILOGS[name].split(".")[0],
                       epilog=_EPILOGS[name] + " " + EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def _reason_json(kind: str, reason: str, message: str) -> None:
    print(json.dumps({"error": kind, "reason": reason, "message": message}), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.command)
        return COMMANDS[args.command](cfg, args)
    except (ReconstructionError, FloorViolation) as exc:
        _reason_json("reconstruction", exc.reason, str(exc))
        return EXIT_RECON
    except hif.HIFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, PlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
