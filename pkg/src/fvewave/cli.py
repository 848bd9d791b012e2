"""Command line interface: convergence studies, single runs, mesh info.

``study`` solves a built-in problem on a ladder of uniform meshes and
writes the error table (CSV) next to a log-log convergence figure;
``run`` solves once and can dump field snapshots; ``mesh-info`` prints
mesh statistics.  Studies can be configured by flags or by a flat
``key = value`` text file (flags win).
"""

import argparse
import math
import sys
import time
from pathlib import Path

from . import report as report_io
from .errors import NORMS, ConvergenceReport, LevelResult, h1_error, l2_error, \
    nodal_max_error
from .mesh import build_dual_mesh, build_uniform_triangulation, \
    quasi_uniformity_report, read_mesh_file
from .problems import BUILTIN_PROBLEMS
from .space import NodalField, full_values
from .stepper import discretize, estimate_stable_dt, run

_K_RULES = ("fixed", "proportional", "auto")
_T_RESIDUAL = 1e-12


class ConfigError(ValueError):
    """Invalid study configuration; messages include line numbers."""


class StudyConfig:
    """Settings of a convergence study.

    k_rule is one of fixed (use k), proportional (k = c * cell size) or
    auto (k derived from the stability estimate times safety).
    """

    __slots__ = ("problem", "levels", "k_rule", "k", "c", "safety", "final_time",
                 "norms", "output_dir", "deterministic", "figures")

    def __init__(self, problem="example1", levels=(4, 8, 16, 32),
                 k_rule="proportional", k=None, c=0.25, safety=0.9,
                 final_time=1.0, norms=NORMS, output_dir=Path("."),
                 deterministic=False, figures=True):
        self.problem = problem
        self.levels = tuple(int(n) for n in levels)
        self.k_rule = k_rule
        self.k = k
        self.c = c
        self.safety = safety
        self.final_time = final_time
        self.norms = tuple(norms)
        self.output_dir = Path(output_dir)
        self.deterministic = deterministic
        self.figures = figures

    def validated(self):
        if self.problem not in BUILTIN_PROBLEMS:
            known = ", ".join(sorted(BUILTIN_PROBLEMS))
            raise ConfigError(f"unknown problem {self.problem!r}; available: {known}")
        if not self.levels:
            raise ConfigError("levels must not be empty")
        if any(n < 1 for n in self.levels):
            raise ConfigError("levels must be positive integers")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError(f"levels must be strictly increasing, got {self.levels}")
        if self.k_rule not in _K_RULES:
            raise ConfigError(f"k_rule must be one of {', '.join(_K_RULES)}")
        if self.k_rule == "fixed" and (self.k is None or self.k <= 0.0):
            raise ConfigError("fixed k_rule needs a positive k")
        if self.c <= 0.0:
            raise ConfigError("proportionality constant c must be positive")
        if not 0.0 < self.safety <= 1.0:
            raise ConfigError("safety must lie in (0, 1]")
        if self.final_time <= 0.0:
            raise ConfigError("final_time must be positive")
        bad = [n for n in self.norms if n not in NORMS]
        if bad:
            raise ConfigError(f"unknown norms {bad}; available: {', '.join(NORMS)}")
        return self


_BOOL_VALUES = {"true": True, "yes": True, "1": True,
                "false": False, "no": False, "0": False}


def _parse_value(key, raw, lineno):
    def fail(expected):
        raise ConfigError(f"line {lineno}: {key} expects {expected}, got {raw!r}")

    if key == "problem":
        return raw
    if key == "levels":
        try:
            return tuple(int(tok) for tok in raw.replace(",", " ").split())
        except ValueError:
            fail("a comma separated list of integers")
    if key == "norms":
        return tuple(tok for tok in raw.replace(",", " ").split())
    if key == "k_rule":
        return raw
    if key in ("k", "c", "safety", "final_time"):
        try:
            return float(raw)
        except ValueError:
            fail("a number")
    if key == "output_dir":
        return Path(raw)
    if key in ("deterministic", "figures"):
        try:
            return _BOOL_VALUES[raw.lower()]
        except KeyError:
            fail("a boolean (true/false)")
    raise ConfigError(f"line {lineno}: unknown key {key!r}")


def parse_config(path=None, overrides=None):
    """Build a StudyConfig from defaults, an optional file and overrides."""
    settings = {}
    if path is not None:
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ConfigError(
                        f"line {lineno}: expected 'key = value', got {stripped!r}"
                    )
                key, _, raw = stripped.partition("=")
                key = key.strip()
                settings[key] = _parse_value(key, raw.strip(), lineno)
    if overrides:
        settings.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = StudyConfig(**settings)
    except TypeError:
        unknown = set(settings) - set(StudyConfig.__slots__)
        raise ConfigError(f"unknown keys {sorted(unknown)}") from None
    return config.validated()


def _resolve_grid(config, mesh, disc):
    """Time grid honoring the k rule; the final level must land on T exactly."""
    from .quadrature import TimeGrid

    T = config.final_time
    estimate = None
    if config.k_rule == "auto":
        estimate = estimate_stable_dt(disc.mass, disc.stiffness,
                                      safety=config.safety)
        steps = max(1, math.ceil(T / estimate.recommended_k))
        return TimeGrid(T / steps, steps), estimate
    if config.k_rule == "proportional":
        if mesh.cell_size is None:
            raise ConfigError("proportional k_rule needs a structured mesh")
        k = config.c * mesh.cell_size
    else:
        k = config.k
    steps = max(1, round(T / k))
    if abs(steps * k - T) > _T_RESIDUAL * max(1.0, T):
        raise ConfigError(
            f"time step {k} does not divide the final time {T} "
            f"(residual {abs(steps * k - T):.3e})"
        )
    return TimeGrid(k, steps), estimate


class StudyOutputs:
    __slots__ = ("csv_path", "figure_path")

    def __init__(self, csv_path, figure_path):
        self.csv_path = csv_path
        self.figure_path = figure_path


def run_study(config):
    """Solve on every level, measure errors at T, write table and figure."""
    config = config.validated()
    problem = BUILTIN_PROBLEMS[config.problem]()
    if problem.exact is None:
        raise ConfigError(f"problem {config.problem!r} has no exact solution")

    levels = []
    for n in config.levels:
        started = time.perf_counter()
        mesh = build_uniform_triangulation(n)
        disc = discretize(problem, mesh)
        grid, estimate = _resolve_grid(config, mesh, disc)
        result = run(disc, grid, safety=config.safety, stability=estimate)
        field = result.final_field
        T = grid.final_time
        errs = {}
        if "max" in config.norms:
            errs["err_max"] = nodal_max_error(disc.space, field, problem.exact, T)
        if "l2" in config.norms:
            errs["err_l2"] = l2_error(disc.space, field, problem.exact, T)
        if "h1" in config.norms:
            errs["err_h1"] = h1_error(disc.space, field, problem.exact,
                                      problem.exact_gradient, T)
        runtime = time.perf_counter() - started
        levels.append(LevelResult(n, mesh.h, grid.step,
                                  runtime_seconds=runtime, **errs))

    report = ConvergenceReport(config.problem, levels, config.norms)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = config.output_dir / f"{config.problem}_convergence.csv"
    report_io.write_study_csv(csv_path, report, deterministic=config.deterministic)
    figure_path = None
    if config.figures:
        figure_path = report_io.render_convergence_figure(
            config.output_dir / f"{config.problem}_convergence.png",
            report,
            title=f"{config.problem}: error at T = {config.final_time:g}",
        )
    return report, StudyOutputs(csv_path, figure_path)


def run_single(problem_name, n, k_rule="proportional", k=None, c=0.25, safety=0.9,
               final_time=1.0, snapshot_times=(), output_dir=Path("."),
               figures=True, allow_unstable=False):
    """One solve; writes snapshot grids (and figures) and returns a summary."""
    config = StudyConfig(problem=problem_name, levels=(n,), k_rule=k_rule, k=k,
                         c=c, safety=safety, final_time=final_time,
                         output_dir=Path(output_dir), figures=figures).validated()
    problem = BUILTIN_PROBLEMS[config.problem]()
    mesh = build_uniform_triangulation(n)
    disc = discretize(problem, mesh)
    grid, estimate = _resolve_grid(config, mesh, disc)

    T = grid.final_time
    steps = {}
    for t_req in snapshot_times:
        if t_req < -_T_RESIDUAL or t_req > T + _T_RESIDUAL:
            raise ConfigError(f"snapshot time {t_req} outside [0, {T}]")
        steps[int(round(t_req / grid.step))] = t_req

    result = run(disc, grid, safety=safety, snapshot_steps=tuple(steps),
                 allow_unstable=allow_unstable, stability=estimate)
    if result.stability is None:
        result.stability = estimate_stable_dt(disc.mass, disc.stiffness,
                                              k=grid.step, safety=safety)

    config.output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for step_index, t_req in sorted(steps.items()):
        values = full_values(disc.space, NodalField(result.snapshots[step_index]))
        stem = f"{problem_name}_n{n}_t{grid.time(step_index):g}"
        written.append(report_io.write_snapshot(
            config.output_dir / f"{stem}.txt", mesh, values))
        if config.figures:
            written.append(report_io.render_snapshot_figure(
                config.output_dir / f"{stem}.png", mesh, values,
                title=f"{problem_name}, t = {grid.time(step_index):g}"))

    stability = result.stability
    summary = {
        "problem": problem_name,
        "n": n,
        "h": mesh.h,
        "k": grid.step,
        "num_steps": grid.num_steps,
        "lambda_max": stability.lambda_max,
        "k_max": stability.k_max,
        "cfl_ratio": grid.step / stability.k_max,
        "outputs": [str(p) for p in written],
    }
    if problem.exact is not None:
        summary["err_max"] = nodal_max_error(disc.space, result.final_field,
                                             problem.exact, T)
    return summary


def mesh_info(n=None, mesh_file=None):
    """Statistics of a built-in or file mesh."""
    if (n is None) == (mesh_file is None):
        raise ConfigError("give exactly one of n or mesh_file")
    mesh = build_uniform_triangulation(n) if n is not None \
        else read_mesh_file(mesh_file)
    dual = build_dual_mesh(mesh)
    shape = quasi_uniformity_report(mesh, dual)
    return {
        "nodes": mesh.n_nodes,
        "triangles": mesh.n_triangles,
        "interior_nodes": mesh.n_interior,
        "h": mesh.h,
        "total_area": mesh.total_area,
        "triangle_area_min": shape.triangle_area_min,
        "triangle_area_max": shape.triangle_area_max,
        "control_volume_min": shape.interior_volume_min,
        "control_volume_max": shape.interior_volume_max,
    }


def _add_time_arguments(parser):
    parser.add_argument("--k-rule", choices=_K_RULES, default=None,
                        help="how the time step is chosen")
    parser.add_argument("--k", type=float, default=None,
                        help="time step for the fixed rule")
    parser.add_argument("--c", type=float, default=None,
                        help="step/cell ratio for the proportional rule")
    parser.add_argument("--safety", type=float, default=None,
                        help="safety factor for the auto rule")
    parser.add_argument("--final-time", type=float, default=None,
                        help="end of the integration interval")


def _print_report(report, out):
    header = f"{'n':>5} {'h':>12} {'k':>12}"
    for norm in report.norms:
        header += f" {'err_' + norm:>14} {'rate':>8}"
    print(header, file=out)
    for idx, lvl in enumerate(report.levels):
        row = f"{lvl.n:>5} {lvl.h:>12.6e} {lvl.k:>12.6e}"
        for norm in report.norms:
            rate = report.rates[norm][idx - 1] if idx > 0 else None
            rate_txt = f"{rate:8.3f}" if rate is not None else " " * 8
            row += f" {lvl.error(norm):>14.6e} {rate_txt}"
        print(row, file=out)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fvewave",
        description="Control volume solver for 2D linear waves with memory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    study = sub.add_parser("study", help="run a mesh refinement study")
    study.add_argument("--config", type=Path, default=None,
                       help="flat key = value settings file")
    study.add_argument("--problem", default=None,
                       choices=sorted(BUILTIN_PROBLEMS))
    study.add_argument("--levels", default=None,
                       help="comma separated mesh subdivisions, e.g. 4,8,16,32")
    _add_time_arguments(study)
    study.add_argument("--norms", default=None,
                       help="subset of max,l2,h1 to report")
    study.add_argument("--output-dir", type=Path, default=None)
    study.add_argument("--deterministic", action="store_true", default=None,
                       help="byte-identical CSV output (zeroes the runtime column)")
    study.add_argument("--figures", action=argparse.BooleanOptionalAction,
                       default=None, help="render the convergence figure")

    single = sub.add_parser("run", help="solve once on a fixed mesh")
    single.add_argument("--problem", required=True,
                        choices=sorted(BUILTIN_PROBLEMS))
    single.add_argument("--n", type=int, required=True,
                        help="subdivisions per side of the unit square")
    _add_time_arguments(single)
    single.add_argument("--snapshots", default="",
                        help="comma separated times to dump as x y value grids")
    single.add_argument("--output-dir", type=Path, default=Path("."))
    single.add_argument("--allow-unstable", action="store_true",
                        help="run even when the step exceeds the stable limit")
    single.add_argument("--figures", action=argparse.BooleanOptionalAction,
                        default=True)

    info = sub.add_parser("mesh-info", help="print mesh statistics")
    group = info.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=int, default=None)
    group.add_argument("--mesh-file", type=Path, default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "study":
            overrides = {
                "problem": args.problem,
                "levels": None if args.levels is None else tuple(
                    int(tok) for tok in args.levels.replace(",", " ").split()),
                "k_rule": args.k_rule,
                "k": args.k,
                "c": args.c,
                "safety": args.safety,
                "final_time": args.final_time,
                "norms": None if args.norms is None else tuple(
                    args.norms.replace(",", " ").split()),
                "output_dir": args.output_dir,
                "deterministic": args.deterministic,
                "figures": args.figures,
            }
            config = parse_config(args.config, overrides)
            report, outputs = run_study(config)
            _print_report(report, sys.stdout)
            print(f"table: {outputs.csv_path}")
            if outputs.figure_path is not None:
                print(f"figure: {outputs.figure_path}")
        elif args.command == "run":
            times = tuple(float(tok) for tok in
                          args.snapshots.replace(",", " ").split())
            kwargs = {}
            for name in ("k_rule", "k", "c", "safety"):
                if getattr(args, name) is not None:
                    kwargs[name] = getattr(args, name)
            if args.final_time is not None:
                kwargs["final_time"] = args.final_time
            summary = run_single(args.problem, args.n, snapshot_times=times,
                                 output_dir=args.output_dir, figures=args.figures,
                                 allow_unstable=args.allow_unstable, **kwargs)
            for key, value in summary.items():
                if key == "outputs":
                    for item in value:
                        print(f"wrote {item}")
                else:
                    print(f"{key}: {value}")
        else:
            for key, value in mesh_info(args.n, args.mesh_file).items():
                print(f"{key}: {value}")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
