"""Command-line runner: ``triplewell {spectrum,entropy,project,classical,compare}``.

Settings come from an optional INI file (``--config``), then from the chosen
recipe, then from explicit flags. Exit status is 0 on success, 2 for bad
configuration or selection, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, classical, compare, io, poincare, projections, spectra
from .config import ConfigError, ExperimentConfig, load_config

log = logging.getLogger("triplewell")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# classical recipes: name -> (model overrides, task overrides)
RECIPES = {
    "rho2-zero": ({"epsilon": 1.5}, {"t_final": 100.0}),
    "rotation": ({"epsilon": 1.5}, {"t_final": 100.0}),
    "integrable-section": ({"epsilon": 0.0}, {"seeds": 460, "t_short": 100.0}),
    "mixed-section": ({"epsilon": 0.7}, {"seeds": 513, "t_short": 100.0}),
    "chaotic-section": ({"epsilon": 1.5}, {"t_final": 1.0e4}),
    "microcanonical": ({"epsilon": 1.5, "N": 180}, {"width": 0.02, "t_final": 1.0e4, "bins": 200}),
}

NUMERIC_ERRORS = (
    spectra.EigensolverError,
    classical.IntegrationError,
    poincare.UndersampledError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class Run:
    """Resolved configuration plus output helpers shared by the subcommands."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.hash = cfg.hash()
        self.out = Path(cfg.output.out)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "config.ini").write_text(cfg.to_ini())

    @property
    def params(self) -> spectra.ModelParams:
        return self.cfg.model

    @property
    def task(self):
        return self.cfg.task

    def path(self, name: str) -> Path:
        return self.out / name

    def eigensystem(self, *, margin: float | None = None) -> spectra.EigenSystem:
        kw = {}
        if margin:
            kw["energy_window"] = (self.task.target - margin, self.task.target + margin)
        return spectra.cached_solve(self.params, self.cfg.output.cache_dir, **kw)

    def plot(self, fn, *args, **kwargs) -> None:
        if not self.cfg.output.plot:
            return
        from . import plots

        getattr(plots, fn)(*args, **kwargs)


# -- subcommands --------------------------------------------------------------------

def cmd_spectrum(run: Run) -> dict:
    es = run.eigensystem()
    io.write_energies(run.path("energies.csv"), es, run.hash)
    summary = {"N": es.N, "D": es.basis.dim, "levels": len(es)}
    if len(es) >= 150:
        r = spectra.spacing_ratio(es, spectra.middle_third(len(es)))
        summary["spacing_ratio_middle_third"] = r._asdict()
    if run.params.epsilon == 0 and es.vectors is not None:
        labels = np.rint(spectra.q_labels(es) * es.N).astype(int)
        values, counts = np.unique(labels, return_counts=True)
        summary["q_census"] = {str(v): int(c) for v, c in zip(values, counts)}
    io.write_json(run.path("spectrum.json"), summary, run.hash)
    run.plot("energies", run.path("energies.png"), es)
    return summary


def cmd_entropy(run: Run) -> dict:
    es = run.eigensystem()
    prof = spectra.shannon_profile(es, run.task.entropy_window)
    io.write_entropy(run.path("entropy.csv"), prof, run.hash)
    E = prof.scaled_energies
    slope = spectra.smoothed_slope(E, prof.smooth_upper, prof.window)
    summary = {
        "window": prof.window,
        "argmax_smooth_total": float(E[np.argmax(prof.smooth_total)]),
        "argmax_smooth_upper": float(E[np.argmax(prof.smooth_upper)]),
        "argmax_abs_slope_upper": float(E[np.argmax(np.abs(slope))]),
    }
    io.write_json(run.path("entropy.json"), summary, run.hash)
    run.plot("entropy", run.path("entropy.png"), prof)
    return summary


def _select_index(run: Run, es: spectra.EigenSystem) -> int:
    if run.task.index >= 0:
        if not es.is_complete:
            raise ConfigError("selection by index needs the full spectrum (set subset_margin = 0)")
        if run.task.index >= len(es):
            raise ConfigError(f"eigenstate index {run.task.index} outside 0..{len(es) - 1}")
        return run.task.index
    return int(spectra.select_near(es, run.task.target, 1)[0])


def cmd_project(run: Run) -> dict:
    """One eigenstate (by index or nearest target), a microcanonical average (width/count) or top components."""
    t = run.task
    es = run.eigensystem(margin=t.subset_margin or None)
    power = t.power or None
    if t.top:
        idx = spectra.select_near(es, t.target, t.count or 200)
        pts = projections.top_components(es, idx, t.per_state)
        io.write_csv(run.path("top_components.csv"), ("n1", "n3"), pts, run.hash)
        hist = compare.points_histogram(pts, t.bins)
        io.write_histogram(run.path("top_components_hist"), hist, run.hash, states=len(idx), per_state=t.per_state)
        run.plot("points", run.path("top_components.png"), pts)
        return {"states": len(idx), "points": len(pts)}
    if t.width or t.count:
        grid = projections.microcanonical_average(
            es, t.target, width=t.width or None, count=None if t.width else t.count, smoothed=t.husimi
        )
        stem = "microcanonical_husimi" if t.husimi else "microcanonical"
    else:
        k = _select_index(run, es)
        if t.husimi and t.phase_points:
            grid = projections.husimi_projection_quadrature(es, k, t.phase_points)
        elif t.husimi:
            grid = projections.husimi_projection_closed(es, k)
        else:
            grid = projections.fock_projection(es, k)
        if es.first_index is not None:
            grid.meta["global_index"] = es.first_index + k
        stem = f"{'husimi' if t.husimi else 'fock'}_E{es.scaled_energies[k]:+.6f}"
    io.write_grid(run.path(stem), grid, run.hash, **run.cfg.to_dict()["model"])
    if power:
        io.write_grid(run.path(stem + f"_pow{power:g}"), projections.raise_power(grid, power), run.hash)
    run.plot("grid", run.path(stem + ".png"), grid, power)
    return {"grid": stem, "sum": grid.total(), **{k: v for k, v in grid.meta.items() if k != "indices"}}


def _initial_state(params: spectra.ModelParams, E: float, phi12: float = 0.0, phi32: float = 0.0) -> np.ndarray:
    """Start on the n2 = 0 manifold when it meets the energy shell, else on the section phi32 = 0."""
    try:
        view = classical.solve_rho2_zero(params, E).at(phi12, phi32)
    except ValueError:
        view = poincare.section_seeds(params, E, 1)[0]
    return np.asarray(classical.cartesian_from_angles(view))


def _integrate(run: Run, y0, t_final: float) -> classical.Trajectory:
    tol = run.task.tolerance
    traj = classical.integrate(y0, run.params, t_final, run.task.sample_dt, atol=tol, rtol=tol)
    log.info("integrated to t=%g in %d steps, energy drift %.2e", t_final, traj.steps, traj.energy_drift)
    return traj


def _stride(run: Run, traj: classical.Trajectory) -> int:
    # long runs are exported at a coarser cadence; sections always use the full sampling
    return max(1, len(traj) // 100_000)


def cmd_classical(run: Run) -> dict:
    t, p = run.task, run.params
    recipe = t.recipe
    summary: dict = {"recipe": recipe or "default"}
    points = classical.find_critical_points(p)
    io.write_critical_points(run.path("critical_points.json"), points, run.hash)
    summary["critical_points"] = len(points)

    if recipe == "rho2-zero":
        locus = classical.solve_rho2_zero(p, t.target)
        summary["rho2_zero"] = {"n1": locus.n1, "n3": locus.n3}
        for j in range(6):
            dphi = j * math.pi / 4
            traj = _integrate(run, np.asarray(classical.cartesian_from_angles(locus.at(0.0, dphi))), t.t_final)
            io.write_trajectory(run.path(f"trajectory_dphi{j}.csv"), traj, run.hash, _stride(run, traj))
        return summary

    if recipe == "rotation":
        # the orbit is chaotic, so both runs use extended precision to keep rounding out of the comparison
        theta = math.pi / 4
        y0 = _initial_state(p, t.target)
        a = classical.integrate(y0, p, t.t_final, t.sample_dt, method="taylor-mp")
        b = classical.integrate(y0, p, t.t_final, t.sample_dt, method="taylor-mp", rotate_by=theta)
        io.write_trajectory(run.path("trajectory_a.csv"), a, run.hash, _stride(run, a))
        io.write_trajectory(run.path("trajectory_b.csv"), b, run.hash, _stride(run, b))
        summary["theta"] = theta
        summary["max_population_difference"] = float(np.max(np.abs(a.populations() - b.populations())))
        summary["max_rotated_state_difference"] = float(np.max(np.abs(classical.rotate(a.states, theta) - b.states)))
        io.write_json(run.path("rotation.json"), summary, run.hash)
        return summary

    if recipe in ("integrable-section", "mixed-section"):
        ens = poincare.ensemble_section(p, t.target, t.seeds, t.t_short, t.phi_section, direction=t.direction, sample_dt=t.sample_dt)
        io.write_sections(run.path("section.csv"), ens.events, run.hash)
        summary.update(seeds=len(ens.seeds), events=len(ens.events), failures=ens.failures)
        io.write_json(run.path("section.json"), summary, run.hash)
        run.plot("section", run.path("section.png"), ens.events)
        return summary

    traj = _integrate(run, _initial_state(p, t.target), t.t_final)
    io.write_trajectory(run.path("trajectory.csv"), traj, run.hash, _stride(run, traj))
    summary.update(energy_drift=traj.energy_drift, norm_drift=traj.norm_drift, q_drift=traj.q_drift)
    phis = (0.0, math.pi) if recipe == "chaotic-section" else (t.phi_section,)
    for phi in phis:
        events, dropped = poincare.section(traj, phi, t.direction, report=True)
        name = f"section_phi{'pi' if phi == math.pi else f'{phi:g}'}"
        io.write_sections(run.path(name + ".csv"), events, run.hash)
        summary[name] = {"events": len(events), "dropped": dropped}
        run.plot("section", run.path(name + ".png"), events)
    hist = poincare.visitation(traj, t.bins)
    io.write_histogram(run.path("visitation"), hist, run.hash, t_final=t.t_final, sample_dt=t.sample_dt, **dataclasses.asdict(p))
    run.plot("histogram", run.path("visitation.png"), hist)

    if recipe == "microcanonical":
        es = run.eigensystem(margin=t.width)
        grid = projections.microcanonical_average(es, t.target, width=t.width)
        io.write_grid(run.path("microcanonical"), grid, run.hash)
        corr = compare.correspond(grid, hist)
        summary["states"] = grid.meta["count"]
        summary["compare"] = corr.as_record()
        run.plot("grid", run.path("microcanonical.png"), grid, t.power or None)
    io.write_json(run.path("classical.json"), summary, run.hash)
    return summary


def _load_density(path: str):
    values, meta = io.read_density(path)
    if "bins" in meta:
        counts = np.rint(values).astype(np.int64)
        return poincare.VisitationHistogram(int(meta["bins"]), counts, int(meta.get("samples", counts.sum())))
    if "N" in meta:
        return projections.ProbabilityGrid(int(meta["N"]), values, meta)
    return values


def cmd_compare(run: Run, a: str | None = None, b: str | None = None) -> dict:
    if (a is None) != (b is None):
        raise ConfigError("give both --a and --b, or neither")
    if a is None:
        summary = cmd_classical(_with_recipe(run, "microcanonical"))
        report = summary["compare"]
    else:
        da, db = _load_density(a), _load_density(b)
        # lattice grids follow the other input's binning; two grids use the task bin count
        both_grids = isinstance(da, projections.ProbabilityGrid) and isinstance(db, projections.ProbabilityGrid)
        report = compare.correspond(da, db, run.task.bins if both_grids else None).as_record()
        report.update(a=str(a), b=str(b))
    io.write_json(run.path("compare.json"), report, run.hash)
    return report


def _with_recipe(run: Run, name: str) -> Run:
    if run.task.recipe == name:
        return run
    cfg = run.cfg.with_overrides("task", recipe=name)
    return Run(apply_recipe(cfg, name))


def apply_recipe(cfg: ExperimentConfig, name: str) -> ExperimentConfig:
    if not name:
        return cfg
    if name not in RECIPES:
        raise ConfigError(f"unknown recipe {name!r}; choose from {', '.join(sorted(RECIPES))}")
    model, task = RECIPES[name]
    return cfg.with_overrides("model", **model).with_overrides("task", recipe=name, **task)


# -- argument handling ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--config", help="INI file with [model], [task] and [output] sections")
    g.add_argument("--out", help="output directory")
    g.add_argument("--cache", help="eigen-system cache directory (default <out>/cache)")
    g.add_argument("--threads", type=int, help="limit BLAS/LAPACK threads")
    g.add_argument("--verbose", "-v", action="store_true")
    g.add_argument("--plot", action="store_true", default=None, help="also write PNG figures (needs matplotlib)")
    m = common.add_argument_group("model")
    m.add_argument("--N", type=int)
    m.add_argument("--U", type=float)
    m.add_argument("--J", type=float)
    m.add_argument("--epsilon", type=float)
    t = common.add_argument_group("task")
    t.add_argument("--recipe")
    t.add_argument("--target", type=float, help="scaled energy E/N")
    t.add_argument("--width", type=float, help="energy window in E/N")
    t.add_argument("--count", type=int, help="number of eigenstates")
    t.add_argument("--index", type=int, help="eigenstate index")
    t.add_argument("--entropy-window", type=int)
    t.add_argument("--t-final", type=float)
    t.add_argument("--t-short", type=float)
    t.add_argument("--sample-dt", type=float)
    t.add_argument("--seeds", type=int)
    t.add_argument("--bins", type=int)
    t.add_argument("--phi-section", type=float)
    t.add_argument("--direction", choices=("both", "positive", "negative"))
    t.add_argument("--phase-points", type=int, help="use trapezoid quadrature with this many points per phase")
    t.add_argument("--husimi", action="store_true", default=None, help="Husimi instead of Fock projection")
    t.add_argument("--top", action="store_true", default=None, help="export the largest components of the states nearest the target")
    t.add_argument("--subset-margin", type=float, help="diagonalise only levels with |E/N - target| <= margin")
    t.add_argument("--power", type=float, help="extra export with values raised to this power")
    t.add_argument("--per-state", type=int)
    t.add_argument("--tolerance", type=float)

    parser = argparse.ArgumentParser(prog="triplewell", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("spectrum", "diagonalise and export energies"),
        ("entropy", "Shannon entropy profile of all eigenstates"),
        ("project", "Fock or Husimi projections of eigenstates"),
        ("classical", "trajectories, critical points, sections and histograms"),
        ("compare", "correlate a quantum grid with a classical histogram"),
    ):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        if name == "compare":
            sp.add_argument("--a", help="matrix file (grid or histogram) with JSON sidecar")
            sp.add_argument("--b", help="matrix file (grid or histogram) with JSON sidecar")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    recipe = args.recipe if args.recipe is not None else cfg.task.recipe
    cfg = apply_recipe(cfg, recipe)
    cfg = cfg.with_overrides("model", N=args.N, U=args.U, J=args.J, epsilon=args.epsilon)
    task_flags = (
        "target", "width", "count", "index", "entropy_window", "t_final", "t_short", "sample_dt", "seeds",
        "bins", "phi_section", "direction", "phase_points", "husimi", "top", "subset_margin", "power", "per_state",
        "tolerance",
    )
    cfg = cfg.with_overrides("task", **{k: getattr(args, k) for k in task_flags})
    return cfg.with_overrides("output", out=args.out, cache=args.cache, plot=args.plot)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "entropy": cmd_entropy,
    "project": cmd_project,
    "classical": cmd_classical,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    limits = contextlib.nullcontext()
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        from threadpoolctl import threadpool_limits

        limits = threadpool_limits(args.threads)
    try:
        cfg = resolve_config(args)
        with limits:
            run = Run(cfg)
            if args.command == "compare":
                result = cmd_compare(run, args.a, args.b)
            else:
                result = COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("done: %s", result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
