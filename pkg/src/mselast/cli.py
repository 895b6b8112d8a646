"""Command-line front end: single solves, contrast-sweep benchmarks,
topology-optimization runs, and coefficient generation.

Benchmark output mirrors the familiar report shape: one CSV per contrast with
a row per preconditioner (iterations, condition estimate, coarse dimension)
plus two summary CSVs (variants x contrasts) for iterations and condition.
"""

import argparse
import configparser
import csv
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from . import assembly, coefficients, krylov, schwarz, topopt
from .grid import build_coarse_partition, build_fine_mesh

DEFAULT_VARIANTS = ("None", "EE", "HH", "HH+Rot", "EH", "EH+Rot", "EH+Rot;Rand", "EE;Rand")


@dataclass
class BenchmarkConfig:
    nx: int = 100
    ny: int = 100
    Nx: int = 10
    Ny: int = 10
    contrasts: tuple = (1.0, 1e2, 1e4, 1e6)
    variants: tuple = DEFAULT_VARIANTS
    layout: str = "channels-and-inclusions"
    n_max: int = 6
    n_snapshots: int | None = None
    selection_rule: str | None = None
    seed: int = 0
    nu: float = 0.3
    tol: float = 1e-6
    maxit: int = 2000
    force: float = 1.0
    load_points: tuple = ((0.2, 0.2, 1), (0.8, 0.8, -1))  # (x, y, sign)
    outdir: str | None = None
    compare_direct: bool = False

    def __post_init__(self):
        for tag in self.variants:
            if tag != "None":
                schwarz.get_variant(tag)


def benchmark_load(mesh, layout, points, force):
    """Opposing x-direction point forces snapped to the nearest solid elements."""
    loads = []
    for x, y, sign in points:
        e = coefficients.snap_to_solid(mesh, layout, x, y)
        node = int(mesh.element_nodes()[e][0])
        loads.append((node, 0, sign * force))
    return assembly.LoadSpec(point_loads=loads)


def run_single(config, eta, tag):
    """One (contrast, variant) benchmark cell; returns a result dict."""
    mesh = build_fine_mesh(config.nx, config.ny)
    part = build_coarse_partition(mesh, config.Nx, config.Ny)
    coeff = coefficients.generate_coefficient(config.layout, mesh, eta, nu=config.nu)
    dirichlet = mesh.boundary_nodes()
    op = assembly.assemble_elasticity(mesh, coeff, dirichlet)
    f = op.restrict(
        assembly.build_load_vector(
            mesh, benchmark_load(mesh, config.layout, config.load_points, config.force)
        )
    )
    opts = schwarz.EigOptions(
        n_max=config.n_max,
        rule=config.selection_rule,
        n_snapshots=config.n_snapshots,
        seed=config.seed,
    )
    t0 = time.perf_counter()
    precond = schwarz.build_preconditioner(tag, op, mesh, part, coeff, dirichlet, opts)
    t_build = time.perf_counter() - t0
    x, report = krylov.pcg_solve(op.matrix, f, precond, tol=config.tol, maxit=config.maxit)
    report.coarse_dim = precond.coarse_dim
    result = {
        "eta": eta,
        "variant": tag,
        "iterations": report.iterations,
        "converged": report.converged,
        "condition": report.cond_estimate,
        "coarse_dim": precond.coarse_dim,
        "t_build": t_build,
        "t_eig": precond.info.get("t_eig", 0.0),
        "t_solve": report.timings.get("solve", 0.0),
        "solution": x,
        "report": report,
        "operator": op,
        "rhs": f,
    }
    if config.compare_direct:
        x_direct = spla.spsolve(op.matrix.tocsc(), f)
        nd = np.linalg.norm(x_direct)
        result["direct_rel_error"] = float(np.linalg.norm(x - x_direct) / nd)
    return result


def run_benchmark(config):
    """Full sweep.  Returns {eta: {variant: result}} and writes CSVs if asked."""
    results = {}
    for eta in config.contrasts:
        results[eta] = {}
        for tag in config.variants:
            results[eta][tag] = run_single(config, eta, tag)
    if config.outdir is not None:
        write_benchmark_csvs(config, results)
    return results


def _iter_cell(res, maxit):
    return f">{maxit}" if not res["converged"] else str(res["iterations"])


def write_benchmark_csvs(config, results):
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for eta, per_variant in results.items():
        path = outdir / f"contrast_{eta:g}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["preconditioner", "iterations", "condition", "coarse_dim"])
            for tag, res in per_variant.items():
                cond = "" if res["condition"] is None else f"{res['condition']:.6g}"
                w.writerow([tag, _iter_cell(res, config.maxit), cond, res["coarse_dim"]])
    for name, key in (("summary_iterations.csv", "iterations"), ("summary_condition.csv", "condition")):
        with open(outdir / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["preconditioner"] + [f"{eta:g}" for eta in config.contrasts])
            for tag in config.variants:
                row = [tag]
                for eta in config.contrasts:
                    res = results[eta][tag]
                    if key == "iterations":
                        row.append(_iter_cell(res, config.maxit))
                    else:
                        row.append("" if res["condition"] is None else f"{res['condition']:.6g}")
                w.writerow(row)


# ---------------------------------------------------------------------------
# argument parsing


def _read_config_file(path):
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    flat = {}
    for section in cp.sections():
        for key, val in cp.items(section):
            flat[key.replace("-", "_")] = val
    return flat


def _apply_config_file(args):
    if getattr(args, "config", None):
        for key, val in _read_config_file(args.config).items():
            if hasattr(args, key):
                current = getattr(args, key)
                if isinstance(current, bool):
                    val = val.lower() in ("1", "true", "yes")
                elif isinstance(current, int):
                    val = int(val)
                elif isinstance(current, float):
                    val = float(val)
                elif isinstance(current, list):
                    val = val.split(",")
                setattr(args, key, val)
    return args


def _add_common(p):
    p.add_argument("--config", help="INI config file; flags given on the command line win")
    p.add_argument("--mesh", type=int, nargs=2, default=[100, 100], metavar=("NX", "NY"))
    p.add_argument("--coarse", type=int, nargs=2, default=[10, 10], metavar=("CX", "CY"))
    p.add_argument("--layout", default="channels-and-inclusions", choices=coefficients.LAYOUTS)
    p.add_argument("--nu", type=float, default=0.3, help="Poisson ratio")
    p.add_argument("--n-max", type=int, default=6, help="mode cap per neighborhood")
    p.add_argument("--snapshots", type=int, default=None, help="randomized snapshot count")
    p.add_argument("--rule", default=None, choices=["fixed", "gap"], help="mode selection rule")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--maxit", type=int, default=2000)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mselast",
        description="High-contrast elasticity solves with two-level multiscale "
        "Schwarz preconditioners, contrast benchmarks and SIMP optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="single preconditioned solve")
    _add_common(p)
    p.add_argument("--eta", type=float, default=1e4, help="contrast E_max/E_min")
    p.add_argument("--variant", default="EH+Rot", help="preconditioner tag or 'None'")
    p.add_argument("--coeff-file", default=None, help="plain-text E_e matrix instead of a layout")
    p.add_argument("--residual-csv", default=None, help="write per-iteration residuals")

    p = sub.add_parser("bench", help="contrast-sweep benchmark")
    _add_common(p)
    p.add_argument("--contrasts", type=float, nargs="+", default=[1.0, 1e2, 1e4, 1e6])
    p.add_argument("--variants", nargs="+", default=list(DEFAULT_VARIANTS))
    p.add_argument("--outdir", required=True)

    p = sub.add_parser("optimize", help="SIMP compliance minimization")
    _add_common(p)
    p.add_argument("--volfrac", type=float, default=0.3)
    p.add_argument("--penal", type=float, default=3.0)
    p.add_argument("--filter-radius", type=float, default=2.5, help="in units of h")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--variant", default="EH+Rot;Rand")
    p.add_argument("--reuse-period", type=int, default=10)
    p.add_argument("--reuse-threshold", type=int, default=None)
    p.add_argument("--snapshot-every", type=int, default=20, help="density PGM cadence")
    p.add_argument("--outdir", required=True)

    p = sub.add_parser("gen-coeff", help="write a synthetic coefficient field")
    _add_common(p)
    p.add_argument("--eta", type=float, default=1e4)
    p.add_argument("--out", required=True, help="plain-text matrix output path")
    p.add_argument("--pgm", default=None, help="optional PGM image of the field")

    return parser


def cmd_solve(args):
    mesh = build_fine_mesh(*args.mesh)
    part = build_coarse_partition(mesh, *args.coarse)
    if args.coeff_file:
        coeff = assembly.CoefficientField.from_text(args.coeff_file, args.nu)
    else:
        coeff = coefficients.generate_coefficient(args.layout, mesh, args.eta, nu=args.nu)
    dirichlet = mesh.boundary_nodes()
    op = assembly.assemble_elasticity(mesh, coeff, dirichlet)
    load = benchmark_load(mesh, args.layout, ((0.2, 0.2, 1), (0.8, 0.8, -1)), 1.0)
    f = op.restrict(assembly.build_load_vector(mesh, load))
    opts = schwarz.EigOptions(args.n_max, args.rule, args.snapshots, args.seed)
    t0 = time.perf_counter()
    precond = schwarz.build_preconditioner(args.variant, op, mesh, part, coeff, dirichlet, opts)
    t_build = time.perf_counter() - t0
    _, report = krylov.pcg_solve(op.matrix, f, precond, tol=args.tol, maxit=args.maxit)
    print(f"variant        {args.variant}")
    print(f"iterations     {report.iterations}{'' if report.converged else ' (not converged)'}")
    print(f"condition est. {report.cond_estimate:.4g}")
    print(f"coarse dim     {precond.coarse_dim}")
    print(f"build time     {t_build:.3f} s")
    print(f"solve time     {report.timings['solve']:.3f} s")
    if args.residual_csv:
        report.write_residual_csv(args.residual_csv)
    return 0 if report.converged else 1


def cmd_bench(args):
    config = BenchmarkConfig(
        nx=args.mesh[0],
        ny=args.mesh[1],
        Nx=args.coarse[0],
        Ny=args.coarse[1],
        contrasts=tuple(args.contrasts),
        variants=tuple(args.variants),
        layout=args.layout,
        n_max=args.n_max,
        n_snapshots=args.snapshots,
        selection_rule=args.rule,
        seed=args.seed,
        nu=args.nu,
        tol=args.tol,
        maxit=args.maxit,
        outdir=args.outdir,
    )
    results = run_benchmark(config)
    for eta in config.contrasts:
        print(f"contrast {eta:g}:")
        for tag in config.variants:
            res = results[eta][tag]
            cond = res["condition"]
            print(
                f"  {tag:<14} iters {_iter_cell(res, config.maxit):>6}   "
                f"cond {cond if cond is None else f'{cond:.4g}':>10}   "
                f"coarse dim {res['coarse_dim']}"
            )
    print(f"CSV tables written to {args.outdir}")
    return 0


def cmd_optimize(args):
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    mesh = build_fine_mesh(*args.mesh)
    config = topopt.OptimizeConfig(
        nx=args.mesh[0],
        ny=args.mesh[1],
        Nx=args.coarse[0],
        Ny=args.coarse[1],
        volfrac=args.volfrac,
        penal=args.penal,
        filter_radius_factor=args.filter_radius,
        nu=args.nu,
        n_iterations=args.iterations,
        variant=args.variant,
        eig_options=schwarz.EigOptions(args.n_max, args.rule, args.snapshots, args.seed),
        reuse=topopt.ReusePolicy(args.reuse_period, args.reuse_threshold),
        tol=args.tol,
        maxit=args.maxit,
    )

    def callback(it, rho, row):
        if args.snapshot_every and (it % args.snapshot_every == 0 or it == args.iterations - 1):
            coefficients.export_field_image(rho, mesh, outdir / f"density_{it:04d}.pgm")
        print(
            f"iter {it:3d}  g0 {row['g0']:.6g}  vol {row['volume']:.6g}  "
            f"pcg {row['inner_iterations']}{' rebuild' if row['rebuilt'] else ''}"
        )

    result = topopt.optimize(config, callback)
    with open(outdir / "log.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "g0", "volume", "inner_pcg_iterations", "rebuilt", "condition"])
        for row in result.log:
            w.writerow(
                [
                    row["iteration"],
                    repr(row["g0"]),
                    repr(row["volume"]),
                    row["inner_iterations"],
                    int(row["rebuilt"]),
                    "" if row["cond_estimate"] is None else repr(row["cond_estimate"]),
                ]
            )
    coefficients.export_field_image(result.rho_f, mesh, outdir / "density_final.pgm")
    print(f"final compliance {result.log[-1]['g0']:.6g}; log and images in {outdir}")
    return 0


def cmd_gen_coeff(args):
    mesh = build_fine_mesh(*args.mesh)
    coeff = coefficients.generate_coefficient(args.layout, mesh, args.eta, nu=args.nu)
    coeff.to_text(args.out, mesh)
    if args.pgm:
        coefficients.export_field_image(coeff.values, mesh, args.pgm)
    print(f"wrote {args.out}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = _apply_config_file(parser.parse_args(argv))
    handlers = {
        "solve": cmd_solve,
        "bench": cmd_bench,
        "optimize": cmd_optimize,
        "gen-coeff": cmd_gen_coeff,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
