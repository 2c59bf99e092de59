"""Command-line entry point.

Subcommands: run, validate, spectrum, infsup.  Exit codes: 0 success,
2 configuration error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, RunConfig, load_config
from .forms import MaterialParams, StabilizationParams, boundary_spec, \
    derive_coefficients
from .linalg import SingularMatrixError
from .manufactured import manufactured_2d, manufactured_3d, manufactured_boundary
from .mesh import MeshError, generate_unit_cube, generate_unit_square, read_gmsh
from .output import atomic_write, write_csv, write_vtk
from . import verification as verif

log = logging.getLogger("biotfreq")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def build_mesh(cfg: RunConfig):
    if cfg.geometry_kind == "unit_square":
        return generate_unit_square(cfg.n)
    if cfg.geometry_kind == "unit_cube":
        return generate_unit_cube(cfg.n)
    return read_gmsh(cfg.mesh_path)


def _material_with(cfg: RunConfig, **overrides) -> MaterialParams:
    m = cfg.material
    fields = dict(E=m.E, nu=m.nu, mu_f=m.mu_f, kappa=m.kappa, omega=m.omega,
                  rho=m.rho, alpha=m.alpha, B=m.B, length_scale=m.length_scale)
    fields.update(overrides)
    return derive_coefficients(MaterialParams(**fields))


def _explicit_boundary(cfg: RunConfig, dim: int):
    table = {}
    for tag, tab in cfg.boundary_tags.items():
        dk = "dirichlet_u" if tab["displacement"] == "dirichlet" else "traction"
        pk = "dirichlet_p" if tab["pressure"] == "dirichlet" else "flux"
        dv = tab["displacement_value"]
        if not isinstance(dv, (list, tuple)):
            dv = [dv] * dim
        table[tag] = (dk, dv, pk, tab["pressure_value"])
    return boundary_spec(dim, table)


def _row(cfg: RunConfig, dim, n, report=None, err=None, params=None, stab=None,
         sequential=True):
    params = params or cfg.material
    stab = stab or cfg.stabilization
    kappa = params.kappa
    kappa_str = "|".join(f"{kappa[k]:g}" for k in sorted(kappa)) \
        if isinstance(kappa, dict) else kappa
    row = {"dim": dim, "k": cfg.degree, "n": n, "kappa": kappa_str,
           "nu": params.nu, "omega": params.omega, "delta1": stab.delta1,
           "delta2": stab.delta2, "solver": report.method if report else "",
           "iterations": report.iterations if report else "",
           "residual": report.relative_residual if report else "",
           "wall_time": "" if sequential or report is None else report.wall_time}
    if err is not None:
        row.update({"h": err.h_max, "dofs": err.n_dofs, "err_u": err.err_u,
                    "err_p": err.err_p, "err_phi": err.err_phi,
                    "err_total": err.total})
    return row


def _vertex_fields(result):
    """Vertex-sampled (u, p, phi) for VTK output (first n_vertices scalar dofs)."""
    nv = result.mesh.n_vertices
    u_c, p_c, phi_c = verif.split_fields(result.solution, result.dofmap)
    return {"u": u_c[:, :nv].T.copy(), "p": p_c[:nv].copy(), "phi": phi_c[:nv].copy()}


def cmd_run(cfg: RunConfig, sequential: bool) -> int:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    dim = 3 if cfg.geometry_kind == "unit_cube" else 2

    if cfg.study_kind == "convergence":
        res = verif.convergence_study(dim, cfg.degree, cfg.levels, cfg.material,
                                      cfg.stabilization, solver=cfg.solver,
                                      solver_opts=dict(cfg.solver_opts))
        rows = [_row(cfg, dim, n, rep, err, sequential=sequential)
                for n, rep, err in zip(res.levels, res.solve_reports, res.reports)]
        slope_line = ("slope,,,,,,,,,," +
                      f"{res.slopes['u']:.6f},{res.slopes['p']:.6f},"
                      f"{res.slopes['phi']:.6f},{res.slopes['total']:.6f},,,,")
        write_csv(rows, os.path.join(out, "convergence.csv"),
                  extra_lines=[slope_line])
        log.info("slopes: %s", res.slopes)
        return EXIT_OK

    if cfg.study_kind == "kappa_sweep":
        rows_raw = verif.kappa_sweep(cfg.n, cfg.degree, cfg.kappas,
                                     cfg.delta2s or [cfg.stabilization.delta2],
                                     cfg.material,
                                     delta1=cfg.stabilization.delta1, dim=dim)
        rows = []
        for entry in rows_raw:
            params = _material_with(cfg, kappa=entry["kappa"])
            stab = StabilizationParams(cfg.stabilization.delta1, entry["delta2"])
            rows.append(_row(cfg, dim, cfg.n, None, entry["report"],
                             params=params, stab=stab, sequential=sequential))
        write_csv(rows, os.path.join(out, "kappa_sweep.csv"))
        return EXIT_OK

    if cfg.study_kind == "nu_sweep":
        rows_raw = verif.nu_sweep(cfg.n, cfg.degree, cfg.nus,
                                  cfg.delta2s or [cfg.stabilization.delta2],
                                  cfg.material,
                                  delta1=cfg.stabilization.delta1, dim=dim)
        rows = []
        for entry in rows_raw:
            params = _material_with(cfg, nu=entry["nu"])
            stab = StabilizationParams(cfg.stabilization.delta1, entry["delta2"])
            rows.append(_row(cfg, dim, cfg.n, None, entry["report"],
                             params=params, stab=stab, sequential=sequential))
        write_csv(rows, os.path.join(out, "nu_sweep.csv"))
        return EXIT_OK

    if cfg.study_kind == "layered":
        kappa = cfg.material.kappa if isinstance(cfg.material.kappa, dict) else None
        results = verif.layered_experiment(
            omegas=cfg.omegas, n=cfg.n, degree=cfg.degree,
            delta2=cfg.stabilization.delta2, material=cfg.material,
            kappa=kappa, run_gmres=(cfg.solver == "gmres"),
            gmres_opts=dict(cfg.solver_opts), n_samples=cfg.samples)
        rows = []
        failed = []
        for r in results:
            rep = (r.iterative or r.direct).solve_report
            if not rep.converged:
                failed.append(r.omega)
            row = _row(cfg, 2, cfg.n, rep, None, params=r.direct.params,
                       stab=r.direct.stab, sequential=sequential)
            row.update({"h": r.direct.geom.h_max, "dofs": r.direct.dofmap.n_dofs})
            rows.append(row)
            fields = _vertex_fields(r.direct)
            write_vtk(r.direct.mesh, fields,
                      os.path.join(out, f"layered_omega{r.omega:g}.vtk"))
            profile = ["y,p_re,p_im"]
            profile += [f"{y:.12g},{p.real:.12g},{p.imag:.12g}"
                        for y, p in zip(r.profile_y, r.profile_p)]
            atomic_write(os.path.join(out, f"centerline_omega{r.omega:g}.csv"),
                         "\n".join(profile) + "\n")
        write_csv(rows, os.path.join(out, "layered.csv"))
        if failed:
            log.error("solver did not converge for omega in %s", failed)
            return EXIT_SOLVER
        return EXIT_OK

    # single solve
    mesh = build_mesh(cfg)
    params = _material_with(cfg)
    if cfg.boundary_manufactured:
        exact = manufactured_2d(params) if dim == 2 else manufactured_3d(params)
        boundary = manufactured_boundary(exact, cfg.gamma_p or None,
                                         cfg.gamma_u or None)
        body = (exact.f_u, exact.f_p)
    else:
        exact = None
        boundary = _explicit_boundary(cfg, dim)
        body = None
    result = verif.solve_case(mesh, cfg.degree, params, cfg.stabilization,
                              boundary, body_forces=body, solver=cfg.solver,
                              solver_opts=dict(cfg.solver_opts))
    if result.solve_report.method == "gmres" and not result.solve_report.converged:
        log.error("GMRES did not converge: residual %.3e",
                  result.solve_report.relative_residual)
        return EXIT_SOLVER
    err = None
    if exact is not None:
        err = verif.compute_error(mesh, result.dofmap, params, result.solution,
                                  exact, geom=result.geom)
    row = _row(cfg, dim, cfg.n or 0, result.solve_report, err,
               params=params, sequential=sequential)
    row.update({"h": result.geom.h_max, "dofs": result.dofmap.n_dofs})
    write_csv([row], os.path.join(out, "run.csv"))
    write_vtk(mesh, _vertex_fields(result), os.path.join(out, "fields.vtk"))
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> int:
    mesh = build_mesh(cfg)
    params = _material_with(cfg)
    tags = cfg.gamma_u or [t for t, tab in cfg.boundary_tags.items()
                           if tab["displacement"] == "dirichlet"]
    if not tags:
        raise ConfigError("spectrum needs boundary.gamma_u or dirichlet tags")
    rep = verif.elasticity_spectrum(mesh, cfg.degree, params, k_eigs=8,
                                    gamma_u_tags=set(tags))
    lines = [f"omega^2 {rep.omega_sq:.12g}", f"m_bar {rep.m_bar}",
             f"gap {rep.gap:.12g}", "eigenvalues " +
             " ".join(f"{v:.12g}" for v in rep.eigenvalues)]
    os.makedirs(cfg.output_dir, exist_ok=True)
    atomic_write(os.path.join(cfg.output_dir, "spectrum.txt"),
                 "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_infsup(cfg: RunConfig) -> int:
    dim = 3 if cfg.geometry_kind == "unit_cube" else 2
    levels = cfg.levels or [cfg.n]
    betas = verif.infsup_estimate(levels, dim, cfg.degree, cfg.material,
                                  cfg.stabilization)
    lines = [f"{n} {b:.12g}" for n, b in zip(levels, betas)]
    os.makedirs(cfg.output_dir, exist_ok=True)
    atomic_write(os.path.join(cfg.output_dir, "infsup.txt"), "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="biotfreq",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--output-dir", default=None,
                        help="overrides [output].directory")
    parser.add_argument("--sequential", action=argparse.BooleanOptionalAction,
                        default=True,
                        help="deterministic sequential mode (default on); "
                             "--no-sequential fills the volatile wall_time field")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate", "spectrum", "infsup"):
        p = sub.add_parser(name)
        p.add_argument("config")
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO),
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output_dir:
        cfg.output_dir = args.output_dir

    if args.command == "validate":
        print("configuration OK")
        return EXIT_OK
    try:
        if args.command == "run":
            return cmd_run(cfg, sequential=args.sequential)
        if args.command == "spectrum":
            return cmd_spectrum(cfg)
        if args.command == "infsup":
            return cmd_infsup(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularMatrixError, FloatingPointError, ValueError,
            verif.StudyFailure) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
