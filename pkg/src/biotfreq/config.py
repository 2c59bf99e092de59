"""Run configuration: TOML schema, validation, and loading.

A run is described by one TOML file with sections [geometry],
[discretization], [material], [stabilization], [boundary], [solver],
[study], and [output].  Validation is strict: unknown keys are rejected
and every offending key is reported at once.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:           # Python 3.10
    import tomli as tomllib

from .forms import MaterialParams, StabilizationParams

OUTPUT_DIR_ENV = "BIOTFREQ_OUTPUT_DIR"


class ConfigError(Exception):
    """Schema violation; message lists every offending key."""


STUDY_KINDS = ("single", "convergence", "kappa_sweep", "nu_sweep", "layered")
GEOMETRY_KINDS = ("unit_square", "unit_cube", "gmsh")
SOLVER_METHODS = ("direct", "gmres")
PRECONDITIONERS = ("none", "ilu0")

_SCHEMA = {
    "geometry": {"kind", "n", "path"},
    "discretization": {"degree"},
    "material": {"E", "nu", "mu_f", "kappa", "omega", "rho", "alpha", "B",
                 "length_scale"},
    "stabilization": {"delta1", "delta2"},
    "boundary": {"manufactured", "gamma_p", "gamma_u", "tags"},
    "solver": {"method", "tol", "restart", "max_iter", "preconditioner"},
    "study": {"kind", "levels", "kappas", "nus", "delta2s", "omegas", "samples"},
    "output": {"directory"},
}

_TAG_KEYS = {"displacement", "displacement_value", "pressure", "pressure_value"}


@dataclass
class RunConfig:
    geometry_kind: str
    n: int | None
    mesh_path: str | None
    degree: int
    material: MaterialParams
    stabilization: StabilizationParams
    study_kind: str
    levels: list
    kappas: list
    nus: list
    delta2s: list
    omegas: list
    samples: int
    boundary_manufactured: bool
    gamma_p: list
    gamma_u: list
    boundary_tags: dict
    solver: str
    solver_opts: dict
    output_dir: str


def _type_name(value) -> str:
    return type(value).__name__


def _collect_unknown_keys(data: dict, errors: list) -> None:
    for section, content in data.items():
        if section not in _SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        if not isinstance(content, dict):
            errors.append(f"[{section}] must be a table")
            continue
        for key in content:
            if key not in _SCHEMA[section]:
                errors.append(f"unknown key {section}.{key}")
        if section == "boundary" and isinstance(content.get("tags"), dict):
            for tag, tab in content["tags"].items():
                if not isinstance(tab, dict):
                    errors.append(f"boundary.tags.{tag} must be a table")
                    continue
                for key in tab:
                    if key not in _TAG_KEYS:
                        errors.append(f"unknown key boundary.tags.{tag}.{key}")


def _require(cond: bool, errors: list, msg: str) -> None:
    if not cond:
        errors.append(msg)


def parse_config(data: dict, base_dir: str = ".") -> RunConfig:
    """Validate a parsed TOML table and produce a RunConfig."""
    errors: list = []
    _collect_unknown_keys(data, errors)

    geom = data.get("geometry", {})
    kind = geom.get("kind")
    _require(kind in GEOMETRY_KINDS, errors,
             f"geometry.kind must be one of {GEOMETRY_KINDS}, got {kind!r}")
    n = geom.get("n")
    path = geom.get("path")
    if kind in ("unit_square", "unit_cube"):
        _require(isinstance(n, int) and n >= 1, errors,
                 "geometry.n must be an integer >= 1")
    if kind == "gmsh":
        _require(isinstance(path, str), errors, "geometry.path must be a string")

    disc = data.get("discretization", {})
    degree = disc.get("degree", 1)
    _require(degree in (1, 2), errors, "discretization.degree must be 1 or 2")

    mat = data.get("material", {})
    material = None
    kappa = mat.get("kappa")
    if isinstance(kappa, dict):
        try:
            kappa = {int(k): float(v) for k, v in kappa.items()}
        except (TypeError, ValueError):
            errors.append("material.kappa region keys must be integers")
            kappa = None
    required = ("E", "nu", "mu_f", "omega", "rho")
    for key in required:
        _require(isinstance(mat.get(key), (int, float)), errors,
                 f"material.{key} must be a number")
    if not errors or all("material" not in e for e in errors):
        try:
            material = MaterialParams(
                E=float(mat["E"]), nu=float(mat["nu"]), mu_f=float(mat["mu_f"]),
                kappa=kappa if isinstance(kappa, dict) else float(kappa),
                omega=float(mat["omega"]), rho=float(mat["rho"]),
                alpha=float(mat.get("alpha", 1.0)), B=float(mat.get("B", 1.0)),
                length_scale=float(mat.get("length_scale", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"material: {exc}")

    stab_tab = data.get("stabilization", {})
    stab = None
    d1 = stab_tab.get("delta1", 0.5)
    d2 = stab_tab.get("delta2", 0.0)
    if not isinstance(d1, (int, float)) or d1 < 0:
        errors.append("stabilization.delta1 must be a number >= 0")
    if not isinstance(d2, (int, float)) or d2 < 0:
        errors.append("stabilization.delta2 must be a number >= 0")
    if not [e for e in errors if e.startswith("stabilization")]:
        stab = StabilizationParams(delta1=float(d1), delta2=float(d2))

    study = data.get("study", {})
    study_kind = study.get("kind", "single")
    _require(study_kind in STUDY_KINDS, errors,
             f"study.kind must be one of {STUDY_KINDS}, got {study_kind!r}")
    levels = list(study.get("levels", []))
    kappas = [float(v) for v in study.get("kappas", [])]
    nus = [float(v) for v in study.get("nus", [])]
    delta2s = [float(v) for v in study.get("delta2s", [])]
    omegas = [float(v) for v in study.get("omegas", [])]
    samples = study.get("samples", 200)
    if study_kind == "convergence":
        _require(len(levels) >= 3, errors, "study.levels needs >= 3 entries")
    if study_kind == "kappa_sweep":
        _require(len(kappas) >= 2, errors, "study.kappas needs >= 2 entries")
        _require(all(v > 0 for v in kappas), errors, "study.kappas must be positive")
    if study_kind == "nu_sweep":
        _require(len(nus) >= 1, errors, "study.nus needs >= 1 entry")
        _require(all(0 < v < 0.5 for v in nus), errors,
                 "study.nus must lie in (0, 0.5)")
    if study_kind == "layered":
        _require(len(omegas) >= 1, errors, "study.omegas needs >= 1 entry")

    bnd = data.get("boundary", {})
    manufactured = bool(bnd.get("manufactured", False))
    gamma_p = list(bnd.get("gamma_p", []))
    gamma_u = list(bnd.get("gamma_u", []))
    tags = {}
    for tag, tab in (bnd.get("tags") or {}).items():
        dk = tab.get("displacement")
        pk = tab.get("pressure")
        _require(dk in ("dirichlet", "traction"), errors,
                 f"boundary.tags.{tag}.displacement must be dirichlet|traction")
        _require(pk in ("dirichlet", "flux"), errors,
                 f"boundary.tags.{tag}.pressure must be dirichlet|flux")
        tags[tag] = {
            "displacement": dk, "pressure": pk,
            "displacement_value": tab.get("displacement_value", 0.0),
            "pressure_value": tab.get("pressure_value", 0.0),
        }
    if study_kind in ("convergence", "kappa_sweep", "nu_sweep"):
        _require(not tags, errors,
                 f"study.kind {study_kind} uses manufactured boundaries; "
                 "boundary.tags is not allowed")
    if study_kind == "single":
        _require(manufactured or tags, errors,
                 "study.kind single needs boundary.manufactured or boundary.tags")

    solver_tab = data.get("solver", {})
    method = solver_tab.get("method", "direct")
    _require(method in SOLVER_METHODS, errors,
             f"solver.method must be one of {SOLVER_METHODS}")
    precond = solver_tab.get("preconditioner", "ilu0")
    _require(precond in PRECONDITIONERS, errors,
             f"solver.preconditioner must be one of {PRECONDITIONERS}")
    solver_opts = {
        "tol": float(solver_tab.get("tol", 1e-8)),
        "restart": int(solver_tab.get("restart", 500)),
        "max_iter": int(solver_tab.get("max_iter", 50_000)),
        "preconditioner": precond,
    }

    out_tab = data.get("output", {})
    out_dir = out_tab.get("directory") or os.environ.get(OUTPUT_DIR_ENV, "out")

    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return RunConfig(
        geometry_kind=kind, n=n, degree=degree,
        mesh_path=os.path.join(base_dir, path) if path else None,
        material=material, stabilization=stab,
        study_kind=study_kind, levels=levels, kappas=kappas, nus=nus,
        delta2s=delta2s, omegas=omegas, samples=int(samples),
        boundary_manufactured=manufactured, gamma_p=gamma_p, gamma_u=gamma_u,
        boundary_tags=tags, solver=method, solver_opts=solver_opts,
        output_dir=out_dir)


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"TOML parse error: {exc}") from exc
    return parse_config(data, base_dir=os.path.dirname(os.path.abspath(path)))
