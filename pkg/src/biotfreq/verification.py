"""Error norms, convergence/robustness studies, and well-posedness diagnostics.

The error of a discrete solution against the closed-form fields is measured
in the energy norm

    |||(v, q, xi)|||^2 = 2 mu_e ||eps(v)||_0^2
                       + kappa/(mu_f w alpha) (||q||_0^2 + l^2 |q|_1^2)
                       + (1/lambda) ||xi||_0^2

with per-cell kappa inside the element integrals when the permeability is
region-wise.  Convergence slopes are least-squares fits of log(error)
against log(h) over the finest three levels (the coarsest level is usually
preasymptotic).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .fem import CellBasis, DofMap, build_dofmap, quadrature_rule
from .forms import (BiotSystem, BoundarySpec, FieldBlocks, MaterialParams,
                    StabilizationParams, apply_dirichlet, assemble_field_blocks,
                    assemble_load, assemble_operator, boundary_spec,
                    derive_coefficients, dirichlet_constraints,
                    residual_stabilization_load)
from .linalg import SolveReport, dense_generalized_eig, direct_solve, gmres, ilu0
from .manufactured import (ExactSolution, manufactured_2d, manufactured_3d,
                           manufactured_boundary)
from .mesh import (GeomCache, Mesh, build_geometry, generate_unit_cube,
                   generate_unit_square)


@dataclass
class ErrorReport:
    """Per-field and total energy-norm errors on one mesh."""

    err_u: float
    err_p: float
    err_phi: float
    total: float
    h_max: float
    n_dofs: int

    @classmethod
    def from_squares(cls, sq_u, sq_p, sq_phi, h_max, n_dofs):
        return cls(err_u=float(np.sqrt(sq_u)), err_p=float(np.sqrt(sq_p)),
                   err_phi=float(np.sqrt(sq_phi)),
                   total=float(np.sqrt(sq_u + sq_p + sq_phi)),
                   h_max=float(h_max), n_dofs=int(n_dofs))


def split_fields(vec: np.ndarray, dofmap: DofMap):
    """Coefficient vector -> (u components (d, n_s), p (n_s,), phi (n_s,))."""
    n_s = dofmap.n_scalar
    d = dofmap.dim
    u = np.stack([vec[a * n_s:(a + 1) * n_s] for a in range(d)])
    p = vec[d * n_s:(d + 1) * n_s]
    phi = vec[(d + 1) * n_s:(d + 2) * n_s]
    return u, p, phi


def compute_error(mesh: Mesh, dofmap: DofMap, params: MaterialParams,
                  solution: np.ndarray, exact: ExactSolution,
                  geom: GeomCache | None = None) -> ErrorReport:
    """Energy-norm error by elevated quadrature (exactness 2k + 2)."""
    if geom is None:
        geom = build_geometry(mesh)
    d = mesh.dim
    k = dofmap.degree
    rule = quadrature_rule(d, min(2 * k + 2, 6))
    basis = CellBasis(mesh, geom, rule, k)
    u_c, p_c, phi_c = split_fields(solution, dofmap)
    cd = dofmap.cell_dofs
    pts = basis.points.reshape(-1, d)
    n_c, n_q = mesh.n_cells, rule.n_points

    guh = np.einsum("cqlj,acl->cqaj", basis.grad, u_c[:, cd])
    ph = np.einsum("ql,cl->cq", basis.phi, p_c[cd])
    gph = np.einsum("cqlj,cl->cqj", basis.grad, p_c[cd])
    phih = np.einsum("ql,cl->cq", basis.phi, phi_c[cd])

    gue = exact.grad_u(pts).reshape(n_c, n_q, d, d)
    pe = exact.p(pts).reshape(n_c, n_q)
    gpe = exact.grad_p(pts).reshape(n_c, n_q, d)
    phie = exact.phi(pts).reshape(n_c, n_q)

    dg = guh - gue
    eps_err = 0.5 * (dg + np.swapaxes(dg, 2, 3))
    sq_eps = float(np.einsum("cq,cqij->", basis.wdet, np.abs(eps_err) ** 2))
    sq_u = 2.0 * params.mu_e * sq_eps

    ell2 = params.length_scale ** 2
    p_cellwise = (np.einsum("cq,cq->c", basis.wdet, np.abs(ph - pe) ** 2)
                  + ell2 * np.einsum("cq,cqj->c", basis.wdet, np.abs(gph - gpe) ** 2))
    w_p = params.kappa_per_cell(mesh) / (params.mu_f * params.omega * params.alpha)
    sq_p = float(w_p @ p_cellwise)

    sq_phi = float(np.einsum("cq,cq->", basis.wdet, np.abs(phih - phie) ** 2)
                   / params.lam)
    return ErrorReport.from_squares(sq_u, sq_p, sq_phi, geom.h_max, dofmap.n_dofs)


def unorm_gram(mesh: Mesh, dofmap: DofMap, params: MaterialParams,
               stab: StabilizationParams | None = None,
               geom: GeomCache | None = None,
               blocks: FieldBlocks | None = None) -> sp.csr_matrix:
    """Gram matrix of the (discrete) energy norm on the monolithic dof vector.

    Without stab this is the block-diagonal continuous-norm Gram; with stab
    the h_T^2-weighted residual and pressure-gradient terms are added, which
    couples the displacement and total-pressure blocks.
    """
    if geom is None:
        geom = build_geometry(mesh)
    if blocks is None:
        blocks = assemble_field_blocks(mesh, geom, dofmap, params)
    p = params
    cp = 1.0 / (p.mu_f * p.omega * p.alpha)
    ell2 = p.length_scale ** 2
    N_u = 2.0 * p.mu_e * blocks.E_eps
    N_p = cp * (blocks.M_kap + ell2 * blocks.K_kap)
    N_phi = (1.0 / p.lam) * blocks.M_s
    n_s = dofmap.n_scalar
    d = mesh.dim
    z_su = sp.csr_matrix((n_s, d * n_s))
    z_ss = sp.csr_matrix((n_s, n_s))
    N_uphi = sp.csr_matrix((d * n_s, n_s))
    if stab is not None and stab.delta1 > 0:
        s1 = stab.delta1 / (2.0 * p.mu_e)
        N_u = N_u + s1 * blocks.G_RR
        N_uphi = -s1 * blocks.G_Rg
        N_phi = N_phi + s1 * blocks.K_h2
    if stab is not None and stab.delta2 > 0:
        N_p = N_p + (stab.delta2 / (p.mu_f * p.alpha * p.omega)) * blocks.K_h2
    return sp.bmat([[N_u, z_su.T, N_uphi],
                    [z_su, N_p, z_ss],
                    [N_uphi.T, z_ss, N_phi]], format="csr")


def unorm(vec: np.ndarray, gram: sp.csr_matrix) -> float:
    return float(np.sqrt(np.real(np.conj(vec) @ (gram @ vec))))


# ---------------------------------------------------------------------------
# single-case driver
# ---------------------------------------------------------------------------

@dataclass
class CaseResult:
    solution: np.ndarray
    solve_report: SolveReport
    system: BiotSystem
    mesh: Mesh
    geom: GeomCache
    dofmap: DofMap
    params: MaterialParams
    stab: StabilizationParams
    blocks: FieldBlocks


def solve_case(mesh: Mesh, degree: int, params: MaterialParams,
               stab: StabilizationParams, boundary: BoundarySpec,
               body_forces=None, solver: str = "direct",
               solver_opts: dict | None = None,
               geom: GeomCache | None = None) -> CaseResult:
    """Assemble the constrained system and solve it with the chosen method."""
    if geom is None:
        geom = build_geometry(mesh)
    dofmap = build_dofmap(mesh, degree)
    blocks = assemble_field_blocks(mesh, geom, dofmap, params)
    system = assemble_operator(mesh, dofmap, params, stab, geom=geom, blocks=blocks)
    system.load = assemble_load(mesh, dofmap, params, boundary,
                                body_forces=body_forces, geom=geom)
    if body_forces is not None:
        system.load = system.load + residual_stabilization_load(
            mesh, dofmap, params, stab, body_forces[0], geom=geom)
    constraints = dirichlet_constraints(mesh, dofmap, boundary, geom=geom)
    system = apply_dirichlet(system, constraints)
    opts = dict(solver_opts or {})
    if solver == "direct":
        x, report = direct_solve(system.matrix, system.load)
    elif solver == "gmres":
        precond = None
        if opts.pop("preconditioner", "ilu0") == "ilu0":
            precond = ilu0(system.matrix)
        x, report = gmres(system.matrix, system.load, preconditioner=precond,
                          restart=int(opts.pop("restart", 500)),
                          tol=float(opts.pop("tol", 1e-8)),
                          max_iter=int(opts.pop("max_iter", 50_000)))
    else:
        raise ValueError(f"unknown solver {solver}")
    return CaseResult(solution=x, solve_report=report, system=system, mesh=mesh,
                      geom=geom, dofmap=dofmap, params=params, stab=stab,
                      blocks=blocks)


def _unit_mesh(dim: int, n: int) -> Mesh:
    return generate_unit_square(n) if dim == 2 else generate_unit_cube(n)


def solve_manufactured(dim: int, n: int, degree: int, params: MaterialParams,
                       stab: StabilizationParams, solver: str = "direct",
                       solver_opts: dict | None = None):
    """Manufactured-solution case on the unit square/cube; returns result + error."""
    mesh = _unit_mesh(dim, n)
    exact = manufactured_2d(params) if dim == 2 else manufactured_3d(params)
    boundary = manufactured_boundary(exact)
    result = solve_case(mesh, degree, params, stab, boundary,
                        body_forces=(exact.f_u, exact.f_p),
                        solver=solver, solver_opts=solver_opts)
    err = compute_error(mesh, result.dofmap, params, result.solution, exact,
                        geom=result.geom)
    return result, err


def fit_slope(hs, errors, n_points: int = 3) -> float:
    """Least-squares slope of log(err) vs log(h) over the finest n_points levels."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    order = np.argsort(hs)
    hs, errors = hs[order], errors[order]
    m = min(n_points, len(hs))
    mask = errors[:m] > 0
    coeffs = np.polyfit(np.log(hs[:m][mask]), np.log(errors[:m][mask]), 1)
    return float(coeffs[0])


@dataclass
class ConvergenceResult:
    reports: list
    slopes: dict            # field -> least-squares slope
    levels: list
    solve_reports: list = field(default_factory=list)


class StudyFailure(Exception):
    """A level of a study failed to solve; completed levels are preserved."""

    def __init__(self, message: str, partial: "ConvergenceResult"):
        super().__init__(message)
        self.partial = partial


def convergence_study(dim: int, degree: int, levels, params_raw: MaterialParams,
                      stab: StabilizationParams, solver: str = "direct",
                      solver_opts: dict | None = None) -> ConvergenceResult:
    """Refinement study against the manufactured solution.

    A solver failure at any level aborts with StudyFailure carrying the
    reports of the levels already completed.
    """
    if len(levels) < 3:
        raise ValueError("need at least 3 refinement levels")
    params = derive_coefficients(params_raw)
    reports, solves, done = [], [], []

    def partial():
        return ConvergenceResult(reports=reports, slopes={}, levels=done,
                                 solve_reports=solves)

    for n in levels:
        try:
            result, err = solve_manufactured(dim, n, degree, params, stab,
                                             solver=solver,
                                             solver_opts=solver_opts)
        except Exception as exc:
            raise StudyFailure(f"solve failed at level n={n}: {exc}",
                               partial()) from exc
        if not result.solve_report.converged:
            raise StudyFailure(
                f"solver did not converge at level n={n} "
                f"(residual {result.solve_report.relative_residual:.3e})",
                partial())
        reports.append(err)
        solves.append(result.solve_report)
        done.append(n)
    hs = [r.h_max for r in reports]
    slopes = {
        "u": fit_slope(hs, [r.err_u for r in reports]),
        "p": fit_slope(hs, [r.err_p for r in reports]),
        "phi": fit_slope(hs, [r.err_phi for r in reports]),
        "total": fit_slope(hs, [r.total for r in reports]),
    }
    return ConvergenceResult(reports=reports, slopes=slopes, levels=list(levels),
                             solve_reports=solves)


def kappa_sweep(n: int, degree: int, kappas, delta2s, params_raw: MaterialParams,
                delta1: float = 0.5, dim: int = 2) -> list:
    """Error over a permeability grid for each pressure-stabilization weight."""
    rows = []
    for d2 in delta2s:
        for kap in kappas:
            if kap <= 0:
                raise ValueError("kappa must be positive")
            params = derive_coefficients(
                MaterialParams(E=params_raw.E, nu=params_raw.nu,
                               mu_f=params_raw.mu_f, kappa=kap,
                               omega=params_raw.omega, rho=params_raw.rho,
                               alpha=params_raw.alpha, B=params_raw.B,
                               length_scale=params_raw.length_scale))
            stab = StabilizationParams(delta1=delta1, delta2=d2)
            _, err = solve_manufactured(dim, n, degree, params, stab)
            rows.append({"kappa": kap, "delta2": d2, "report": err})
    return rows


def nu_sweep(n: int, degree: int, nus, delta2s, params_raw: MaterialParams,
             delta1: float = 0.5, dim: int = 2) -> list:
    """Error over a Poisson-ratio grid for each pressure-stabilization weight."""
    rows = []
    for d2 in delta2s:
        for nu in nus:
            if not 0.0 < nu < 0.5:
                raise ValueError("nu must lie in (0, 0.5)")
            params = derive_coefficients(
                MaterialParams(E=params_raw.E, nu=nu, mu_f=params_raw.mu_f,
                               kappa=params_raw.kappa, omega=params_raw.omega,
                               rho=params_raw.rho, alpha=params_raw.alpha,
                               B=params_raw.B,
                               length_scale=params_raw.length_scale))
            stab = StabilizationParams(delta1=delta1, delta2=d2)
            _, err = solve_manufactured(dim, n, degree, params, stab)
            rows.append({"nu": nu, "delta2": d2, "report": err})
    return rows


# ---------------------------------------------------------------------------
# layered-domain experiment
# ---------------------------------------------------------------------------

LAYERED_KAPPA = {0: 1e-3, 1: 1e-4, 2: 1e-5}


def layered_mesh(n: int) -> Mesh:
    """Unit square split into three horizontal permeability bands."""
    mesh = generate_unit_square(n)
    centroids = mesh.vertices[mesh.cells].mean(axis=1)
    regions = np.minimum((centroids[:, 1] * 3.0).astype(int), 2)
    mesh.cell_regions = regions.astype(np.int64)
    return mesh


def layered_params(omega: float, kappa: dict | None = None,
                   material: MaterialParams | None = None) -> MaterialParams:
    """Table-2 defaults, optionally overridden by an explicit material record."""
    if material is None:
        return derive_coefficients(MaterialParams(
            E=100.0, nu=0.45, mu_f=1e-2, kappa=dict(kappa or LAYERED_KAPPA),
            omega=float(omega), rho=1.0))
    return derive_coefficients(MaterialParams(
        E=material.E, nu=material.nu, mu_f=material.mu_f,
        kappa=dict(kappa or (material.kappa if isinstance(material.kappa, dict)
                             else LAYERED_KAPPA)),
        omega=float(omega), rho=material.rho, alpha=material.alpha,
        B=material.B, length_scale=material.length_scale))


def layered_boundary(dim: int = 2) -> BoundarySpec:
    """Bottom: upward traction + pressure Dirichlet; top: clamped; sides free."""
    load = 1e-2
    return boundary_spec(dim, {
        "bottom": ("traction", [0.0, load], "dirichlet_p", load),
        "top": ("dirichlet_u", [0.0, 0.0], "flux", 0.0),
        "left": ("traction", [0.0, 0.0], "flux", 0.0),
        "right": ("traction", [0.0, 0.0], "flux", 0.0),
    })


def evaluate_scalar(mesh: Mesh, geom: GeomCache, dofmap: DofMap,
                    coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Point evaluation of a scalar FE field (brute-force cell location)."""
    from .fem import ReferenceElement
    elem = ReferenceElement(mesh.dim, dofmap.degree)
    pts = np.atleast_2d(pts)
    ref_all = np.einsum("cij,ncj->nci", geom.inv_jac,
                        pts[:, None, :] - geom.cell_origin[None, :, :])
    tol = 1e-10
    inside = np.all(ref_all >= -tol, axis=2) & (ref_all.sum(axis=2) <= 1.0 + tol)
    out = np.empty(len(pts), dtype=np.complex128)
    for i in range(len(pts)):
        hits = np.where(inside[i])[0]
        if len(hits) == 0:
            raise ValueError(f"point {pts[i]} is outside the mesh")
        c = hits[0]
        vals = elem.eval_basis(ref_all[i, c][None, :])[0]
        out[i] = vals @ coeffs[dofmap.cell_dofs[c]]
    return out


def second_difference_sign_changes(values: np.ndarray, rel_floor: float = 1e-9) -> int:
    """Sign changes of the discrete second difference, ignoring noise-level wiggles."""
    v = np.asarray(values, dtype=float)
    d2 = v[2:] - 2.0 * v[1:-1] + v[:-2]
    floor = rel_floor * max(np.abs(v).max(), 1e-300)
    signs = np.sign(d2)
    signs[np.abs(d2) < floor] = 0.0
    nz = signs[signs != 0.0]
    return int(np.sum(nz[1:] * nz[:-1] < 0))


@dataclass
class LayeredResult:
    omega: float
    direct: CaseResult
    iterative: CaseResult | None
    unorm_rel_diff: float | None
    profile_y: np.ndarray
    profile_p: np.ndarray
    sign_changes: int


def layered_experiment(omegas=(25.0, 50.0, 75.0, 100.0, 125.0), n: int = 48,
                       degree: int = 1, delta2: float = 1.0,
                       run_gmres: bool = True, gmres_opts: dict | None = None,
                       n_samples: int = 200, material: MaterialParams | None = None,
                       kappa: dict | None = None,
                       delta1: float | None = None) -> list:
    """Region-wise permeability experiment on the unit square (Table-2 setup).

    delta1 defaults to omega^-2 per run; the permeability bands are tied to
    the thirds of the unit square in y.
    """
    mesh = layered_mesh(n)
    geom = build_geometry(mesh)
    boundary = layered_boundary()
    results = []
    for omega in omegas:
        params = layered_params(omega, kappa=kappa, material=material)
        stab = StabilizationParams(
            delta1=omega ** -2 if delta1 is None else delta1, delta2=delta2)
        direct = solve_case(mesh, degree, params, stab, boundary,
                            solver="direct", geom=geom)
        iterative = None
        rel = None
        if run_gmres:
            opts = {"preconditioner": "ilu0", "restart": 500, "tol": 1e-10}
            opts.update(gmres_opts or {})
            iterative = solve_case(mesh, degree, params, stab, boundary,
                                   solver="gmres", solver_opts=opts, geom=geom)
            gram = unorm_gram(mesh, direct.dofmap, params, stab=stab, geom=geom,
                              blocks=direct.blocks)
            denom = unorm(direct.solution, gram)
            rel = unorm(iterative.solution - direct.solution, gram) / denom
        ys = np.linspace(0.0, 1.0, n_samples)
        pts = np.column_stack([np.full(n_samples, 0.5), ys])
        _, p_c, _ = split_fields(direct.solution, direct.dofmap)
        prof = evaluate_scalar(mesh, geom, direct.dofmap, p_c, pts)
        if not np.all(np.isfinite(prof.view(float))):
            raise FloatingPointError("non-finite pressure profile")
        results.append(LayeredResult(
            omega=omega, direct=direct, iterative=iterative, unorm_rel_diff=rel,
            profile_y=ys, profile_p=prof,
            sign_changes=second_difference_sign_changes(prof.real)))
    return results


# ---------------------------------------------------------------------------
# well-posedness diagnostics
# ---------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    omega_sq: float
    m_bar: int              # count of eigenvalues below omega^2
    gap: float              # min |omega^2 - lambda| / (1 + lambda)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(lam) < -1e-9 * max(1.0, np.abs(lam).max())):
            raise ValueError("eigenvalues must be ascending")


def _u_dirichlet_dofs(mesh: Mesh, dofmap: DofMap, tags) -> np.ndarray:
    scal = set()
    for i, facet in enumerate(mesh.boundary_facets):
        if mesh.facet_tags[i] in tags:
            scal.update(int(s) for s in dofmap.facet_scalar_dofs(facet))
    scal = np.array(sorted(scal), dtype=np.int64)
    return np.concatenate([dofmap.u_dofs(a, scal) for a in range(mesh.dim)]) \
        if len(scal) else np.array([], dtype=np.int64)


def elasticity_spectrum(mesh: Mesh, degree: int, params: MaterialParams,
                        k_eigs: int, gamma_u_tags) -> SpectrumReport:
    """Smallest eigenvalues of 2 mu_e (eps u, eps v) = lambda rho (u, v).

    Displacement dofs on gamma_u_tags are eliminated; the rest of the
    coupled system plays no role here.
    """
    geom = build_geometry(mesh)
    dofmap = build_dofmap(mesh, degree)
    blocks = assemble_field_blocks(mesh, geom, dofmap, params)
    d = mesh.dim
    n_u = d * dofmap.n_scalar
    fixed = _u_dirichlet_dofs(mesh, dofmap, set(gamma_u_tags))
    if len(fixed) == 0:
        raise ValueError("displacement Dirichlet set must be nonempty")
    free = np.setdiff1d(np.arange(n_u), fixed)
    A = (2.0 * params.mu_e * blocks.E_eps).tocsc()[free][:, free].toarray()
    M = (params.rho * blocks.M_vec).tocsc()[free][:, free].toarray()
    pairs = dense_generalized_eig(A, M, k_eigs)
    lam = np.array([l for l, _ in pairs])
    om2 = params.omega ** 2
    return SpectrumReport(eigenvalues=lam, omega_sq=om2,
                          m_bar=int(np.sum(lam < om2)),
                          gap=float(np.min(np.abs(om2 - lam) / (1.0 + lam))))


def _constrained_dofs(mesh: Mesh, dofmap: DofMap, boundary: BoundarySpec) -> np.ndarray:
    out = set()
    for i, facet in enumerate(mesh.boundary_facets):
        disp, pres = boundary.conditions[mesh.facet_tags[i]]
        sdofs = dofmap.facet_scalar_dofs(facet)
        if disp.kind == "dirichlet_u":
            for a in range(mesh.dim):
                out.update(int(v) for v in dofmap.u_dofs(a, sdofs))
        if pres.kind == "dirichlet_p":
            out.update(int(v) for v in dofmap.p_dofs(sdofs))
    return np.array(sorted(out), dtype=np.int64)


def infsup_estimate(levels, dim: int, degree: int, params_raw: MaterialParams,
                    stab: StabilizationParams, boundary: BoundarySpec | None = None,
                    dense_cap: int = 3000) -> list:
    """Discrete inf-sup constants beta_h per refinement level.

    beta_h is the smallest singular value of N^{-1/2} A_h N^{-1/2} on the
    Dirichlet-free dofs, with N the Gram matrix of the discrete energy norm.
    """
    params = derive_coefficients(params_raw)
    betas = []
    for n in levels:
        mesh = _unit_mesh(dim, n)
        geom = build_geometry(mesh)
        dofmap = build_dofmap(mesh, degree)
        if dofmap.n_dofs > dense_cap:
            raise ValueError(f"level n={n} exceeds dense cap {dense_cap}")
        if boundary is None:
            exact = manufactured_2d(params) if dim == 2 else manufactured_3d(params)
            bnd = manufactured_boundary(exact)
        else:
            bnd = boundary
        blocks = assemble_field_blocks(mesh, geom, dofmap, params)
        system = assemble_operator(mesh, dofmap, params, stab, geom=geom,
                                   blocks=blocks)
        N = unorm_gram(mesh, dofmap, params, stab=stab, geom=geom, blocks=blocks)
        fixed = _constrained_dofs(mesh, dofmap, bnd)
        free = np.setdiff1d(np.arange(dofmap.n_dofs), fixed)
        A = system.matrix.to_scipy().tocsc()[free][:, free].toarray()
        Nf = N.tocsc()[free][:, free].toarray()
        evals, evecs = scipy.linalg.eigh(Nf)
        if evals.min() <= 0:
            raise ValueError("energy-norm Gram matrix is not positive definite")
        N_inv_half = (evecs / np.sqrt(evals)) @ evecs.T
        sv = scipy.linalg.svdvals(N_inv_half @ A @ N_inv_half)
        betas.append(float(sv.min()))
    return betas
