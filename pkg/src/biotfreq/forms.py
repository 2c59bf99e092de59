"""Material coefficients and assembly of the coupled (u, p, phi) system.

The discrete operator couples displacement u, fluid pressure p, and total
pressure phi on equal-order continuous P_k spaces.  With component-major
displacement blocks, the (test row, trial column) structure is

    u   [ -w^2 rho M + 2 mu_e E + s1*RR |        0        | -B^T - s1*RG ]
    p   [              0               | i(th/la)M + cK/(mf w a) + d2 K2 | -(i/la) M ]
    phi [        B - s1*RG^T           |    -(1/la) M     | (1/la) M + s1 K2 ]

where RR, RG, K2 are the element-wise h_T^2-weighted stabilization grams
built from the momentum residual R(v, xi) = w^2 rho v + 2 mu_e div eps(v)
- grad xi and from grad p, and s1 = delta1 / (2 mu_e).  The 1/(2 mu_e)
factor keeps delta1 dimensionless: the residual carries units of force per
volume, so the raw h^2-weighted product would otherwise scale with the
elastic modulus.  All element integrals are real (real basis); complex
coefficients scale them, with test functions conjugated in the underlying
sesquilinear forms.

The flow equation is scaled by 1/(omega*alpha), so the boundary flux and
pressure sources enter the load with that same coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .fem import CellBasis, DofMap, ReferenceElement, quadrature_rule
from .linalg import ComplexCsrMatrix
from .mesh import GeomCache, Mesh, build_geometry


@dataclass
class MaterialParams:
    """Physical inputs and derived coefficients (CGS units).

    kappa may be a scalar (single region) or a dict mapping region label
    to permeability.  Derived values are filled by derive_coefficients.
    """

    E: float                     # Young modulus, dyn/cm^2
    nu: float                    # Poisson ratio
    mu_f: float                  # fluid viscosity, Poise
    kappa: object                # permeability, cm^2 (scalar or {region: value})
    omega: float                 # angular frequency, rad/s
    rho: float                   # density, g/cm^3
    alpha: float = 1.0           # Biot-Willis coefficient
    B: float = 1.0               # Skempton coefficient
    length_scale: float = 1.0    # H1-norm length scale, cm
    mu_e: float = None
    lam: float = None
    s_eps: float = None
    theta: float = None

    def kappa_of_region(self, region: int) -> float:
        if isinstance(self.kappa, dict):
            try:
                return float(self.kappa[region])
            except KeyError:
                raise KeyError(f"no permeability given for region {region}")
        return float(self.kappa)

    def kappa_per_cell(self, mesh: Mesh) -> np.ndarray:
        if isinstance(self.kappa, dict):
            values = self.kappa
            out = np.empty(mesh.n_cells)
            for region in np.unique(mesh.cell_regions):
                if int(region) not in values:
                    raise KeyError(f"no permeability given for region {int(region)}")
                out[mesh.cell_regions == region] = float(values[int(region)])
            return out
        return np.full(mesh.n_cells, float(self.kappa))


def derive_coefficients(params: MaterialParams) -> MaterialParams:
    """Validate raw inputs and fill mu_e, lam, s_eps, theta.

    theta is cross-checked against its parameter-level simplification
    1 + 3 nu (1 - alpha B) / (B (1 + nu)).
    """
    p = params
    if p.E <= 0:
        raise ValueError("E must be positive")
    if not 0.0 < p.nu < 0.5:
        raise ValueError("nu must lie in (0, 0.5)")
    if p.mu_f <= 0 or p.rho <= 0 or p.omega <= 0:
        raise ValueError("mu_f, rho, omega must be positive")
    if not 0.0 < p.alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0.0 < p.B <= 1.0:
        raise ValueError("B must lie in (0, 1]")
    kappas = p.kappa.values() if isinstance(p.kappa, dict) else [p.kappa]
    if any(k <= 0 for k in kappas):
        raise ValueError("kappa must be positive")

    mu_e = p.E / (2.0 * (1.0 + p.nu))
    lam = p.E * p.nu / ((1.0 + p.nu) * (1.0 - 2.0 * p.nu))
    s_eps = 3.0 * p.alpha * (1.0 - p.alpha * p.B) * (1.0 - 2.0 * p.nu) / (p.B * p.E)
    theta = s_eps * lam / p.alpha + 1.0
    theta_alt = 1.0 + 3.0 * p.nu * (1.0 - p.alpha * p.B) / (p.B * (1.0 + p.nu))
    if abs(theta - theta_alt) > 1e-12 * abs(theta):
        raise AssertionError("theta forms disagree beyond round-off")
    return replace(p, mu_e=mu_e, lam=lam, s_eps=s_eps, theta=theta)


@dataclass
class StabilizationParams:
    """Residual (delta1) and pressure-gradient (delta2) stabilization weights."""

    delta1: float = 0.5
    delta2: float = 0.0

    def __post_init__(self):
        if self.delta1 < 0 or self.delta2 < 0:
            raise ValueError("stabilization parameters must be nonnegative")


DISPLACEMENT_KINDS = ("dirichlet_u", "traction")
PRESSURE_KINDS = ("dirichlet_p", "flux")


@dataclass
class BoundaryCondition:
    kind: str
    value: object    # callable or constant; natural conditions get (points, normal)


def _wrap_vector(value, dim):
    if callable(value):
        return value
    const = np.asarray(value, dtype=np.complex128).reshape(dim)

    def fn(points, normal=None):
        return np.broadcast_to(const, (len(points), dim)).copy()
    return fn


def _wrap_scalar(value):
    if callable(value):
        return value
    const = complex(value)

    def fn(points, normal=None):
        return np.full(len(points), const, dtype=np.complex128)
    return fn


@dataclass
class BoundarySpec:
    """Per-tag boundary conditions: one displacement-type, one pressure-type."""

    conditions: dict   # tag -> (BoundaryCondition displacement, BoundaryCondition pressure)

    def validate(self, mesh: Mesh) -> None:
        tags = mesh.tags()
        missing = tags - set(self.conditions)
        if missing:
            raise ValueError(f"boundary tags without conditions: {sorted(map(str, missing))}")
        unknown = set(self.conditions) - tags
        if unknown:
            raise ValueError(f"unknown boundary tags in spec: {sorted(map(str, unknown))}")
        for tag, (disp, pres) in self.conditions.items():
            if disp.kind not in DISPLACEMENT_KINDS:
                raise ValueError(f"tag {tag}: bad displacement condition {disp.kind}")
            if pres.kind not in PRESSURE_KINDS:
                raise ValueError(f"tag {tag}: bad pressure condition {pres.kind}")


def boundary_spec(mesh_dim: int, table: dict) -> BoundarySpec:
    """Build a BoundarySpec from {tag: (disp_kind, disp_value, pres_kind, pres_value)}."""
    conds = {}
    for tag, (dk, dv, pk, pv) in table.items():
        dv = _wrap_vector(dv, mesh_dim)
        pv = _wrap_scalar(pv)
        conds[tag] = (BoundaryCondition(dk, dv), BoundaryCondition(pk, pv))
    return BoundarySpec(conds)


@dataclass
class FieldBlocks:
    """Real element-integral grams shared by the operator, loads, and norms.

    All matrices are scipy CSR on scalar (n_s) or vector (d*n_s) index sets:
      M_s     scalar mass
      K_s     scalar stiffness
      M_kap   kappa-weighted scalar mass (per-cell kappa)
      K_kap   kappa-weighted scalar stiffness
      K_h2    h_T^2-weighted scalar stiffness
      M_vec   vector mass
      E_eps   strain-strain gram  (eps(u), eps(v))
      B_div   (div u, psi):  rows scalar, cols vector
      G_RR    h_T^2-weighted momentum-residual gram (vector x vector)
      G_Rg    h_T^2-weighted (R_u(Phi_J), grad psi_m) (vector x scalar)
    """

    M_s: sp.csr_matrix
    K_s: sp.csr_matrix
    M_kap: sp.csr_matrix
    K_kap: sp.csr_matrix
    K_h2: sp.csr_matrix
    M_vec: sp.csr_matrix
    E_eps: sp.csr_matrix
    B_div: sp.csr_matrix
    G_RR: sp.csr_matrix
    G_Rg: sp.csr_matrix


def _scatter(local, rows_ids, cols_ids, shape):
    """Accumulate (n_c, A, B) local blocks into CSR via COO duplicates."""
    n_c, A, B = local.shape
    rows = np.repeat(rows_ids[:, :, None], B, axis=2).ravel()
    cols = np.repeat(cols_ids[:, None, :], A, axis=1).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()


def assemble_field_blocks(mesh: Mesh, geom: GeomCache, dofmap: DofMap,
                          params: MaterialParams) -> FieldBlocks:
    """Assemble the real building-block matrices by mapped quadrature."""
    d = mesh.dim
    k = dofmap.degree
    rule = quadrature_rule(d, 2 * k)
    basis = CellBasis(mesh, geom, rule, k)
    phi, grad, hess, wdet = basis.phi, basis.grad, basis.hess, basis.wdet
    nl = dofmap.n_local
    n_s = dofmap.n_scalar
    n_c = mesh.n_cells
    kap = params.kappa_per_cell(mesh)
    h2 = geom.diameters ** 2

    M_loc = np.einsum("cq,ql,qm->clm", wdet, phi, phi)
    K_loc = np.einsum("cq,cqla,cqma->clm", wdet, grad, grad)
    G2 = np.einsum("cq,cqla,cqmb->clmab", wdet, grad, grad)
    GP = np.einsum("cq,cqla,qm->calm", wdet, grad, phi)

    # strain gram, component-major vector dofs (a, l) -> a*nl + l
    E_loc = np.zeros((n_c, d * nl, d * nl))
    for a in range(d):
        for b in range(d):
            blk = 0.5 * G2[:, :, :, b, a]
            if a == b:
                blk = blk + 0.5 * K_loc
            E_loc[:, a * nl:(a + 1) * nl, b * nl:(b + 1) * nl] = blk

    Mv_loc = np.zeros((n_c, d * nl, d * nl))
    for a in range(d):
        Mv_loc[:, a * nl:(a + 1) * nl, a * nl:(a + 1) * nl] = M_loc

    # B_div[l, (a m)] = int psi_l d_a phi_m
    B_loc = np.transpose(GP, (0, 3, 1, 2)).reshape(n_c, nl, d * nl)

    # momentum residual of vector basis functions at quadrature points:
    # Ru[c, q, (a l), i] = w^2 rho phi_l delta_ia + mu_e (H[l]_ia + delta_ia tr H[l])
    w2rho = params.omega ** 2 * params.rho
    mu_e = params.mu_e
    trH = np.trace(hess, axis1=2, axis2=3)
    n_q = rule.n_points
    Ru = np.zeros((n_c, n_q, d * nl, d))
    for a in range(d):
        sl = slice(a * nl, (a + 1) * nl)
        Ru[:, :, sl, a] += w2rho * phi[None, :, :]
        # 2 mu_e div eps(phi e_a) = mu_e (grad d_a phi + e_a laplace phi), constant in q
        Ru[:, :, sl, :] += mu_e * hess[:, None, :, :, a]
        Ru[:, :, sl, a] += mu_e * trH[:, None, :]

    wdet_h2 = wdet * h2[:, None]
    GRR_loc = np.einsum("cq,cqJi,cqKi->cJK", wdet_h2, Ru, Ru)
    GRg_loc = np.einsum("cq,cqJi,cqmi->cJm", wdet_h2, Ru, grad)
    Kh2_loc = K_loc * h2[:, None, None]

    sdofs = dofmap.cell_dofs
    vdofs = np.concatenate([a * n_s + sdofs for a in range(d)], axis=1)

    ss = (n_s, n_s)
    vv = (d * n_s, d * n_s)
    return FieldBlocks(
        M_s=_scatter(M_loc, sdofs, sdofs, ss),
        K_s=_scatter(K_loc, sdofs, sdofs, ss),
        M_kap=_scatter(M_loc * kap[:, None, None], sdofs, sdofs, ss),
        K_kap=_scatter(K_loc * kap[:, None, None], sdofs, sdofs, ss),
        K_h2=_scatter(Kh2_loc, sdofs, sdofs, ss),
        M_vec=_scatter(Mv_loc, vdofs, vdofs, vv),
        E_eps=_scatter(E_loc, vdofs, vdofs, vv),
        B_div=_scatter(B_loc, sdofs, vdofs, (n_s, d * n_s)),
        G_RR=_scatter(GRR_loc, vdofs, vdofs, vv),
        G_Rg=_scatter(GRg_loc, vdofs, sdofs, (d * n_s, n_s)),
    )


@dataclass
class BiotSystem:
    """Assembled operator, load, and Dirichlet constraints."""

    matrix: ComplexCsrMatrix
    load: np.ndarray
    dofmap: DofMap
    dirichlet: dict = field(default_factory=dict)   # dof -> complex value
    constrained: bool = False


def assemble_operator(mesh: Mesh, dofmap: DofMap, params: MaterialParams,
                      stab: StabilizationParams,
                      geom: GeomCache | None = None,
                      blocks: FieldBlocks | None = None) -> BiotSystem:
    """Assemble the complex block operator (no boundary data applied)."""
    if params.mu_e is None:
        raise ValueError("material coefficients not derived")
    if geom is None:
        geom = build_geometry(mesh)
    if blocks is None:
        blocks = assemble_field_blocks(mesh, geom, dofmap, params)
    d = mesh.dim
    n_s = dofmap.n_scalar
    n = dofmap.n_dofs
    om, rho, mu_e, lam = params.omega, params.rho, params.mu_e, params.lam
    th, mf, al = params.theta, params.mu_f, params.alpha
    s1 = stab.delta1 / (2.0 * mu_e)
    d2 = stab.delta2

    A_uu = (-om ** 2 * rho) * blocks.M_vec + (2.0 * mu_e) * blocks.E_eps \
        + s1 * blocks.G_RR
    A_uphi = -blocks.B_div.T - s1 * blocks.G_Rg
    A_pp = (1j * th / lam) * blocks.M_s.astype(complex) \
        + (1.0 / (mf * om * al)) * blocks.K_kap \
        + (d2 / (mf * al * om)) * blocks.K_h2
    A_pphi = (-1j / lam) * blocks.M_s.astype(complex)
    A_phiu = blocks.B_div - s1 * blocks.G_Rg.T
    A_phip = (-1.0 / lam) * blocks.M_s
    A_phiphi = (1.0 / lam) * blocks.M_s + s1 * blocks.K_h2

    z_su = sp.csr_matrix((n_s, d * n_s))
    z_ss = sp.csr_matrix((n_s, n_s))
    A = sp.bmat([[A_uu, z_su.T, A_uphi],
                 [z_su, A_pp, A_pphi],
                 [A_phiu, A_phip, A_phiphi]], format="csr").astype(np.complex128)
    return BiotSystem(matrix=ComplexCsrMatrix.from_scipy(A),
                      load=np.zeros(n, dtype=np.complex128), dofmap=dofmap)


def assemble_load(mesh: Mesh, dofmap: DofMap, params: MaterialParams,
                  boundary: BoundarySpec, body_forces=None,
                  geom: GeomCache | None = None) -> np.ndarray:
    """Facet quadrature of traction/flux data plus cell quadrature of sources.

    body_forces, when given, is a pair (f_u, f_p) of callables on point
    arrays.  The pressure source and the boundary flux both carry the
    1/(omega*alpha) scaling of the flow equation.
    """
    boundary.validate(mesh)
    if geom is None:
        geom = build_geometry(mesh)
    d = mesh.dim
    k = dofmap.degree
    n_s = dofmap.n_scalar
    F = np.zeros(dofmap.n_dofs, dtype=np.complex128)
    scale_p = 1.0 / (params.omega * params.alpha)

    if body_forces is not None:
        f_u, f_p = body_forces
        rule = quadrature_rule(d, min(2 * k + 2, 6))
        basis = CellBasis(mesh, geom, rule, k)
        pts = basis.points.reshape(-1, d)
        fu = np.asarray(f_u(pts), dtype=np.complex128).reshape(mesh.n_cells, rule.n_points, d)
        fp = np.asarray(f_p(pts), dtype=np.complex128).reshape(mesh.n_cells, rule.n_points)
        Fu_loc = np.einsum("cq,cqa,ql->cal", basis.wdet, fu, basis.phi)
        Fp_loc = np.einsum("cq,cq,ql->cl", basis.wdet, fp, basis.phi)
        for a in range(d):
            np.add.at(F, a * n_s + dofmap.cell_dofs, Fu_loc[:, a, :])
        np.add.at(F, d * n_s + dofmap.cell_dofs, scale_p * Fp_loc)

    frule = quadrature_rule(d - 1, min(2 * k + 2, 6))
    elem = ReferenceElement(d, k)
    for i, facet in enumerate(mesh.boundary_facets):
        tag = mesh.facet_tags[i]
        disp, pres = boundary.conditions[tag]
        if disp.kind != "traction" and pres.kind != "flux":
            continue
        fverts = mesh.vertices[facet]
        qpts = frule.points_bary @ fverts          # (n_q, d)
        wts = frule.weights * (geom.facet_measure[i] / _ref_measure(d - 1))
        cell = geom.facet_cells[i]
        ref = (qpts - geom.cell_origin[cell]) @ geom.inv_jac[cell].T
        vals = elem.eval_basis(ref)                # (n_q, n_l)
        cdofs = dofmap.cell_dofs[cell]
        normal = geom.facet_normals[i]
        if disp.kind == "traction":
            g = np.asarray(disp.value(qpts, normal), dtype=np.complex128)
            loc = np.einsum("q,qa,ql->al", wts, g, vals)
            for a in range(d):
                np.add.at(F, a * n_s + cdofs, loc[a])
        if pres.kind == "flux":
            g = np.asarray(pres.value(qpts, normal), dtype=np.complex128)
            loc = np.einsum("q,q,ql->l", wts, g, vals)
            np.add.at(F, d * n_s + cdofs, scale_p * loc)
    return F


def _ref_measure(dim: int) -> float:
    return {1: 1.0, 2: 0.5}[dim]


def residual_stabilization_load(mesh: Mesh, dofmap: DofMap, params: MaterialParams,
                                stab: StabilizationParams, f_u,
                                geom: GeomCache | None = None) -> np.ndarray:
    """Source term of the residual stabilization for a forced momentum equation.

    The delta1 term is consistent only when R(u, phi) vanishes at the exact
    solution; with an injected body force f_u the residual there equals
    -f_u, so the load gains

        - delta1/(2 mu_e) sum_T h_T^2 (f_u, R(v, xi))_T.

    Returns the load contribution (zero when delta1 = 0).
    """
    F = np.zeros(dofmap.n_dofs, dtype=np.complex128)
    if stab.delta1 == 0.0:
        return F
    if geom is None:
        geom = build_geometry(mesh)
    d = mesh.dim
    k = dofmap.degree
    n_s = dofmap.n_scalar
    rule = quadrature_rule(d, min(2 * k + 2, 6))
    basis = CellBasis(mesh, geom, rule, k)
    pts = basis.points.reshape(-1, d)
    fu = np.asarray(f_u(pts), dtype=np.complex128).reshape(mesh.n_cells,
                                                           rule.n_points, d)
    w = basis.wdet * geom.diameters[:, None] ** 2
    w2rho = params.omega ** 2 * params.rho
    mu_e = params.mu_e
    s1 = stab.delta1 / (2.0 * mu_e)
    trH = np.trace(basis.hess, axis1=2, axis2=3)
    # u-test rows: -s1 h^2 (f_u, w^2 rho Phi + 2 mu_e div eps(Phi))
    t_mass = w2rho * np.einsum("cq,cqa,ql->cal", w, fu, basis.phi)
    t_hess = mu_e * np.einsum("cq,cqi,clia->cal", w, fu, basis.hess)
    t_tr = mu_e * np.einsum("cq,cqa,cl->cal", w, fu, trH)
    loc_u = -s1 * (t_mass + t_hess + t_tr)
    for a in range(d):
        np.add.at(F, a * n_s + dofmap.cell_dofs, loc_u[:, a, :])
    # phi-test rows: -s1 h^2 (f_u, -grad xi) = +s1 h^2 (f_u, grad xi)
    loc_phi = s1 * np.einsum("cq,cqi,cqli->cl", w, fu, basis.grad)
    np.add.at(F, (d + 1) * n_s + dofmap.cell_dofs, loc_phi)
    return F


def dirichlet_constraints(mesh: Mesh, dofmap: DofMap, boundary: BoundarySpec,
                          geom: GeomCache | None = None) -> dict:
    """Collect constrained dofs and their nodal trace values.

    Dirichlet values are interpolated at the scalar dof coordinates.  A dof
    reached from two facets must receive consistent values.
    """
    boundary.validate(mesh)
    d = mesh.dim
    out: dict = {}

    def put(dof, value):
        if dof in out and abs(out[dof] - value) > 1e-12 * (1.0 + abs(value)):
            raise ValueError(f"conflicting Dirichlet values on dof {dof}")
        out[dof] = value

    for i, facet in enumerate(mesh.boundary_facets):
        tag = mesh.facet_tags[i]
        disp, pres = boundary.conditions[tag]
        sdofs = dofmap.facet_scalar_dofs(facet)
        coords = dofmap.scalar_coords[sdofs]
        if disp.kind == "dirichlet_u":
            vals = np.asarray(disp.value(coords), dtype=np.complex128)
            for a in range(d):
                for s, v in zip(sdofs, vals[:, a]):
                    put(int(dofmap.u_dofs(a, [s])[0]), complex(v))
        if pres.kind == "dirichlet_p":
            vals = np.asarray(pres.value(coords), dtype=np.complex128)
            for s, v in zip(sdofs, vals):
                put(int(dofmap.p_dofs([s])[0]), complex(v))
    return out


def apply_dirichlet(system: BiotSystem, constraints: dict) -> BiotSystem:
    """Row/column elimination: constrained rows become identity rows.

    Constrained columns are moved to the load, so the reduced system is the
    symmetric elimination of the constraints.
    """
    if system.constrained:
        raise ValueError("constraints already applied")
    A = system.matrix.to_scipy()
    F = system.load.copy()
    n = A.shape[0]
    idx = np.fromiter(constraints.keys(), dtype=np.int64, count=len(constraints))
    vals = np.fromiter(constraints.values(), dtype=np.complex128, count=len(constraints))
    x0 = np.zeros(n, dtype=np.complex128)
    x0[idx] = vals
    F = F - A @ x0
    keep = np.ones(n)
    keep[idx] = 0.0
    D_keep = sp.diags(keep)
    ones = np.zeros(n)
    ones[idx] = 1.0
    A = D_keep @ A @ D_keep + sp.diags(ones)
    F[idx] = vals
    return BiotSystem(matrix=ComplexCsrMatrix.from_scipy(A.tocsr()), load=F,
                      dofmap=system.dofmap, dirichlet=dict(constraints),
                      constrained=True)


def residual_momentum(mesh: Mesh, geom: GeomCache, dofmap: DofMap,
                      params: MaterialParams, cell: int,
                      coeff_u: np.ndarray, coeff_phi: np.ndarray,
                      rule=None) -> np.ndarray:
    """R(v, xi) = w^2 rho v + 2 mu_e div eps(v) - grad xi at cell quadrature points.

    coeff_u has component-major local displacement coefficients (d * n_local),
    coeff_phi the local total-pressure coefficients (n_local).
    """
    d = mesh.dim
    k = dofmap.degree
    if rule is None:
        rule = quadrature_rule(d, 2 * k)
    basis = CellBasis(mesh, geom, rule, k)
    nl = dofmap.n_local
    coeff_u = np.asarray(coeff_u, dtype=np.complex128).reshape(d, nl)
    coeff_phi = np.asarray(coeff_phi, dtype=np.complex128)
    phi_vals = basis.phi                      # (q, l)
    hess = basis.hess[cell]                   # (l, a, b)
    grad = basis.grad[cell]                   # (q, l, a)
    u_q = np.einsum("ql,il->qi", phi_vals, coeff_u)
    # div eps(u)_i = 0.5 * (laplace u_i + d_i div u), constant over the cell (k <= 2)
    grad_div = np.einsum("al,lai->i", coeff_u, hess)
    lap_u = np.einsum("al,lbb->a", coeff_u, hess)
    div_eps = 0.5 * (lap_u + grad_div)
    grad_phi = np.einsum("qla,l->qa", grad, coeff_phi)
    w2rho = params.omega ** 2 * params.rho
    return w2rho * u_q + 2.0 * params.mu_e * div_eps[None, :] - grad_phi
