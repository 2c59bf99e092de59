import numpy as np
import pytest

from biotfreq.fem import build_dofmap, quadrature_rule
from biotfreq.forms import (MaterialParams, StabilizationParams, apply_dirichlet,
                            assemble_field_blocks, assemble_load,
                            assemble_operator, boundary_spec,
                            derive_coefficients, dirichlet_constraints,
                            residual_momentum)
from biotfreq.mesh import build_geometry, generate_unit_square


def table1_params(**overrides):
    fields = dict(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
    fields.update(overrides)
    return derive_coefficients(MaterialParams(**fields))


def block(A, dofmap, row_field, col_field):
    return A.to_scipy().tocsc()[dofmap.field_slice(row_field), :] \
        .tocsr()[:, dofmap.field_slice(col_field)].toarray()


def u_block(A, dofmap, row="u", col="u"):
    n_s = dofmap.n_scalar
    d = dofmap.dim
    M = A.to_scipy().toarray()
    return M[0:d * n_s, 0:d * n_s]


class TestDeriveCoefficients:
    def test_table1_lame(self):
        p = table1_params()
        assert p.mu_e == pytest.approx(100.0 / 2.8, rel=1e-12)
        assert p.lam == pytest.approx(100.0 * 0.4 / (1.4 * 0.2), rel=1e-12)

    def test_incompressible_constituents(self):
        p = table1_params(alpha=1.0, B=1.0)
        assert p.s_eps == 0.0
        assert p.theta == 1.0

    def test_partial_skempton(self):
        p = table1_params(alpha=1.0, B=0.5)
        assert p.s_eps == pytest.approx(6e-3, rel=1e-12)
        assert p.theta == pytest.approx(6e-3 * p.lam + 1.0, rel=1e-12)
        assert p.theta == pytest.approx(1.857142857142857, rel=1e-9)

    def test_invalid_nu(self):
        with pytest.raises(ValueError):
            table1_params(nu=0.5)
        with pytest.raises(ValueError):
            table1_params(nu=0.0)

    def test_invalid_b(self):
        with pytest.raises(ValueError):
            table1_params(B=0.0)

    def test_theta_two_forms_random(self):
        # acceptance criterion 7: both algebraic forms over 1000 random tuples
        rng = np.random.default_rng(42)
        for _ in range(1000):
            E = 10.0 ** rng.uniform(-1, 5)
            nu = rng.uniform(0.01, 0.49)
            alpha = rng.uniform(0.05, 1.0)
            B = rng.uniform(0.05, 1.0)
            p = table1_params(E=E, nu=nu, alpha=alpha, B=B)
            theta_product = p.s_eps * p.lam / alpha + 1.0
            theta_simplified = 1.0 + 3.0 * nu * (1.0 - alpha * B) / (B * (1.0 + nu))
            assert abs(theta_product - theta_simplified) <= 1e-12 * abs(theta_product)

    def test_region_kappa(self):
        p = table1_params(kappa={0: 1e-3, 1: 1e-4})
        assert p.kappa_of_region(1) == 1e-4
        with pytest.raises(KeyError):
            p.kappa_of_region(7)


class TestOperatorStructure:
    def setup_method(self):
        self.mesh = generate_unit_square(1)
        self.geom = build_geometry(self.mesh)
        self.dofmap = build_dofmap(self.mesh, 1)
        self.params = table1_params()

    def assemble(self, d1=0.0, d2=0.0, params=None):
        return assemble_operator(self.mesh, self.dofmap, params or self.params,
                                 StabilizationParams(d1, d2), geom=self.geom)

    def test_dimension(self):
        sys = self.assemble()
        assert sys.matrix.shape == (16, 16)

    def test_up_block_zero(self):
        sys = self.assemble(d1=0.5, d2=0.1)
        dm = self.dofmap
        for comp in range(2):
            assert np.allclose(block(sys.matrix, dm, f"u{comp}", "p"), 0.0)
            assert np.allclose(block(sys.matrix, dm, "p", f"u{comp}"), 0.0)

    def test_phiphi_unstabilized_is_scaled_mass(self):
        sys = self.assemble()
        blocks = assemble_field_blocks(self.mesh, self.geom, self.dofmap, self.params)
        got = block(sys.matrix, self.dofmap, "phi", "phi")
        assert np.allclose(got, blocks.M_s.toarray() / self.params.lam, atol=1e-14)

    def test_p1_stabilization_identity(self):
        # for k=1 the residual reduces to w^2 rho v - grad xi, so the (u,u)
        # stabilized block equals the unstabilized one plus the scaled
        # h^2-weighted vector mass
        d1 = 0.7
        base = self.assemble()
        stabbed = self.assemble(d1=d1)
        blocks = assemble_field_blocks(self.mesh, self.geom, self.dofmap, self.params)
        p = self.params
        w4rho2 = (p.omega ** 2 * p.rho) ** 2
        h2 = self.geom.diameters ** 2
        assert np.allclose(h2, h2[0])   # uniform mesh
        expected = u_block(base.matrix, self.dofmap) \
            + d1 / (2 * p.mu_e) * w4rho2 * h2[0] * blocks.M_vec.toarray()
        assert np.allclose(u_block(stabbed.matrix, self.dofmap), expected,
                           atol=1e-12)

    def test_kappa_scaling_of_pressure_stiffness(self):
        sys1 = self.assemble(params=self.params)
        sys10 = self.assemble(params=table1_params(kappa=1.0))
        dm = self.dofmap
        d1 = block(sys1.matrix, dm, "p", "p")
        d10 = block(sys10.matrix, dm, "p", "p")
        blocks = assemble_field_blocks(self.mesh, self.geom, dm, self.params)
        mass_part = 1j * self.params.theta / self.params.lam * blocks.M_s.toarray()
        np.testing.assert_allclose(d10 - mass_part, 10.0 * (d1 - mass_part),
                                   rtol=1e-13, atol=1e-16)
        # every other block is bit-identical
        for rf, cf in (("u0", "u0"), ("u1", "phi"), ("phi", "u0"),
                       ("phi", "p"), ("p", "phi"), ("phi", "phi")):
            b1 = block(sys1.matrix, dm, rf, cf)
            b10 = block(sys10.matrix, dm, rf, cf)
            assert np.array_equal(b1, b10)

    def test_hermitian_part_structure(self):
        sys = self.assemble()
        dm = self.dofmap
        uu = u_block(sys.matrix, dm)
        assert np.allclose(uu.imag, 0.0, atol=1e-14)
        assert np.allclose(uu, uu.T, atol=1e-12)
        pp = block(sys.matrix, dm, "p", "p")
        blocks = assemble_field_blocks(self.mesh, self.geom, dm, self.params)
        M = blocks.M_s.toarray()
        K = (self.params.kappa / (self.params.mu_f * self.params.omega
                                  * self.params.alpha)) * blocks.K_s.toarray()
        assert np.allclose(pp, 1j * self.params.theta / self.params.lam * M + K,
                           atol=1e-13)
        phiphi = block(sys.matrix, dm, "phi", "phi")
        assert np.allclose(phiphi.imag, 0.0, atol=1e-14)
        eigs = np.linalg.eigvalsh(phiphi.real)
        assert eigs.min() > 0.0

    def test_adjoint_divergence_coupling(self):
        # with delta1 = 0 the (phi,u) block is minus the transpose of (u,phi)
        sys = self.assemble()
        dm = self.dofmap
        n_s = dm.n_scalar
        A = sys.matrix.to_scipy().toarray()
        A_uphi = A[0:2 * n_s, 3 * n_s:4 * n_s]
        A_phiu = A[3 * n_s:4 * n_s, 0:2 * n_s]
        assert np.allclose(A_phiu, -A_uphi.T, atol=1e-14)

    def test_stabilization_is_psd(self):
        base = self.assemble()
        stabbed = self.assemble(d1=0.5)
        S = stabbed.matrix.to_scipy().toarray() - base.matrix.to_scipy().toarray()
        assert np.allclose(S.imag, 0.0, atol=1e-14)
        eigs = np.linalg.eigvalsh(0.5 * (S + S.T).real)
        assert eigs.min() > -1e-12

    def test_missing_region_kappa(self):
        params = table1_params(kappa={5: 1.0})
        with pytest.raises(KeyError):
            self.assemble(params=params)


class TestLoads:
    def setup_method(self):
        self.mesh = generate_unit_square(2)
        self.geom = build_geometry(self.mesh)
        self.dofmap = build_dofmap(self.mesh, 1)
        self.params = table1_params()

    def zero_boundary(self):
        return boundary_spec(2, {
            tag: ("traction", [0.0, 0.0], "flux", 0.0)
            for tag in ("left", "right", "bottom", "top")})

    def test_zero_data_zero_load(self):
        F = assemble_load(self.mesh, self.dofmap, self.params, self.zero_boundary())
        assert np.allclose(F, 0.0)

    def test_constant_bottom_traction(self):
        c = 1e-2
        table = {tag: ("traction", [0.0, 0.0], "flux", 0.0)
                 for tag in ("left", "right", "top")}
        table["bottom"] = ("traction", [0.0, c], "flux", 0.0)
        F = assemble_load(self.mesh, self.dofmap, self.params, boundary_spec(2, table))
        n_s = self.dofmap.n_scalar
        assert F[0:n_s].sum() == pytest.approx(0.0, abs=1e-15)
        assert F[n_s:2 * n_s].sum() == pytest.approx(c, rel=1e-12)  # |Gamma| = 1

    def test_constant_body_force_partition_of_unity(self):
        f = np.array([0.3, -1.2])

        def f_u(pts):
            return np.broadcast_to(f, (len(pts), 2)).astype(complex)

        def f_p(pts):
            return np.zeros(len(pts), complex)

        F = assemble_load(self.mesh, self.dofmap, self.params, self.zero_boundary(),
                          body_forces=(f_u, f_p))
        n_s = self.dofmap.n_scalar
        assert F[0:n_s].sum() == pytest.approx(f[0], rel=1e-12)
        assert F[n_s:2 * n_s].sum() == pytest.approx(f[1], rel=1e-12)

    def test_pressure_source_scaling(self):
        # the pressure source carries 1/(omega*alpha)
        params = table1_params(omega=4.0, alpha=0.5)

        def f_p(pts):
            return np.ones(len(pts), complex)

        def f_u(pts):
            return np.zeros((len(pts), 2), complex)

        F = assemble_load(self.mesh, self.dofmap, params, self.zero_boundary(),
                          body_forces=(f_u, f_p))
        n_s = self.dofmap.n_scalar
        total_p = F[2 * n_s:3 * n_s].sum()
        assert total_p == pytest.approx(1.0 / (4.0 * 0.5), rel=1e-12)

    def test_flux_scaling(self):
        params = table1_params(omega=2.0, alpha=0.25)
        table = {tag: ("traction", [0.0, 0.0], "flux", 0.0)
                 for tag in ("left", "right", "top")}
        table["bottom"] = ("traction", [0.0, 0.0], "flux", 3.0)
        F = assemble_load(self.mesh, self.dofmap, params, boundary_spec(2, table))
        n_s = self.dofmap.n_scalar
        assert F[2 * n_s:3 * n_s].sum() == pytest.approx(3.0 / (2.0 * 0.25), rel=1e-12)

    def test_unknown_tag_rejected(self):
        table = {tag: ("traction", [0.0, 0.0], "flux", 0.0)
                 for tag in ("left", "right", "bottom", "top")}
        table["lid"] = ("traction", [0.0, 0.0], "flux", 0.0)
        with pytest.raises(ValueError, match="unknown boundary tags"):
            assemble_load(self.mesh, self.dofmap, self.params, boundary_spec(2, table))

    def test_uncovered_tag_rejected(self):
        table = {tag: ("traction", [0.0, 0.0], "flux", 0.0)
                 for tag in ("left", "right", "bottom")}
        with pytest.raises(ValueError, match="without conditions"):
            assemble_load(self.mesh, self.dofmap, self.params, boundary_spec(2, table))


class TestDirichlet:
    def setup_method(self):
        self.mesh = generate_unit_square(2)
        self.geom = build_geometry(self.mesh)
        self.dofmap = build_dofmap(self.mesh, 1)
        self.params = table1_params()

    def all_dirichlet_zero(self):
        return boundary_spec(2, {
            tag: ("dirichlet_u", [0.0, 0.0], "dirichlet_p", 0.0)
            for tag in ("left", "right", "bottom", "top")})

    def test_zero_dirichlet_zero_load_zero_solution(self):
        from biotfreq.linalg import direct_solve
        bnd = self.all_dirichlet_zero()
        sys = assemble_operator(self.mesh, self.dofmap, self.params,
                                StabilizationParams(0.5, 0.0), geom=self.geom)
        sys.load = assemble_load(self.mesh, self.dofmap, self.params, bnd)
        sys = apply_dirichlet(sys, dirichlet_constraints(self.mesh, self.dofmap, bnd))
        x, _ = direct_solve(sys.matrix, sys.load)
        assert np.allclose(x, 0.0, atol=1e-12)

    def test_single_constraint_value_exact(self):
        sys = assemble_operator(self.mesh, self.dofmap, self.params,
                                StabilizationParams(0.5, 0.0), geom=self.geom)
        constrained = apply_dirichlet(sys, {3: 1.0 + 1.0j})
        from biotfreq.linalg import direct_solve
        x, _ = direct_solve(constrained.matrix, constrained.load)
        assert x[3] == pytest.approx(1.0 + 1.0j, abs=1e-12)

    def test_constrained_rows_are_identity(self):
        sys = assemble_operator(self.mesh, self.dofmap, self.params,
                                StabilizationParams(0.0, 0.0), geom=self.geom)
        constrained = apply_dirichlet(sys, {0: 2.0, 5: -1.0j})
        A = constrained.matrix.to_scipy().toarray()
        for dof, val in ((0, 2.0), (5, -1.0j)):
            row = np.zeros(self.dofmap.n_dofs, complex)
            row[dof] = 1.0
            assert np.allclose(A[dof], row)
            assert np.allclose(A[:, dof], row)
            assert constrained.load[dof] == val

    def test_manufactured_constraint_count(self):
        # Gamma_p = {left, top} constrains p dofs; Gamma_u = {right, bottom}
        # constrains both displacement components
        from biotfreq.manufactured import manufactured_2d, manufactured_boundary
        exact = manufactured_2d(self.params)
        bnd = manufactured_boundary(exact)
        constraints = dirichlet_constraints(self.mesh, self.dofmap, bnd)
        # brute-force facet dof enumeration
        p_nodes, u_nodes = set(), set()
        for i, facet in enumerate(self.mesh.boundary_facets):
            tag = self.mesh.facet_tags[i]
            for v in facet:
                if tag in ("left", "top"):
                    p_nodes.add(int(v))
                if tag in ("right", "bottom"):
                    u_nodes.add(int(v))
        assert len(constraints) == len(p_nodes) + 2 * len(u_nodes)

    def test_conflicting_values_rejected(self):
        from biotfreq.forms import BoundaryCondition, BoundarySpec
        table = {tag: ("traction", [0.0, 0.0], "flux", 0.0)
                 for tag in ("left", "top")}
        spec = boundary_spec(2, table)
        spec.conditions["right"] = (
            BoundaryCondition("dirichlet_u",
                              lambda pts: np.ones((len(pts), 2), complex)),
            BoundaryCondition("flux", lambda pts, n: np.zeros(len(pts))))
        spec.conditions["bottom"] = (
            BoundaryCondition("dirichlet_u",
                              lambda pts: 2 * np.ones((len(pts), 2), complex)),
            BoundaryCondition("flux", lambda pts, n: np.zeros(len(pts))))
        with pytest.raises(ValueError, match="conflicting"):
            dirichlet_constraints(self.mesh, self.dofmap, spec)


class TestResidualMomentum:
    def setup_method(self):
        self.params = table1_params()

    def test_k1_constant_xi_zero_v(self):
        mesh = generate_unit_square(1)
        geom = build_geometry(mesh)
        dm = build_dofmap(mesh, 1)
        R = residual_momentum(mesh, geom, dm, self.params, 0,
                              np.zeros(6), np.ones(3))
        assert np.allclose(R, 0.0, atol=1e-14)

    def test_k1_linear_xi(self):
        mesh = generate_unit_square(1)
        geom = build_geometry(mesh)
        dm = build_dofmap(mesh, 1)
        coords = dm.scalar_coords[dm.cell_dofs[0]]
        slope = np.array([2.0, -3.0])
        xi = coords @ slope
        R = residual_momentum(mesh, geom, dm, self.params, 0, np.zeros(6), xi)
        assert np.allclose(R, -slope, atol=1e-13)

    def test_k2_quadratic_div_eps_matches_symbolic(self):
        import sympy as sym
        mesh = generate_unit_square(1)
        geom = build_geometry(mesh)
        dm = build_dofmap(mesh, 2)
        x, y = sym.symbols("x y")
        u_expr = [x ** 2 + 2 * x * y, 3 * y ** 2 - x * y]
        div_u = sum(sym.diff(u_expr[i], v) for i, v in enumerate((x, y)))
        div_eps = [sym.Rational(1, 2) * (sym.diff(u_expr[i], x, 2)
                                         + sym.diff(u_expr[i], y, 2)
                                         + sym.diff(div_u, (x, y)[i]))
                   for i in range(2)]
        coords = dm.scalar_coords[dm.cell_dofs[0]]
        coeff_u = np.concatenate([
            [float(u_expr[a].subs({x: c[0], y: c[1]})) for c in coords]
            for a in range(2)])
        R = residual_momentum(mesh, geom, dm, self.params, 0, coeff_u, np.zeros(6))
        rule = quadrature_rule(2, 2 * dm.degree)
        from biotfreq.fem import CellBasis
        basis = CellBasis(mesh, geom, rule, 2)
        pts = basis.points[0]
        p = self.params
        for q, pt in enumerate(pts):
            ude = np.array([float(e.subs({x: pt[0], y: pt[1]})) for e in u_expr])
            de = np.array([float(e.subs({x: pt[0], y: pt[1]})) for e in div_eps])
            expected = p.omega ** 2 * p.rho * ude + 2 * p.mu_e * de
            assert np.allclose(R[q], expected, atol=1e-11)


def test_galerkin_orthogonality_delta2_zero():
    # acceptance criterion 6: residual of the solved constrained system
    # tested against 20 random discrete vectors
    from biotfreq.verification import solve_manufactured
    from biotfreq.forms import StabilizationParams
    params = table1_params()
    result, _ = solve_manufactured(2, 8, 1, params, StabilizationParams(0.5, 0.0))
    A = result.system.matrix.to_scipy()
    r = A @ result.solution - result.system.load
    rng = np.random.default_rng(7)
    scale = np.linalg.norm(result.system.load)
    for _ in range(20):
        v = rng.normal(size=len(r)) + 1j * rng.normal(size=len(r))
        rel = abs(np.vdot(v, r)) / (scale * np.linalg.norm(v))
        assert rel <= 1e-10
