import numpy as np
import pytest

from biotfreq.fem import build_dofmap
from biotfreq.forms import MaterialParams, StabilizationParams, derive_coefficients
from biotfreq.manufactured import manufactured_2d
from biotfreq.mesh import build_geometry, generate_unit_square
from biotfreq.verification import (ErrorReport, compute_error, convergence_study,
                                   elasticity_spectrum, evaluate_scalar,
                                   fit_slope, infsup_estimate, layered_experiment,
                                   layered_mesh, second_difference_sign_changes,
                                   solve_manufactured, split_fields, unorm,
                                   unorm_gram)


@pytest.fixture(scope="module")
def params():
    return derive_coefficients(MaterialParams(
        E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0))


class PolyExact:
    """Degree-k polynomial fields, exactly representable in P_k."""

    def __init__(self, params, degree):
        self.params = params
        self.degree = degree

    def u(self, pts):
        if self.degree == 1:
            ux = (1 + 2j) * pts[:, 0] + 0.5 * pts[:, 1]
            uy = -pts[:, 0] + (0.25 - 1j) * pts[:, 1]
        else:
            ux = pts[:, 0] ** 2 + (1 + 1j) * pts[:, 0] * pts[:, 1]
            uy = pts[:, 1] ** 2 - 2j * pts[:, 0] ** 2
        return np.column_stack([ux, uy])

    def grad_u(self, pts):
        m = len(pts)
        g = np.zeros((m, 2, 2), complex)
        if self.degree == 1:
            g[:, 0, 0] = 1 + 2j
            g[:, 0, 1] = 0.5
            g[:, 1, 0] = -1.0
            g[:, 1, 1] = 0.25 - 1j
        else:
            g[:, 0, 0] = 2 * pts[:, 0] + (1 + 1j) * pts[:, 1]
            g[:, 0, 1] = (1 + 1j) * pts[:, 0]
            g[:, 1, 0] = -4j * pts[:, 0]
            g[:, 1, 1] = 2 * pts[:, 1]
        return g

    def p(self, pts):
        if self.degree == 1:
            return (0.3 - 0.7j) + pts[:, 0] - 2.0 * pts[:, 1]
        return pts[:, 0] * pts[:, 1] + 1j * pts[:, 1] ** 2

    def grad_p(self, pts):
        m = len(pts)
        g = np.zeros((m, 2), complex)
        if self.degree == 1:
            g[:, 0] = 1.0
            g[:, 1] = -2.0
        else:
            g[:, 0] = pts[:, 1]
            g[:, 1] = pts[:, 0] + 2j * pts[:, 1]
        return g

    def phi(self, pts):
        tr = self.grad_u(pts)[:, 0, 0] + self.grad_u(pts)[:, 1, 1]
        return self.p(pts) - self.params.lam * tr

    def interpolate(self, dm):
        pts = dm.scalar_coords
        n_s = dm.n_scalar
        vec = np.zeros(dm.n_dofs, complex)
        uu = self.u(pts)
        vec[0:n_s], vec[n_s:2 * n_s] = uu[:, 0], uu[:, 1]
        vec[2 * n_s:3 * n_s] = self.p(pts)
        vec[3 * n_s:4 * n_s] = self.phi(pts)
        return vec


class TestComputeError:
    @pytest.mark.parametrize("degree", [1, 2])
    def test_representable_fields_give_zero_error(self, params, degree):
        mesh = generate_unit_square(3)
        dm = build_dofmap(mesh, degree)
        exact = PolyExact(params, degree)
        vec = exact.interpolate(dm)
        err = compute_error(mesh, dm, params, vec, exact)
        scale = unorm(vec, unorm_gram(mesh, dm, params))
        assert err.total <= 1e-12 * scale

    def test_total_is_root_sum_of_squares(self):
        rep = ErrorReport.from_squares(4.0, 9.0, 16.0, 0.1, 10)
        assert rep.total == pytest.approx(np.sqrt(29.0), rel=1e-15)
        assert rep.err_u == 2.0 and rep.err_p == 3.0 and rep.err_phi == 4.0

    def test_interpolation_orders(self, params):
        # Lagrange interpolants of the manufactured fields: L2 rate k+1,
        # H1-seminorm rate k (checked through the energy-norm pieces)
        exact = manufactured_2d(params)
        for k, expected_u in ((1, 1.0), (2, 2.0)):
            hs, eu, ep, ephi = [], [], [], []
            for n in (4, 8, 16, 32):
                mesh = generate_unit_square(n)
                dm = build_dofmap(mesh, k)
                err = compute_error(mesh, dm, params, exact.interpolate(dm), exact)
                hs.append(err.h_max)
                eu.append(err.err_u)
                ep.append(err.err_p)
                ephi.append(err.err_phi)
            assert fit_slope(hs, eu, 4) == pytest.approx(expected_u, abs=0.3)
            assert fit_slope(hs, ep, 4) == pytest.approx(expected_u, abs=0.3)
            # phi enters in L2 only: interpolation converges at k+1
            assert fit_slope(hs, ephi, 4) == pytest.approx(expected_u + 1.0, abs=0.3)


class TestUnormGram:
    def test_gram_matches_compute_error_for_fe_difference(self, params):
        # the Gram-based norm of (v - w) must match compute_error when the
        # "exact" fields are the FE function w itself
        mesh = generate_unit_square(3)
        dm = build_dofmap(mesh, 1)
        rng = np.random.default_rng(8)
        v = rng.normal(size=dm.n_dofs) + 1j * rng.normal(size=dm.n_dofs)
        gram = unorm_gram(mesh, dm, params)
        exact = PolyExact(params, 1)
        diff = v - exact.interpolate(dm)
        err = compute_error(mesh, dm, params, v, exact)
        assert err.total == pytest.approx(unorm(diff, gram), rel=1e-10)

    def test_stabilized_gram_is_positive_definite(self, params):
        mesh = generate_unit_square(2)
        dm = build_dofmap(mesh, 1)
        N = unorm_gram(mesh, dm, params, stab=StabilizationParams(0.5, 0.1))
        eigs = np.linalg.eigvalsh(N.toarray())
        assert eigs.min() > 0.0


class TestConvergence:
    def test_k2_beats_k1_at_same_level(self, params):
        _, err1 = solve_manufactured(2, 16, 1, params, StabilizationParams(0.5, 0.0))
        _, err2 = solve_manufactured(2, 16, 2, params, StabilizationParams(0.5, 0.0))
        assert err2.total < err1.total

    def test_monotone_decrease(self):
        raw = MaterialParams(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        res = convergence_study(2, 1, [4, 8, 16], raw, StabilizationParams(0.5, 0.0))
        totals = [r.total for r in res.reports]
        assert totals[0] > totals[1] > totals[2]

    def test_delta2_keeps_first_order(self):
        # the pressure stabilization adds an O(h^2) consistency error only
        raw = MaterialParams(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        res = convergence_study(2, 1, [4, 8, 16], raw, StabilizationParams(0.5, 0.01))
        assert res.slopes["total"] >= 0.85

    def test_nu_045_slope(self):
        raw = MaterialParams(E=100.0, nu=0.45, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        res = convergence_study(2, 1, [4, 8, 16], raw, StabilizationParams(0.5, 0.0))
        assert 0.85 <= res.slopes["total"] <= 1.4

    def test_needs_three_levels(self):
        raw = MaterialParams(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        with pytest.raises(ValueError):
            convergence_study(2, 1, [4, 8], raw, StabilizationParams(0.5, 0.0))

    def test_solver_failure_preserves_partial_results(self, monkeypatch):
        # fail the level-3 solve; the first two completed levels survive
        import biotfreq.verification as verif
        real = verif.solve_manufactured
        calls = []

        def flaky(dim, n, degree, params, stab, solver="direct", solver_opts=None):
            calls.append(n)
            if n >= 8:
                raise RuntimeError("injected solver failure")
            return real(dim, n, degree, params, stab, solver=solver,
                        solver_opts=solver_opts)

        monkeypatch.setattr(verif, "solve_manufactured", flaky)
        raw = MaterialParams(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        with pytest.raises(verif.StudyFailure) as exc:
            verif.convergence_study(2, 1, [2, 4, 8], raw,
                                    StabilizationParams(0.5, 0.0))
        partial = exc.value.partial
        assert partial.levels == [2, 4]
        assert len(partial.reports) == 2

    def test_gmres_nonconvergence_aborts_study(self):
        import biotfreq.verification as verif
        raw = MaterialParams(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        with pytest.raises(verif.StudyFailure):
            verif.convergence_study(2, 1, [2, 4, 8], raw,
                                    StabilizationParams(0.5, 0.0),
                                    solver="gmres",
                                    solver_opts={"max_iter": 2, "tol": 1e-12,
                                                 "preconditioner": "none"})

    def test_kappa_moderate_stabilization_agrees(self):
        # at kappa = 1e-1 the delta2 term is negligible: errors within 25%
        from biotfreq.verification import kappa_sweep
        raw = MaterialParams(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        rows = kappa_sweep(16, 1, [1e-1], [0.0, 0.01], raw)
        errs = [r["report"].total for r in rows]
        assert max(errs) / min(errs) <= 1.25

    def test_nu_sweep_reproduces_baseline_bit_identically(self, params):
        from biotfreq.verification import nu_sweep
        raw = MaterialParams(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        rows = nu_sweep(16, 1, [0.4], [0.0], raw)
        _, baseline = solve_manufactured(2, 16, 1, params,
                                         StabilizationParams(0.5, 0.0))
        assert rows[0]["report"].total == baseline.total


class TestSpectrum:
    def test_m_bar_zero_below_spectrum(self, params):
        mesh = generate_unit_square(4)
        rep = elasticity_spectrum(mesh, 1, params, 6, ("right", "bottom"))
        assert rep.m_bar == 0
        assert rep.gap > 0.0
        assert np.all(rep.eigenvalues > 0.0)

    def test_m_bar_counts_crossed_eigenvalues(self):
        raw = derive_coefficients(MaterialParams(
            E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=20.0, rho=1.0))
        mesh = generate_unit_square(4)
        rep = elasticity_spectrum(mesh, 1, raw, 6, ("right", "bottom"))
        # omega^2 = 400 exceeds the two smallest eigenvalues (~194, ~294)
        assert rep.m_bar == 2

    def test_refinement_monotonicity(self, params):
        rep4 = elasticity_spectrum(generate_unit_square(4), 1, params, 6,
                                   ("right", "bottom"))
        rep8 = elasticity_spectrum(generate_unit_square(8), 1, params, 6,
                                   ("right", "bottom"))
        assert np.all(rep8.eigenvalues <= rep4.eigenvalues + 1e-9)

    def test_requires_dirichlet(self, params):
        with pytest.raises(ValueError):
            elasticity_spectrum(generate_unit_square(2), 1, params, 4, ())


class TestInfsup:
    def test_identity_sanity(self):
        # operator = identity, norm = identity -> beta = 1
        import scipy.linalg
        A = np.eye(7)
        N = np.eye(7)
        evals, evecs = scipy.linalg.eigh(N)
        N_inv_half = (evecs / np.sqrt(evals)) @ evecs.T
        sv = scipy.linalg.svdvals(N_inv_half @ A @ N_inv_half)
        assert sv.min() == pytest.approx(1.0, abs=1e-14)

    def test_levels_do_not_degenerate(self):
        raw = MaterialParams(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        betas = infsup_estimate([2, 4], 2, 1, raw, StabilizationParams(0.5, 0.0))
        assert min(betas) >= 0.5 * max(betas)

    def test_dense_cap(self):
        raw = MaterialParams(E=100.0, nu=0.4, mu_f=1.0, kappa=0.1, omega=1.0, rho=1.0)
        with pytest.raises(ValueError):
            infsup_estimate([40], 2, 1, raw, StabilizationParams(0.5, 0.0),
                            dense_cap=100)


class TestLayered:
    def test_regions_by_band(self):
        mesh = layered_mesh(6)
        centroids = mesh.vertices[mesh.cells].mean(axis=1)
        for c, region in zip(centroids, mesh.cell_regions):
            assert region == min(int(c[1] * 3), 2)

    def test_small_run(self):
        res = layered_experiment(omegas=(25.0,), n=12, run_gmres=True,
                                 n_samples=40)[0]
        assert res.direct.solve_report.relative_residual < 1e-10
        assert res.iterative.solve_report.converged
        assert res.unorm_rel_diff < 1e-6
        assert res.profile_p[0] == pytest.approx(1e-2, abs=1e-10)
        assert np.all(np.isfinite(res.profile_p.view(float)))

    def test_point_evaluation(self, params):
        mesh = generate_unit_square(4)
        geom = build_geometry(mesh)
        dm = build_dofmap(mesh, 1)
        coeffs = dm.scalar_coords[:, 0] + 2.0 * dm.scalar_coords[:, 1]
        pts = np.array([[0.3, 0.7], [0.5, 0.5], [1.0, 1.0]])
        vals = evaluate_scalar(mesh, geom, dm, coeffs.astype(complex), pts)
        assert np.allclose(vals, pts[:, 0] + 2 * pts[:, 1], atol=1e-13)

    def test_point_outside_mesh(self, params):
        mesh = generate_unit_square(2)
        geom = build_geometry(mesh)
        dm = build_dofmap(mesh, 1)
        with pytest.raises(ValueError):
            evaluate_scalar(mesh, geom, dm, np.zeros(dm.n_scalar, complex),
                            np.array([[1.5, 0.5]]))


class TestSignChanges:
    def test_monotone_profile(self):
        y = np.linspace(0, 1, 50) ** 2
        assert second_difference_sign_changes(y) == 0

    def test_oscillating_profile(self):
        # second difference of sin is -sin: three interior zero crossings
        x = np.linspace(0, 4 * np.pi, 100)
        count = second_difference_sign_changes(np.sin(x))
        assert count == 3

    def test_noise_floor_ignored(self):
        y = np.ones(100)
        y[50] += 1e-14
        assert second_difference_sign_changes(y) == 0


def test_split_fields_roundtrip(params):
    mesh = generate_unit_square(2)
    dm = build_dofmap(mesh, 1)
    rng = np.random.default_rng(11)
    vec = rng.normal(size=dm.n_dofs) + 1j * rng.normal(size=dm.n_dofs)
    u, p, phi = split_fields(vec, dm)
    n_s = dm.n_scalar
    assert np.array_equal(u[0], vec[:n_s])
    assert np.array_equal(p, vec[2 * n_s:3 * n_s])
    assert np.array_equal(phi, vec[3 * n_s:])
