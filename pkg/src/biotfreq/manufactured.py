"""Closed-form exact solutions for verification on the unit square / cube.

The displacement components are polynomials and the pressure combines the
trigonometric profiles sin(pi x/2) cos(pi y/2) (real part) and
(1 - cos(pi x)) (1 + cos(pi y)) (imaginary part); the total pressure is
defined through phi = p - lambda * tr(eps(u)), so the three-field relation
holds identically and no source is needed in the constitutive equation.

The fields do not satisfy the homogeneous momentum/flow equations, so the
matching body forces

    f_u = -w^2 rho u - div(2 mu_e eps(u) - phi I)
    f_p = i (S_eps + alpha/lambda) w p - i w (alpha/lambda) phi
          - (kappa/mu_f) laplace p

are derived symbolically and injected as sources.  Natural boundary data
are generated from the same fields: the traction is (2 mu_e eps(u) -
phi I) n and the flux is (kappa/mu_f) dp/dn.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sym

from .forms import MaterialParams

_PARAM_SYMS = sym.symbols("lam mu_e rho omega s_eps alpha kap mu_f", real=True)


def _sympy_fields(dim: int):
    xs = sym.symbols("x y z")[:dim]
    x, y = xs[0], xs[1]
    if dim == 2:
        re_u = [(x - 1) ** 2 * y ** 2,
                x * y * (x - 1)]
        im_u = [(x - 1) * (x + 2) ** 2 * y * (y + 1),
                2 * x ** 2 * y * (x - 1)]
    else:
        z = xs[2]
        re_u = [(x - 1) ** 2 * x * y ** 2 * (z + 2),
                x ** 3 * y * (z + 1) ** 2 * (x - 1) ** 3,
                (x - 1) * x * y * (z + 2) ** 2]
        im_u = [(x - 1) * x ** 2 * y ** 2 * (z + 1),
                (x - 1) ** 2 * x ** 3 * y ** 3 * (z - 2),
                x ** 2 * y * (x - 1) * (z - 2) ** 2]
    re_p = sym.sin(sym.pi * x / 2) * sym.cos(sym.pi * y / 2)
    im_p = (1 - sym.cos(sym.pi * x)) * (1 + sym.cos(sym.pi * y))

    u = sym.Matrix([re_u[i] + sym.I * im_u[i] for i in range(dim)])
    p = re_p + sym.I * im_p
    return xs, u, p


@lru_cache(maxsize=None)
def _compiled(dim: int):
    """Lambdified fields and derived quantities, parameterized by coefficients."""
    xs, u, p = _sympy_fields(dim)
    lam, mu_e, rho, omega, s_eps, alpha, kap, mu_f = _PARAM_SYMS

    grad_u = sym.Matrix([[sym.diff(u[i], xs[j]) for j in range(dim)]
                         for i in range(dim)])
    div_u = sum(grad_u[i, i] for i in range(dim))
    phi = p - lam * div_u
    grad_p = sym.Matrix([sym.diff(p, xs[j]) for j in range(dim)])
    grad_phi = sym.Matrix([sym.diff(phi, xs[j]) for j in range(dim)])
    lap_p = sum(sym.diff(p, xi, 2) for xi in xs)
    # div eps(u)_i = 0.5 (laplace u_i + d_i div u)
    div_eps = sym.Matrix([
        sym.Rational(1, 2) * (sum(sym.diff(u[i], xj, 2) for xj in xs)
                              + sym.diff(div_u, xs[i]))
        for i in range(dim)])

    f_u = sym.Matrix([-omega ** 2 * rho * u[i] - 2 * mu_e * div_eps[i]
                      + grad_phi[i] for i in range(dim)])
    f_p = (sym.I * (s_eps + alpha / lam) * omega * p
           - sym.I * omega * (alpha / lam) * phi - (kap / mu_f) * lap_p)

    args = tuple(xs) + _PARAM_SYMS

    def lamb(expr):
        return sym.lambdify(args, expr, modules="numpy")

    return {
        "u": [lamb(u[i]) for i in range(dim)],
        "grad_u": [[lamb(grad_u[i, j]) for j in range(dim)] for i in range(dim)],
        "p": lamb(p),
        "grad_p": [lamb(grad_p[i]) for i in range(dim)],
        "phi": lamb(phi),
        "grad_phi": [lamb(grad_phi[i]) for i in range(dim)],
        "div_u": lamb(div_u),
        "f_u": [lamb(f_u[i]) for i in range(dim)],
        "f_p": lamb(f_p),
    }


@dataclass
class ExactSolution:
    """Vectorized evaluators for (u, p, phi), derivatives, and sources."""

    dim: int
    params: MaterialParams

    def __post_init__(self):
        if isinstance(self.params.kappa, dict):
            raise ValueError("manufactured solutions require scalar permeability")
        self._fns = _compiled(self.dim)
        p = self.params
        self._args = (p.lam, p.mu_e, p.rho, p.omega, p.s_eps, p.alpha,
                      p.kappa_of_region(0), p.mu_f)

    def _eval(self, fn, pts):
        coords = [pts[:, i] for i in range(self.dim)]
        out = fn(*coords, *self._args)
        return np.broadcast_to(np.asarray(out, dtype=np.complex128), (len(pts),)).copy()

    def u(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.column_stack([self._eval(f, pts) for f in self._fns["u"]])

    def grad_u(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.empty((len(pts), self.dim, self.dim), dtype=np.complex128)
        for i in range(self.dim):
            for j in range(self.dim):
                out[:, i, j] = self._eval(self._fns["grad_u"][i][j], pts)
        return out

    def p(self, pts) -> np.ndarray:
        return self._eval(self._fns["p"], np.atleast_2d(pts))

    def grad_p(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.column_stack([self._eval(f, pts) for f in self._fns["grad_p"]])

    def phi(self, pts) -> np.ndarray:
        return self._eval(self._fns["phi"], np.atleast_2d(pts))

    def grad_phi(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.column_stack([self._eval(f, pts) for f in self._fns["grad_phi"]])

    def div_u(self, pts) -> np.ndarray:
        return self._eval(self._fns["div_u"], np.atleast_2d(pts))

    def f_u(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.column_stack([self._eval(f, pts) for f in self._fns["f_u"]])

    def f_p(self, pts) -> np.ndarray:
        return self._eval(self._fns["f_p"], np.atleast_2d(pts))

    # natural boundary data generated from the exact fields
    def traction(self, pts, normal) -> np.ndarray:
        """(2 mu_e eps(u) - phi I) n."""
        pts = np.atleast_2d(pts)
        g = self.grad_u(pts)
        eps = 0.5 * (g + np.swapaxes(g, 1, 2))
        sig = 2.0 * self.params.mu_e * eps
        ph = self.phi(pts)
        for i in range(self.dim):
            sig[:, i, i] -= ph
        return np.einsum("nij,j->ni", sig, np.asarray(normal, dtype=float))

    def flux(self, pts, normal) -> np.ndarray:
        """(kappa / mu_f) dp/dn."""
        kap = self.params.kappa_of_region(0)
        gp = self.grad_p(np.atleast_2d(pts))
        return (kap / self.params.mu_f) * (gp @ np.asarray(normal, dtype=float))

    def interpolate(self, dofmap) -> np.ndarray:
        """Nodal interpolant of (u, p, phi) as a monolithic coefficient vector."""
        pts = dofmap.scalar_coords
        n_s = dofmap.n_scalar
        vec = np.zeros(dofmap.n_dofs, dtype=np.complex128)
        uu = self.u(pts)
        for a in range(self.dim):
            vec[a * n_s:(a + 1) * n_s] = uu[:, a]
        vec[self.dim * n_s:(self.dim + 1) * n_s] = self.p(pts)
        vec[(self.dim + 1) * n_s:(self.dim + 2) * n_s] = self.phi(pts)
        return vec


def manufactured_2d(params: MaterialParams) -> ExactSolution:
    """Unit-square exact solution."""
    return ExactSolution(2, params)


def manufactured_3d(params: MaterialParams) -> ExactSolution:
    """Unit-cube exact solution."""
    return ExactSolution(3, params)


# boundary tag partitions used by the verification experiments
GAMMA_P_2D = ("left", "top")
GAMMA_U_2D = ("right", "bottom")
GAMMA_P_3D = ("x0", "x1", "y0")
GAMMA_U_3D = ("y1", "z0", "z1")


def manufactured_boundary(exact: ExactSolution, gamma_p=None, gamma_u=None):
    """BoundarySpec with exact Dirichlet traces and natural data.

    Tags in gamma_p get pressure Dirichlet plus traction; tags in gamma_u
    get displacement Dirichlet plus flux.
    """
    from .forms import BoundaryCondition, BoundarySpec

    if gamma_p is None:
        gamma_p = GAMMA_P_2D if exact.dim == 2 else GAMMA_P_3D
    if gamma_u is None:
        gamma_u = GAMMA_U_2D if exact.dim == 2 else GAMMA_U_3D
    conds = {}
    for tag in gamma_p:
        conds[tag] = (BoundaryCondition("traction", exact.traction),
                      BoundaryCondition("dirichlet_p", lambda pts: exact.p(pts)))
    for tag in gamma_u:
        conds[tag] = (BoundaryCondition("dirichlet_u", lambda pts: exact.u(pts)),
                      BoundaryCondition("flux", exact.flux))
    return BoundarySpec(conds)
