"""Reference elements, simplex quadrature, and equal-order Lagrange DOF maps.

Continuous P1/P2 Lagrange bases on triangles and tetrahedra, expressed in
barycentric coordinates.  Quadrature rules are conical-product Gauss-Jacobi
rules collapsed onto the reference simplex, exact for the requested total
polynomial degree.  The coupled three-field system uses one scalar DOF set
shared by all fields, with monolithic block ordering [all u | all p | all phi]
and displacement components stored component-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

# Local edges of the reference simplex (vertex index pairs).
EDGES = {
    2: [(0, 1), (0, 2), (1, 2)],
    3: [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
}

REF_MEASURE = {1: 1.0, 2: 0.5, 3: 1.0 / 6.0}

MAX_QUAD_DEGREE = 6


@dataclass
class QuadratureRule:
    dim: int
    degree: int
    points_bary: np.ndarray   # (n_q, dim+1)
    weights: np.ndarray       # (n_q,), sums to the reference simplex measure

    @property
    def n_points(self) -> int:
        return len(self.weights)

    @property
    def points_ref(self) -> np.ndarray:
        """Reference Cartesian coordinates (barycentric coords 1..dim)."""
        return self.points_bary[:, 1:]


def _gauss01(n: int, alpha: int = 0):
    """Gauss nodes/weights on [0,1] for the weight (1-t)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


def quadrature_rule(dim: int, degree: int) -> QuadratureRule:
    """Simplex rule integrating all monomials of total degree <= degree."""
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    if not 0 <= degree <= MAX_QUAD_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree}")
    m = max(1, (degree + 2) // 2)     # Gauss with m nodes is exact to 2m-1

    if dim == 1:
        t, w = _gauss01(m)
        pts = t[:, None]
        wts = w
    elif dim == 2:
        t1, w1 = _gauss01(m, alpha=1)
        t2, w2 = _gauss01(m)
        x = np.repeat(t1, m)
        y = np.tile(t2, m) * (1.0 - x)
        pts = np.column_stack([x, y])
        wts = np.repeat(w1, m) * np.tile(w2, m)
    else:
        t1, w1 = _gauss01(m, alpha=2)
        t2, w2 = _gauss01(m, alpha=1)
        t3, w3 = _gauss01(m)
        x = np.repeat(t1, m * m)
        e2 = np.tile(np.repeat(t2, m), m)
        e3 = np.tile(t3, m * m)
        y = e2 * (1.0 - x)
        z = e3 * (1.0 - x) * (1.0 - e2)
        pts = np.column_stack([x, y, z])
        wts = np.repeat(w1, m * m) * np.tile(np.repeat(w2, m), m) * np.tile(w3, m * m)

    bary = np.column_stack([1.0 - pts.sum(axis=1), pts])
    return QuadratureRule(dim=dim, degree=degree, points_bary=bary, weights=wts)


class ReferenceElement:
    """Lagrange P_k basis on the reference simplex, k in {1, 2}.

    Node order: the dim+1 vertices, then (for k=2) the edge midpoints in
    EDGES order.  Basis values/gradients are evaluated at reference
    Cartesian points; second derivatives are constant and returned once.
    """

    def __init__(self, dim: int, degree: int):
        if dim not in (2, 3):
            raise ValueError(f"unsupported dimension {dim}")
        if degree not in (1, 2):
            raise ValueError(f"unsupported polynomial degree {degree}")
        self.dim = dim
        self.degree = degree
        nv = dim + 1
        verts_bary = np.eye(nv)
        if degree == 1:
            self.nodes_bary = verts_bary
        else:
            mids = np.array([(verts_bary[a] + verts_bary[b]) / 2.0
                             for a, b in EDGES[dim]])
            self.nodes_bary = np.vstack([verts_bary, mids])
        self.n_basis = len(self.nodes_bary)
        # gradients of the barycentric coordinates wrt reference Cartesian
        self._grad_lam = np.vstack([-np.ones(dim), np.eye(dim)])

    def _bary(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.column_stack([1.0 - pts.sum(axis=1), pts])

    def eval_basis(self, pts: np.ndarray) -> np.ndarray:
        """Basis values, shape (n_points, n_basis)."""
        lam = self._bary(pts)
        if self.degree == 1:
            return lam
        vals = [lam[:, i] * (2.0 * lam[:, i] - 1.0) for i in range(self.dim + 1)]
        vals += [4.0 * lam[:, a] * lam[:, b] for a, b in EDGES[self.dim]]
        return np.column_stack(vals)

    def eval_grad(self, pts: np.ndarray) -> np.ndarray:
        """Reference gradients, shape (n_points, n_basis, dim)."""
        lam = self._bary(pts)
        gl = self._grad_lam
        if self.degree == 1:
            return np.broadcast_to(gl, (len(lam), self.dim + 1, self.dim)).copy()
        grads = np.empty((len(lam), self.n_basis, self.dim))
        for i in range(self.dim + 1):
            grads[:, i] = (4.0 * lam[:, i, None] - 1.0) * gl[i]
        for e, (a, b) in enumerate(EDGES[self.dim]):
            grads[:, self.dim + 1 + e] = 4.0 * (lam[:, a, None] * gl[b]
                                                + lam[:, b, None] * gl[a])
        return grads

    def hessians(self) -> np.ndarray:
        """Constant reference Hessians, shape (n_basis, dim, dim)."""
        H = np.zeros((self.n_basis, self.dim, self.dim))
        if self.degree == 1:
            return H
        gl = self._grad_lam
        for i in range(self.dim + 1):
            H[i] = 4.0 * np.outer(gl[i], gl[i])
        for e, (a, b) in enumerate(EDGES[self.dim]):
            H[self.dim + 1 + e] = 4.0 * (np.outer(gl[a], gl[b])
                                         + np.outer(gl[b], gl[a]))
        return H


@dataclass
class DofMap:
    """Global DOF layout for the coupled (u, p, phi) equal-order system.

    One scalar DOF set of size n_scalar is shared by every field.  Global
    ordering is [u_0 | ... | u_{d-1} | p | phi], each block of size
    n_scalar, so n_dofs = (dim + 2) * n_scalar.
    """

    dim: int
    degree: int
    n_scalar: int
    cell_dofs: np.ndarray        # (n_cells, n_local) scalar dof ids
    scalar_coords: np.ndarray    # (n_scalar, dim) nodal coordinates
    edge_index: dict             # sorted vertex pair -> edge id (degree 2)

    @property
    def n_dofs(self) -> int:
        return (self.dim + 2) * self.n_scalar

    @property
    def n_local(self) -> int:
        return self.cell_dofs.shape[1]

    def u_dofs(self, component: int, scalar_ids) -> np.ndarray:
        return component * self.n_scalar + np.asarray(scalar_ids)

    def p_dofs(self, scalar_ids) -> np.ndarray:
        return self.dim * self.n_scalar + np.asarray(scalar_ids)

    def phi_dofs(self, scalar_ids) -> np.ndarray:
        return (self.dim + 1) * self.n_scalar + np.asarray(scalar_ids)

    def field_slice(self, name: str) -> slice:
        n = self.n_scalar
        if name.startswith("u"):
            comp = int(name[1:]) if len(name) > 1 else 0
            return slice(comp * n, (comp + 1) * n)
        if name == "p":
            return slice(self.dim * n, (self.dim + 1) * n)
        if name == "phi":
            return slice((self.dim + 1) * n, (self.dim + 2) * n)
        raise ValueError(f"unknown field {name}")

    def facet_scalar_dofs(self, facet: np.ndarray) -> np.ndarray:
        """Scalar DOFs supported on a boundary facet (vertices + facet edges)."""
        ids = list(facet)
        if self.degree == 2:
            nv = len(facet)
            for a in range(nv):
                for b in range(a + 1, nv):
                    key = (min(facet[a], facet[b]), max(facet[a], facet[b]))
                    ids.append(self.n_scalar - len(self.edge_index)
                               + self.edge_index[key])
        return np.array(ids, dtype=np.int64)


def build_dofmap(mesh, degree: int) -> DofMap:
    """Enumerate scalar DOFs (vertices, plus edge midpoints for P2)."""
    if degree not in (1, 2):
        raise ValueError(f"unsupported polynomial degree {degree}")
    cells = mesh.cells
    if degree == 1:
        return DofMap(dim=mesh.dim, degree=1, n_scalar=mesh.n_vertices,
                      cell_dofs=cells.copy(), scalar_coords=mesh.vertices.copy(),
                      edge_index={})
    local_edges = EDGES[mesh.dim]
    pairs = np.sort(cells[:, local_edges], axis=2).reshape(-1, 2)
    uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
    n_edges = len(uniq)
    edge_index = {tuple(e): i for i, e in enumerate(uniq)}
    edge_dofs = mesh.n_vertices + inverse.reshape(mesh.n_cells, len(local_edges))
    cell_dofs = np.hstack([cells, edge_dofs])
    coords = np.vstack([mesh.vertices,
                        0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])])
    return DofMap(dim=mesh.dim, degree=2, n_scalar=mesh.n_vertices + n_edges,
                  cell_dofs=cell_dofs, scalar_coords=coords, edge_index=edge_index)


class CellBasis:
    """Basis data mapped to every cell for a fixed quadrature rule.

    Arrays:
      phi        (n_q, n_local)              values (cell independent)
      grad       (n_cells, n_q, n_local, d)  physical gradients
      hess       (n_cells, n_local, d, d)    physical second derivatives
      points     (n_cells, n_q, d)           physical quadrature points
      wdet       (n_cells, n_q)              quadrature weight times |det J|
    """

    def __init__(self, mesh, geom, rule: QuadratureRule, degree: int):
        self.mesh = mesh
        self.geom = geom
        self.rule = rule
        self.element = ReferenceElement(mesh.dim, degree)
        pts = rule.points_ref
        self.phi = self.element.eval_basis(pts)
        gref = self.element.eval_grad(pts)                       # (q, l, b)
        self.grad = np.einsum("qlb,cba->cqla", gref, geom.inv_jac)
        Href = self.element.hessians()                           # (l, r, s)
        if degree >= 2:
            self.hess = np.einsum("cra,lrs,csb->clab", geom.inv_jac, Href,
                                  geom.inv_jac)
        else:
            self.hess = np.zeros((mesh.n_cells, self.element.n_basis,
                                  mesh.dim, mesh.dim))
        self.points = (geom.cell_origin[:, None, :]
                       + np.einsum("cab,qb->cqa", geom.jac, pts))
        self.wdet = rule.weights[None, :] * geom.det[:, None]


def element_matrices(mesh, geom, rule: QuadratureRule, degree: int, cell: int) -> dict:
    """Local element matrices of one cell, by mapped quadrature.

    Returns 'mass' and 'stiffness' for the scalar basis, 'strain_strain'
    and 'div_coupling' for the component-major vector basis, and
    'grad_pairs' with grad_pairs[a][l, m] = integral of (d_a N_l) N_m.
    """
    if geom.det[cell] <= 0.0:
        raise ValueError(f"degenerate Jacobian on cell {cell}")
    elem = ReferenceElement(mesh.dim, degree)
    pts = rule.points_ref
    phi = elem.eval_basis(pts)                                    # (q, l)
    grad = np.einsum("qlb,ba->qla", elem.eval_grad(pts), geom.inv_jac[cell])
    w = rule.weights * geom.det[cell]
    d, nl = mesh.dim, elem.n_basis

    mass = np.einsum("q,ql,qm->lm", w, phi, phi)
    stiffness = np.einsum("q,qla,qma->lm", w, grad, grad)
    g2 = np.einsum("q,qla,qmb->lmab", w, grad, grad)
    strain = np.zeros((d * nl, d * nl))
    for a in range(d):
        for b in range(d):
            blk = 0.5 * g2[:, :, b, a]
            if a == b:
                blk = blk + 0.5 * stiffness
            strain[a * nl:(a + 1) * nl, b * nl:(b + 1) * nl] = blk
    gp = np.einsum("q,qla,qm->alm", w, grad, phi)
    div_coupling = gp.reshape(d * nl, nl)
    return {"mass": mass, "stiffness": stiffness, "strain_strain": strain,
            "div_coupling": div_coupling, "grad_pairs": [gp[a] for a in range(d)]}
