"""Complex sparse storage and solvers for the coupled block systems.

CSR storage and the sparse LU factorization are backed by scipy (SuperLU
with COLAMD fill-reducing ordering); restarted GMRES and the zero-fill
incomplete LU preconditioner are implemented here so that iteration
accounting, restart behavior, and the zero-fill pattern are exactly as
specified.  Dense routines cover the generalized symmetric eigenproblem
used by the well-posedness diagnostics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(Exception):
    """Structurally or numerically singular matrix."""


DIRECT_SOLVE_CAP = 200_000
DENSE_EIG_CAP = 3_000


@dataclass
class ComplexCsrMatrix:
    """CSR storage: row offsets, sorted column indices, complex values."""

    shape: tuple
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @classmethod
    def from_scipy(cls, mat) -> "ComplexCsrMatrix":
        m = sp.csr_matrix(mat)
        m.sum_duplicates()
        m.sort_indices()
        return cls(shape=m.shape, indptr=m.indptr.copy(), indices=m.indices.copy(),
                   data=m.data.astype(np.complex128))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    @property
    def nnz(self) -> int:
        return len(self.data)


@dataclass
class SolveReport:
    method: str
    iterations: int
    relative_residual: float
    wall_time: float
    converged: bool = True


def _as_scipy(A):
    if isinstance(A, ComplexCsrMatrix):
        return A.to_scipy()
    return sp.csr_matrix(A)


def csr_from_triplets(shape, rows, cols, values) -> ComplexCsrMatrix:
    """Build CSR from COO triplets; duplicate entries are summed."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.complex128)
    if rows.size and (rows.min() < 0 or rows.max() >= shape[0]
                      or cols.min() < 0 or cols.max() >= shape[1]):
        raise IndexError("triplet index out of range")
    coo = sp.coo_matrix((values, (rows, cols)), shape=shape)
    return ComplexCsrMatrix.from_scipy(coo)


def spmv(A, x) -> np.ndarray:
    """y = A x in complex arithmetic."""
    As = _as_scipy(A)
    x = np.asarray(x)
    if x.shape[0] != As.shape[1]:
        raise ValueError(f"dimension mismatch: {As.shape} @ {x.shape}")
    return As @ x.astype(np.complex128)


def direct_solve(A, b, cap: int = DIRECT_SOLVE_CAP):
    """Sparse LU solve (SuperLU, COLAMD column ordering)."""
    As = _as_scipy(A).tocsc()
    n = As.shape[0]
    if As.shape[0] != As.shape[1]:
        raise ValueError("matrix must be square")
    if n > cap:
        raise ValueError(f"system size {n} exceeds direct-solve cap {cap}")
    b = np.asarray(b, dtype=np.complex128)
    t0 = time.perf_counter()
    try:
        lu = spla.splu(As.astype(np.complex128))
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution (numerically singular matrix)")
    wall = time.perf_counter() - t0
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(b - As @ x) / bnorm if bnorm > 0 else 0.0
    return x, SolveReport(method="direct", iterations=0,
                          relative_residual=float(res), wall_time=wall)


class Ilu0Preconditioner:
    """Zero-fill ILU factors; apply() is the forward/backward substitution."""

    def __init__(self, indptr, indices, data, n):
        csr = sp.csr_matrix((data, indices, indptr), shape=(n, n))
        self.lower = sp.tril(csr, k=-1, format="csr") + sp.eye(n, format="csr")
        self.upper = sp.triu(csr, k=0, format="csr")
        self.n = n

    def apply(self, r: np.ndarray) -> np.ndarray:
        y = spla.spsolve_triangular(self.lower, r, lower=True, unit_diagonal=True)
        return spla.spsolve_triangular(self.upper, y, lower=False)


def ilu0(A) -> Ilu0Preconditioner:
    """ILU(0): incomplete LU restricted to the sparsity pattern of A."""
    As = _as_scipy(A).astype(np.complex128)
    As.sum_duplicates()
    As.sort_indices()
    n = As.shape[0]
    indptr, indices = As.indptr, As.indices
    data = As.data.copy()
    diag_pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        row = indices[indptr[i]:indptr[i + 1]]
        hit = np.searchsorted(row, i)
        if hit < len(row) and row[hit] == i:
            diag_pos[i] = indptr[i] + hit
    if np.any(diag_pos < 0):
        missing = int(np.where(diag_pos < 0)[0][0])
        raise SingularMatrixError(f"zero diagonal entry in row {missing}")

    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        row_cols = indices[start:end]
        for pos in range(start, end):
            k = indices[pos]
            if k >= i:
                break
            piv = data[diag_pos[k]]
            if piv == 0:
                raise SingularMatrixError(f"zero pivot in row {k}")
            lik = data[pos] / piv
            data[pos] = lik
            # subtract lik * U(k, j) for j > k restricted to the pattern of row i
            ks, ke = diag_pos[k] + 1, indptr[k + 1]
            if ks >= ke:
                continue
            kcols = indices[ks:ke]
            where = np.searchsorted(row_cols, kcols)
            valid = (where < len(row_cols))
            matched = valid & (row_cols[np.minimum(where, len(row_cols) - 1)] == kcols)
            data[start + where[matched]] -= lik * data[ks:ke][matched]
        if data[diag_pos[i]] == 0:
            raise SingularMatrixError(f"zero pivot in row {i}")
    return Ilu0Preconditioner(indptr, indices, data, n)


def gmres(A, b, preconditioner=None, restart: int = 500, tol: float = 1e-8,
          max_iter: int = 50_000):
    """Right-preconditioned restarted GMRES for complex systems.

    Iterates until the true relative residual drops below tol or max_iter
    total inner iterations are spent.  Non-convergence is reported in the
    SolveReport, not raised; a NaN residual raises ValueError.
    """
    As = _as_scipy(A).astype(np.complex128)
    n = As.shape[0]
    if As.shape[0] != As.shape[1]:
        raise ValueError("matrix must be square")
    if restart < 1:
        raise ValueError("restart must be >= 1")
    b = np.asarray(b, dtype=np.complex128)
    apply_M = (lambda v: v) if preconditioner is None else preconditioner.apply

    t0 = time.perf_counter()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n, dtype=np.complex128), SolveReport(
            method="gmres", iterations=0, relative_residual=0.0,
            wall_time=time.perf_counter() - t0)

    x = np.zeros(n, dtype=np.complex128)
    total_iters = 0
    res = 1.0
    while total_iters < max_iter:
        r = b - As @ x
        res = np.linalg.norm(r) / bnorm
        if not np.isfinite(res):
            raise ValueError("non-finite GMRES residual")
        if res <= tol:
            break
        m = min(restart, max_iter - total_iters)
        V = np.zeros((m + 1, n), dtype=np.complex128)
        H = np.zeros((m + 1, m), dtype=np.complex128)
        cs = np.zeros(m, dtype=np.complex128)
        sn = np.zeros(m, dtype=np.complex128)
        beta = np.linalg.norm(r)
        V[0] = r / beta
        g = np.zeros(m + 1, dtype=np.complex128)
        g[0] = beta
        k_used = 0
        for k in range(m):
            w = As @ apply_M(V[k])
            for j in range(k + 1):               # modified Gram-Schmidt
                H[j, k] = np.vdot(V[j], w)
                w -= H[j, k] * V[j]
            H[k + 1, k] = np.linalg.norm(w)
            total_iters += 1
            k_used = k + 1
            happy = H[k + 1, k].real < 1e-14 * beta
            if not happy:
                V[k + 1] = w / H[k + 1, k]
            # apply stored Givens rotations to the new column
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -np.conj(sn[j]) * H[j, k] + np.conj(cs[j]) * H[j + 1, k]
                H[j, k] = t
            denom = np.sqrt(np.abs(H[k, k]) ** 2 + np.abs(H[k + 1, k]) ** 2)
            if denom == 0.0:
                cs[k], sn[k] = 1.0, 0.0
            else:
                cs[k] = np.conj(H[k, k]) / denom
                sn[k] = np.conj(H[k + 1, k]) / denom
            H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
            H[k + 1, k] = 0.0
            g[k + 1] = -np.conj(sn[k]) * g[k]
            g[k] = cs[k] * g[k]
            est = np.abs(g[k + 1]) / bnorm
            if happy or est <= tol or total_iters >= max_iter:
                break
        y = scipy.linalg.solve_triangular(H[:k_used, :k_used], g[:k_used])
        x = x + apply_M(V[:k_used].T @ y)
    r = b - As @ x
    res = float(np.linalg.norm(r) / bnorm)
    if not np.isfinite(res):
        raise ValueError("non-finite GMRES residual")
    return x, SolveReport(method="gmres", iterations=total_iters,
                          relative_residual=res,
                          wall_time=time.perf_counter() - t0,
                          converged=res <= tol)


def dense_generalized_eig(A, M, k_smallest: int, cap: int = DENSE_EIG_CAP):
    """Smallest eigenpairs of A v = lambda M v, A/M real symmetric, M SPD.

    Eigenvalues ascending; eigenvectors M-orthonormal.
    """
    A = np.asarray(sp.csr_matrix(A).todense()) if sp.issparse(A) else np.asarray(A)
    M = np.asarray(sp.csr_matrix(M).todense()) if sp.issparse(M) else np.asarray(M)
    n = A.shape[0]
    if n > cap:
        raise ValueError(f"system size {n} exceeds dense cap {cap}")
    if not np.allclose(A, A.T, atol=1e-10 * max(1.0, np.abs(A).max())):
        raise ValueError("A must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ValueError("mass matrix is not positive definite") from exc
    vals, vecs = scipy.linalg.eigh(A, M)
    k = min(k_smallest, n)
    return [(float(vals[i]), vecs[:, i].copy()) for i in range(k)]


def write_matrix_market(A, path) -> None:
    """Dump a complex matrix in Matrix Market coordinate format (complex general)."""
    As = _as_scipy(A).tocoo()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate complex general\n")
        fh.write(f"{As.shape[0]} {As.shape[1]} {As.nnz}\n")
        for i, j, v in zip(As.row, As.col, As.data):
            fh.write(f"{i + 1} {j + 1} {v.real:.16e} {v.imag:.16e}\n")
