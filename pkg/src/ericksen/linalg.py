"""Sparse symmetric solves for the gradient flow.

CSR matrices are plain ``scipy.sparse.csr_matrix``; this module adds a
Jacobi-preconditioned conjugate gradient with strict failure semantics and
the nodal null-space machinery that turns the tangent-space-constrained
director update into an SPD system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "LinearSolveError",
    "DegenerateDirectorError",
    "cg_solve",
    "TangentBasis",
    "build_tangent_basis",
    "reduced_solve",
]


class LinearSolveError(RuntimeError):
    """CG failed: breakdown, non-finite data, or maxit exhausted."""


class DegenerateDirectorError(ValueError):
    """The director vanishes at a vertex where a tangent frame is needed."""


def cg_solve(A, b, tol: float = 1e-10, maxit: int | None = None, callback=None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Stops when the preconditioned residual norm sqrt(r' D^-1 r) drops below
    tol times its value for b.  Raises LinearSolveError on breakdown
    (non-SPD curvature), non-finite input, or maxit iterations.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if not np.isfinite(b).all():
        raise LinearSolveError("right-hand side contains non-finite entries")
    if maxit is None:
        maxit = max(10 * n, 100)

    diag = A.diagonal()
    if np.any(diag <= 0) or not np.isfinite(diag).all():
        raise LinearSolveError("matrix diagonal is not positive; not SPD")
    inv_diag = 1.0 / diag

    ref = float(np.sqrt(b @ (inv_diag * b)))
    x = np.zeros(n)
    if ref == 0.0:
        return x
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for _ in range(maxit):
        Ap = A @ p
        pAp = float(p @ Ap)
        if not np.isfinite(pAp):
            raise LinearSolveError("non-finite curvature in CG")
        if pAp <= 0.0:
            raise LinearSolveError("matrix is not positive definite on the solve space")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = inv_diag * r
        rz_new = float(r @ z)
        if callback is not None:
            callback(x)
        if np.sqrt(max(rz_new, 0.0)) <= tol * ref:
            return x
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.sqrt(max(rz, 0.0)) / ref)
    raise LinearSolveError(f"CG did not converge in {maxit} iterations "
                           f"(relative preconditioned residual {res:.3e})")


@dataclass
class TangentBasis:
    """Orthonormal frames spanning n(z)-perp at the free vertices.

    frames[p] is the d x (d-1) matrix for free vertex free[p]; Dirichlet
    vertices are excluded, their updates are pinned to zero.
    """

    num_vertices: int
    dim: int
    free: np.ndarray              # (nfree,) vertex indices
    frames: np.ndarray            # (nfree, d, d-1)

    @property
    def reduced_size(self) -> int:
        return len(self.free) * (self.dim - 1)

    def to_matrix(self) -> sp.csr_matrix:
        """Sparse (nv*d, nfree*(d-1)) map from reduced to nodal coefficients
        (vertex-interleaved component ordering)."""
        nfree, d = len(self.free), self.dim
        rows = (self.free[:, None, None] * d + np.arange(d)[None, :, None])
        cols = (np.arange(nfree)[:, None, None] * (d - 1) + np.arange(d - 1)[None, None, :])
        rows = np.broadcast_to(rows, self.frames.shape).ravel()
        cols = np.broadcast_to(cols, self.frames.shape).ravel()
        mat = sp.coo_matrix((self.frames.ravel(), (rows, cols)),
                            shape=(self.num_vertices * d, self.reduced_size))
        return mat.tocsr()

    def expand(self, y: np.ndarray) -> np.ndarray:
        """Reduced coefficients -> nodal (nv, d) array."""
        d = self.dim
        out = np.zeros((self.num_vertices, d))
        yb = y.reshape(len(self.free), d - 1)
        out[self.free] = np.einsum("pda,pa->pd", self.frames, yb)
        return out

    def restrict(self, v: np.ndarray) -> np.ndarray:
        """Nodal (nv, d) array -> reduced coefficients Z^T v."""
        vb = v[self.free]
        return np.einsum("pda,pd->pa", self.frames, vb).ravel()


def build_tangent_basis(n_coeffs: np.ndarray, free: np.ndarray) -> TangentBasis:
    """Deterministic orthonormal basis of n(z)-perp at the free vertices.

    Rule: take the coordinate axis least aligned with n(z) (lowest index on
    ties), Gram-Schmidt it against n(z)/|n(z)|; in 3D complete the frame
    with the cross product n x z1.
    """
    n_coeffs = np.asarray(n_coeffs, dtype=float)
    nv, d = n_coeffs.shape
    free = np.asarray(free, dtype=np.int64)
    vals = n_coeffs[free]
    norms = np.linalg.norm(vals, axis=1)
    if np.any(norms == 0.0):
        bad = int(free[int(np.argmin(norms))])
        raise DegenerateDirectorError(f"director vanishes at free vertex {bad}")
    unit = vals / norms[:, None]

    axis = np.argmin(np.abs(unit), axis=1)           # lowest index wins ties
    e = np.zeros_like(unit)
    e[np.arange(len(free)), axis] = 1.0
    z1 = e - (np.einsum("pd,pd->p", e, unit))[:, None] * unit
    z1 /= np.linalg.norm(z1, axis=1)[:, None]

    frames = np.empty((len(free), d, d - 1))
    frames[:, :, 0] = z1
    if d == 3:
        frames[:, :, 1] = np.cross(unit, z1)
    return TangentBasis(num_vertices=nv, dim=d, free=free, frames=frames)


def vector_operator(A_scalar: sp.csr_matrix, dim: int) -> sp.csr_matrix:
    """Componentwise action of a scalar operator on interleaved (nv, d) data."""
    return sp.kron(A_scalar, sp.identity(dim, format="csr"), format="csr")


def reduced_solve(A_scalar: sp.csr_matrix, basis: TangentBasis, rhs: np.ndarray,
                  tol: float = 1e-10, maxit: int | None = None,
                  vec_op: sp.csr_matrix | None = None) -> np.ndarray:
    """Solve the componentwise SPD system on the discrete tangent space.

    Eliminates the nodal constraints t(z).n(z)=0 and t=0 on the Dirichlet
    set through the basis: solves Z' (I_d (x) A) Z y = Z' rhs by CG and
    returns t = Z y as an (nv, d) array, tangent by construction.
    """
    if rhs.shape != (basis.num_vertices, basis.dim):
        raise ValueError("rhs must be an (nv, d) nodal array")
    if basis.reduced_size == 0:
        return np.zeros_like(rhs)
    Z = basis.to_matrix()
    if vec_op is None:
        vec_op = vector_operator(A_scalar, basis.dim)
    reduced = (Z.T @ vec_op @ Z).tocsr()
    b = basis.restrict(rhs)
    y = cg_solve(reduced, b, tol=tol, maxit=maxit)
    return basis.expand(y)
