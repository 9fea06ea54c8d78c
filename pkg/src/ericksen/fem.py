"""P1 Lagrange finite elements on simplicial meshes.

Nodal interpolation, simplex quadrature, and the mass/stiffness-type forms
used by the alternating gradient flow:

* ``assemble_mass``              -- (phi_i, phi_j)
* ``assemble_stiffness_weighted``-- sum_K w_K (grad phi_i, grad phi_j)_K
* ``assemble_s2_stiffness``      -- (s^2 grad phi_i, grad phi_j)
* ``assemble_gradsq_mass``       -- (|grad s|^2 phi_i, phi_j)
* ``assemble_nsq_stiffness``     -- (|n|^2 grad phi_i, grad phi_j)
* ``assemble_gradnsq_mass``      -- (|grad n|_F^2 phi_i, phi_j)

All integrands are polynomial on each cell, so every matrix and energy is
integrated exactly: products of P1 functions via the closed-form simplex
formulas, the quartic potential via a degree-4 rule.  Scalar operators are
stored once and applied per vector component (the vector forms are
component-diagonal).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from .mesh import SimplicialMesh

__all__ = [
    "QuadratureRule",
    "ScalarField",
    "VectorField",
    "FieldEvaluationError",
    "nodal_interpolate",
    "assemble_mass",
    "assemble_stiffness_weighted",
    "assemble_s2_stiffness",
    "assemble_gradsq_mass",
    "assemble_nsq_stiffness",
    "assemble_gradnsq_mass",
    "energy_elastic",
    "energy_potential",
    "unit_length_error",
]


class FieldEvaluationError(ValueError):
    """A boundary/initial datum returned a non-finite or ill-shaped value."""


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Positive quadrature rule on the reference d-simplex.

    Points are barycentric (npts, d+1); weights are normalized to sum to 1,
    so integrals are ``volume * sum_q w_q f(x_q)``.  Exact for polynomials
    of total degree <= degree.
    """

    dim: int
    degree: int
    points: np.ndarray
    weights: np.ndarray

    @staticmethod
    def simplex(dim: int, degree: int) -> "QuadratureRule":
        return _simplex_rule(int(dim), int(degree))


@lru_cache(maxsize=None)
def _simplex_rule(dim: int, degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi product rule on the unit simplex.

    Direction k of the Duffy-type map carries the Jacobian factor
    (1 - xi_k)^(dim-k), absorbed exactly by a Gauss-Jacobi rule with
    alpha = dim - k.  All weights are positive.
    """
    if dim not in (2, 3):
        raise ValueError("quadrature implemented for d = 2, 3")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    m = (degree + 2) // 2  # ceil((degree+1)/2)

    nodes_1d, weights_1d = [], []
    for k in range(1, dim + 1):
        alpha = dim - k
        x, w = roots_jacobi(m, alpha, 0.0)
        nodes_1d.append(0.5 * (x + 1.0))         # map [-1,1] -> [0,1]
        weights_1d.append(w / 2.0 ** (alpha + 1))

    grids = np.meshgrid(*nodes_1d, indexing="ij")
    xi = np.column_stack([g.ravel() for g in grids])
    wgrids = np.meshgrid(*weights_1d, indexing="ij")
    weights = np.ones(len(xi))
    for g in wgrids:
        weights = weights * g.ravel()

    u = np.zeros_like(xi)
    remaining = np.ones(len(xi))
    for k in range(dim):
        u[:, k] = xi[:, k] * remaining
        remaining = remaining * (1.0 - xi[:, k])

    bary = np.column_stack([1.0 - u.sum(axis=1), u])
    weights = weights * float(factorial(dim))    # normalize: simplex volume 1/d!
    bary.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(dim=dim, degree=degree, points=bary, weights=weights)


# ---------------------------------------------------------------------------
# fields


@dataclass
class ScalarField:
    """Nodal coefficients of a piecewise-affine scalar function."""

    mesh: SimplicialMesh
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.ascontiguousarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.mesh.num_vertices,):
            raise ValueError("scalar coefficient vector has wrong length")
        if not np.isfinite(self.coeffs).all():
            raise ValueError("non-finite scalar coefficients")

    def copy(self) -> "ScalarField":
        return ScalarField(self.mesh, self.coeffs.copy())


@dataclass
class VectorField:
    """Nodal coefficients of a piecewise-affine d-vector function, (nv, d)."""

    mesh: SimplicialMesh
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.ascontiguousarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.mesh.num_vertices, self.mesh.dim):
            raise ValueError("vector coefficient array has wrong shape")
        if not np.isfinite(self.coeffs).all():
            raise ValueError("non-finite vector coefficients")

    def copy(self) -> "VectorField":
        return VectorField(self.mesh, self.coeffs.copy())

    def nodal_norms(self) -> np.ndarray:
        return np.linalg.norm(self.coeffs, axis=1)


def nodal_interpolate(f, mesh: SimplicialMesh):
    """Nodal interpolant: evaluate f at every vertex.

    Returns a ScalarField or a VectorField depending on the shape of f(z).
    """
    first = np.asarray(f(mesh.vertices[0]), dtype=float)
    if first.shape not in ((), (mesh.dim,)):
        raise FieldEvaluationError(f"f must return a scalar or a {mesh.dim}-vector")
    vector = first.shape == (mesh.dim,)
    out = np.empty((mesh.num_vertices, mesh.dim) if vector else mesh.num_vertices)
    out[0] = first
    for i in range(1, mesh.num_vertices):
        out[i] = f(mesh.vertices[i])
    if not np.isfinite(out).all():
        bad = int(np.flatnonzero(~np.isfinite(out.reshape(mesh.num_vertices, -1)).all(axis=1))[0])
        raise FieldEvaluationError(
            f"non-finite value at vertex {bad} (coords {mesh.vertices[bad]})"
        )
    return VectorField(mesh, out) if vector else ScalarField(mesh, out)


# ---------------------------------------------------------------------------
# assembly helpers

def _local_mass_template(d: int) -> np.ndarray:
    # int_K phi_i phi_j = vol * (1 + delta_ij) / ((d+1)(d+2))
    return (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))


def _scatter(mesh: SimplicialMesh, local: np.ndarray) -> sp.csr_matrix:
    """Accumulate (nc, d+1, d+1) cell blocks into a CSR matrix."""
    nv = mesh.num_vertices
    rows = np.broadcast_to(mesh.cells[:, :, None], local.shape)
    cols = np.broadcast_to(mesh.cells[:, None, :], local.shape)
    mat = sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(nv, nv))
    out = mat.tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def _p1_product_integral(vals: np.ndarray, d: int) -> np.ndarray:
    """(1/vol) * int_K u_h^2 from nodal values (nc, d+1)."""
    s1 = vals.sum(axis=1)
    s2 = (vals ** 2).sum(axis=1)
    return (s1 ** 2 + s2) / ((d + 1) * (d + 2))


def _grad_on_cells(mesh: SimplicialMesh, coeffs: np.ndarray) -> np.ndarray:
    """Per-cell constant gradient of a P1 scalar field, (nc, d)."""
    return np.einsum("ci,cid->cd", coeffs[mesh.cells], mesh.cell_grads)


def assemble_mass(mesh: SimplicialMesh) -> sp.csr_matrix:
    """Consistent mass matrix (phi_i, phi_j), SPD."""
    local = mesh.cell_volume[:, None, None] * _local_mass_template(mesh.dim)
    return _scatter(mesh, local)


def assemble_stiffness_weighted(mesh: SimplicialMesh, w) -> sp.csr_matrix:
    """Stiffness with a per-cell nonnegative weight: sum_K w_K (grad, grad)_K."""
    w = np.broadcast_to(np.asarray(w, dtype=float), (mesh.num_cells,))
    if not np.isfinite(w).all():
        raise ValueError("non-finite cell weights")
    if np.any(w < 0):
        raise ValueError("negative cell weight in weighted stiffness")
    gg = np.einsum("cid,cjd->cij", mesh.cell_grads, mesh.cell_grads)
    local = (w * mesh.cell_volume)[:, None, None] * gg
    return _scatter(mesh, local)


def assemble_s2_stiffness(mesh: SimplicialMesh, s: ScalarField) -> sp.csr_matrix:
    """(s_h^2 grad phi_i, grad phi_j): exact, s_h^2 is quadratic per cell."""
    s2_int = _p1_product_integral(s.coeffs[mesh.cells], mesh.dim)
    gg = np.einsum("cid,cjd->cij", mesh.cell_grads, mesh.cell_grads)
    local = (s2_int * mesh.cell_volume)[:, None, None] * gg
    return _scatter(mesh, local)


def assemble_gradsq_mass(mesh: SimplicialMesh, s: ScalarField) -> sp.csr_matrix:
    """(|grad s_h|^2 phi_i, phi_j): the gradient is constant per cell."""
    w = (_grad_on_cells(mesh, s.coeffs) ** 2).sum(axis=1)
    local = (w * mesh.cell_volume)[:, None, None] * _local_mass_template(mesh.dim)
    return _scatter(mesh, local)


def assemble_nsq_stiffness(mesh: SimplicialMesh, n: VectorField) -> sp.csr_matrix:
    """(|n_h|^2 grad phi_i, grad phi_j): |n_h|^2 is quadratic per cell."""
    d = mesh.dim
    n_int = sum(_p1_product_integral(n.coeffs[mesh.cells, c], d) for c in range(d))
    gg = np.einsum("cid,cjd->cij", mesh.cell_grads, mesh.cell_grads)
    local = (n_int * mesh.cell_volume)[:, None, None] * gg
    return _scatter(mesh, local)


def assemble_gradnsq_mass(mesh: SimplicialMesh, n: VectorField) -> sp.csr_matrix:
    """(|Grad n_h|_F^2 phi_i, phi_j): the Jacobian is constant per cell."""
    J = np.einsum("cie,cid->ced", n.coeffs[mesh.cells], mesh.cell_grads)
    w = (J ** 2).sum(axis=(1, 2))
    local = (w * mesh.cell_volume)[:, None, None] * _local_mass_template(mesh.dim)
    return _scatter(mesh, local)


# ---------------------------------------------------------------------------
# energies and constraint error


def _elastic_cellwise(mesh, s_coeffs, n_coeffs, kappa):
    d = mesh.dim
    grad_s_sq = (_grad_on_cells(mesh, s_coeffs) ** 2).sum(axis=1)
    n_sq_int = sum(_p1_product_integral(n_coeffs[mesh.cells, c], d) for c in range(d))
    J = np.einsum("cie,cid->ced", n_coeffs[mesh.cells], mesh.cell_grads)
    grad_n_sq = (J ** 2).sum(axis=(1, 2))
    s_sq_int = _p1_product_integral(s_coeffs[mesh.cells], d)
    per_cell = kappa * grad_s_sq * n_sq_int + grad_n_sq * s_sq_int
    return 0.5 * float((per_cell * mesh.cell_volume).sum())


def energy_elastic(s: ScalarField, n: VectorField, kappa: float) -> float:
    """Elastic energy 1/2 int ( kappa |n_h (x) grad s_h|^2 + s_h^2 |Grad n_h|^2 ).

    Exact for P1 fields; uses |n (x) grad s|^2 = |n|^2 |grad s|^2 cellwise.
    """
    if s.mesh is not n.mesh:
        raise ValueError("fields live on different meshes")
    return _elastic_cellwise(s.mesh, s.coeffs, n.coeffs, float(kappa))


def energy_potential(s: ScalarField, dw) -> float:
    """Potential energy int psi(s_h), integrated exactly (degree-4 rule)."""
    mesh = s.mesh
    rule = QuadratureRule.simplex(mesh.dim, 4)
    vals = s.coeffs[mesh.cells] @ rule.points.T          # (nc, npts)
    cell_int = dw.value(vals) @ rule.weights
    return float((cell_int * mesh.cell_volume).sum())


def unit_length_error(n: VectorField) -> float:
    """L1 norm of the nodal interpolant of |n_h|^2 - 1.

    The interpolant is piecewise linear; its absolute value is integrated
    with a positive degree-2 rule, which is exact unless the interpolant
    changes sign inside a cell.
    """
    mesh = n.mesh
    m = (n.coeffs ** 2).sum(axis=1) - 1.0
    rule = QuadratureRule.simplex(mesh.dim, 2)
    vals = m[mesh.cells] @ rule.points.T
    cell_int = np.abs(vals) @ rule.weights
    return float((cell_int * mesh.cell_volume).sum())
