import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ericksen.fem import assemble_mass, assemble_stiffness_weighted
from ericksen.linalg import (
    DegenerateDirectorError,
    LinearSolveError,
    TangentBasis,
    build_tangent_basis,
    cg_solve,
    reduced_solve,
    vector_operator,
)
from ericksen.mesh import boundary_vertices, generate_unit_cube, generate_unit_square
from oracles import dense_kkt_solve


class TestCg:
    def test_identity(self):
        A = sp.identity(5, format="csr")
        b = np.arange(5.0)
        assert np.allclose(cg_solve(A, b), b, atol=1e-12)

    def test_mass_matrix_vs_dense(self):
        mesh = generate_unit_square(1)
        M = assemble_mass(mesh)
        rng = np.random.default_rng(0)
        b = rng.normal(size=mesh.num_vertices)
        x = cg_solve(M, b, tol=1e-12)
        assert np.abs(x - np.linalg.solve(M.toarray(), b)).max() < 1e-10

    def test_singular_compatible_rhs(self):
        # stiffness without Dirichlet rows: kernel = constants; b orthogonal to it
        mesh = generate_unit_square(3)
        K = assemble_stiffness_weighted(mesh, 1.0)
        rng = np.random.default_rng(1)
        x_true = rng.normal(size=mesh.num_vertices)
        x_true -= x_true.mean()
        b = K @ x_true
        # Jacobi diag of K is positive, CG stays in range(K)
        x = cg_solve(K, b, tol=1e-12, maxit=10000)
        r = b - K @ x
        assert np.linalg.norm(r) < 1e-9 * np.linalg.norm(b)

    def test_error_norm_monotone_in_A_norm(self):
        mesh = generate_unit_square(2)
        M = (assemble_mass(mesh) + assemble_stiffness_weighted(mesh, 1.0)).tocsr()
        rng = np.random.default_rng(2)
        b = rng.normal(size=mesh.num_vertices)
        x_star = np.linalg.solve(M.toarray(), b)
        norms = []
        cg_solve(M, b, tol=1e-13,
                 callback=lambda xk: norms.append((xk - x_star) @ (M @ (xk - x_star))))
        assert all(b <= a + 1e-14 for a, b in zip(norms, norms[1:]))

    def test_maxit_exhaustion(self):
        mesh = generate_unit_square(3)
        K = (assemble_mass(mesh) + assemble_stiffness_weighted(mesh, 1.0)).tocsr()
        b = np.ones(mesh.num_vertices)
        with pytest.raises(LinearSolveError, match="did not converge"):
            cg_solve(K, b, tol=1e-14, maxit=2)

    def test_indefinite_detected(self):
        A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))  # eigenvalues 3, -1
        with pytest.raises(LinearSolveError):
            cg_solve(A, np.array([0.0, 1.0]))

    def test_nonfinite_rejected(self):
        A = sp.identity(3, format="csr")
        with pytest.raises(LinearSolveError):
            cg_solve(A, np.array([1.0, np.nan, 0.0]))

    def test_zero_rhs(self):
        A = sp.identity(4, format="csr")
        assert np.all(cg_solve(A, np.zeros(4)) == 0.0)


class TestTangentBasis:
    def test_2d_axis_case(self):
        frames = build_tangent_basis(np.array([[0.0, 1.0]]), np.array([0])).frames
        assert np.allclose(frames[0, :, 0], [1.0, 0.0])

    def test_3d_axis_case(self):
        frames = build_tangent_basis(np.array([[0.0, 0.0, 1.0]]), np.array([0])).frames
        assert np.allclose(frames[0, :, 0], [1.0, 0.0, 0.0])
        assert np.allclose(frames[0, :, 1], [0.0, 1.0, 0.0])

    @given(hnp.arrays(float, (20, 3), elements=st.floats(-1, 1)))
    @settings(max_examples=50, deadline=None)
    def test_orthonormal_frames(self, vals):
        norms = np.linalg.norm(vals, axis=1)
        if np.any(norms < 1e-3):
            vals = vals + 2.0  # keep directors away from zero
        basis = build_tangent_basis(vals, np.arange(len(vals)))
        dots = np.einsum("pda,pd->pa", basis.frames, vals)
        scale = np.linalg.norm(vals, axis=1)[:, None]
        assert np.abs(dots / scale).max() < 1e-12
        gram = np.einsum("pda,pdb->pab", basis.frames, basis.frames)
        assert np.abs(gram - np.eye(2)).max() < 1e-12

    def test_zero_director_rejected(self):
        vals = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(DegenerateDirectorError, match="vertex 1"):
            build_tangent_basis(vals, np.arange(2))

    def test_dirichlet_rows_zero(self):
        rng = np.random.default_rng(3)
        vals = rng.normal(size=(6, 2)) + 2.0
        basis = build_tangent_basis(vals, np.array([1, 4]))
        Z = basis.to_matrix().toarray()
        nonzero_rows = np.flatnonzero(np.abs(Z).sum(axis=1))
        assert set(nonzero_rows) == {2, 3, 8, 9}


class TestReducedSolve:
    @pytest.mark.parametrize("mesh_fn,seed", [
        (lambda: generate_unit_square(2), 0),   # 9 vertices
        (lambda: generate_unit_square(4), 1),   # 25 vertices
        (lambda: generate_unit_cube(1), 2),     # 8 vertices, d=3
    ])
    def test_matches_dense_kkt(self, mesh_fn, seed):
        mesh = mesh_fn()
        rng = np.random.default_rng(seed)
        A = (assemble_mass(mesh)
             + 0.1 * assemble_stiffness_weighted(mesh, 1.0)).tocsr()
        n_vals = rng.normal(size=(mesh.num_vertices, mesh.dim))
        n_vals /= np.linalg.norm(n_vals, axis=1)[:, None]
        d_idx = boundary_vertices(mesh, set(np.unique(mesh.boundary_tags)))
        free = np.setdiff1d(np.arange(mesh.num_vertices), d_idx)
        rhs = rng.normal(size=(mesh.num_vertices, mesh.dim))
        basis = build_tangent_basis(n_vals, free)
        t = reduced_solve(A, basis, rhs, tol=1e-14)
        t_kkt = dense_kkt_solve(A, n_vals, d_idx, rhs)
        assert np.abs(t - t_kkt).max() < 1e-9

    def test_zero_rhs(self):
        mesh = generate_unit_square(2)
        rng = np.random.default_rng(4)
        n_vals = rng.normal(size=(mesh.num_vertices, 2)) + 2.0
        basis = build_tangent_basis(n_vals, np.arange(mesh.num_vertices))
        A = assemble_mass(mesh)
        t = reduced_solve(A, basis, np.zeros((mesh.num_vertices, 2)))
        assert np.all(t == 0.0)

    def test_tangency_exact(self):
        mesh = generate_unit_cube(1)
        rng = np.random.default_rng(5)
        n_vals = rng.normal(size=(mesh.num_vertices, 3))
        n_vals /= np.linalg.norm(n_vals, axis=1)[:, None]
        basis = build_tangent_basis(n_vals, np.arange(mesh.num_vertices))
        A = (assemble_mass(mesh) + 0.05 * assemble_stiffness_weighted(mesh, 1.0)).tocsr()
        rhs = rng.normal(size=(mesh.num_vertices, 3))
        t = reduced_solve(A, basis, rhs, tol=1e-12)
        dots = np.einsum("zd,zd->z", t, n_vals)
        assert np.abs(dots).max() <= 1e-12 * max(1.0, np.abs(t).max())

    def test_reduced_operator_positive(self):
        mesh = generate_unit_square(3)
        rng = np.random.default_rng(6)
        n_vals = rng.normal(size=(mesh.num_vertices, 2)) + 1.5
        basis = build_tangent_basis(n_vals, np.arange(mesh.num_vertices))
        A = (assemble_mass(mesh) + 0.1 * assemble_stiffness_weighted(mesh, 1.0)).tocsr()
        Z = basis.to_matrix()
        R = (Z.T @ vector_operator(A, 2) @ Z).toarray()
        for _ in range(10):
            v = rng.normal(size=R.shape[0])
            assert v @ (R @ v) > 0

    def test_expand_restrict_roundtrip(self):
        rng = np.random.default_rng(7)
        vals = rng.normal(size=(10, 3)) + 1.2
        basis = build_tangent_basis(vals, np.arange(10))
        y = rng.normal(size=basis.reduced_size)
        assert np.allclose(basis.restrict(basis.expand(y)), y, atol=1e-13)
