import numpy as np
import pytest

import ericksen.model as mdl
from ericksen.fem import ScalarField, VectorField, energy_elastic, energy_potential
from ericksen.flow import (
    CflReport,
    FlowConfig,
    FlowWarning,
    cfl_check,
    inner_loop,
    inner_step,
    metric_matrix,
    outer_loop,
    s_step,
    stability_bounds,
    _director_system,
    _inner_step_system,
)
from ericksen.linalg import LinearSolveError
from ericksen.mesh import boundary_vertices, generate_unit_cube, generate_unit_square
from ericksen.model import (
    S_HAT,
    DoubleWell,
    dirichlet_data,
    initial_state,
    build_mesh,
    preset,
)


def small_problem(n=6, blend=0.1):
    pr = mdl.with_params(preset("point2d"), mesh_params={"n": n}, blend_width=blend)
    mesh = build_mesh(pr)
    dw = DoubleWell(pr.c_dw)
    dd = dirichlet_data(pr, mesh)
    state0 = initial_state(pr, mesh, dd)
    cfg = FlowConfig(kappa=pr.kappa, tau_n=pr.tau_n, tau_s=pr.tau_s,
                     tol_inner=pr.tol, tol_outer=pr.tol)
    return mesh, dw, dd, state0, cfg


def small_problem_3d(n=3):
    pr = mdl.with_params(preset("plane3d"), mesh_params={"n": n})
    mesh = build_mesh(pr)
    dw = DoubleWell(pr.c_dw)
    dd = dirichlet_data(pr, mesh)
    state0 = initial_state(pr, mesh, dd)
    cfg = FlowConfig(kappa=pr.kappa, tau_n=pr.tau_n, tau_s=pr.tau_s,
                     tol_inner=pr.tol, tol_outer=pr.tol)
    return mesh, dw, dd, state0, cfg


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            FlowConfig(kappa=0.0, tau_n=0.1, tau_s=0.1)
        with pytest.raises(ValueError):
            FlowConfig(kappa=1.0, tau_n=0.1, tau_s=0.1, metric="h2")
        with pytest.raises(ValueError):
            FlowConfig(kappa=1.0, tau_n=0.1, tau_s=0.1, metric="h1", alpha=2.5)

    def test_metric_matrices(self):
        mesh = generate_unit_square(2)
        cfg_l2 = FlowConfig(kappa=1.0, tau_n=0.1, tau_s=0.1, metric="l2")
        from ericksen.fem import assemble_mass, assemble_stiffness_weighted
        assert np.abs((metric_matrix(cfg_l2, mesh) - assemble_mass(mesh)).toarray()).max() == 0
        cfg_h1 = FlowConfig(kappa=1.0, tau_n=0.1, tau_s=0.1, metric="h1", alpha=2.0)
        expected = assemble_mass(mesh) + assemble_stiffness_weighted(mesh, mesh.h_K ** 2)
        assert np.abs((metric_matrix(cfg_h1, mesh) - expected).toarray()).max() < 1e-15


class TestInnerStep:
    @pytest.mark.parametrize("problem", [small_problem, small_problem_3d])
    def test_nodal_norm_recursion(self, problem):
        mesh, dw, dd, state0, cfg = problem()
        d_idx = boundary_vertices(mesh, dd.tags)
        t, n1 = inner_step(state0.s, state0.n, cfg, d_idx)
        lhs = (n1.coeffs ** 2).sum(axis=1)
        rhs = (state0.n.coeffs ** 2).sum(axis=1) + cfg.tau_n ** 2 * (t.coeffs ** 2).sum(axis=1)
        assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())

    @pytest.mark.parametrize("metric,alpha", [("l2", 2.0), ("h1", 2.0), ("h1", 1.7)])
    def test_inner_energy_identity(self, metric, alpha):
        mesh, dw, dd, state0, cfg = small_problem()
        cfg = FlowConfig(kappa=cfg.kappa, tau_n=cfg.tau_n, tau_s=cfg.tau_s,
                         metric=metric, alpha=alpha)
        d_idx = boundary_vertices(mesh, dd.tags)
        system = _director_system(state0.s, cfg, d_idx)
        n = state0.n
        for _ in range(3):
            t, n_next = _inner_step_system(system, n, cfg)
            e_before = energy_elastic(state0.s, n, cfg.kappa)
            e_after = energy_elastic(state0.s, n_next, cfg.kappa)
            metric_sq = float(np.sum(t.coeffs * (system.metric @ t.coeffs)))
            resid = (e_after - e_before + cfg.tau_n * metric_sq
                     + cfg.tau_n ** 2 * energy_elastic(state0.s, t, cfg.kappa))
            assert abs(resid) <= 1e-9 * max(e_before, 1.0)
            n = n_next

    def test_equilibrium_fixed_point(self):
        # constant director field with matching boundary data: rhs projects to zero
        mesh = generate_unit_cube(2)
        from ericksen.model import DirichletData
        dd = DirichletData(tags=frozenset({1, 2, 3, 4, 5, 6}), g=lambda x: S_HAT,
                           r=lambda x: S_HAT * np.array([1.0, 0.0, 0.0]))
        d_idx = boundary_vertices(mesh, dd.tags)
        coeffs = np.zeros((mesh.num_vertices, 3))
        coeffs[:, 0] = 1.0
        n = VectorField(mesh, coeffs)
        s = ScalarField(mesh, np.full(mesh.num_vertices, S_HAT))
        cfg = FlowConfig(kappa=1.0, tau_n=0.05, tau_s=0.05)
        t, n1 = inner_step(s, n, cfg, d_idx)
        assert np.abs(t.coeffs).max() < 1e-12
        assert np.abs(n1.coeffs - n.coeffs).max() < 1e-13

    def test_nodal_norms_never_decrease(self):
        mesh, dw, dd, state0, cfg = small_problem()
        d_idx = boundary_vertices(mesh, dd.tags)
        n = state0.n
        prev = n.nodal_norms()
        for _ in range(4):
            _, n = inner_step(state0.s, n, cfg, d_idx)
            cur = n.nodal_norms()
            assert np.all(cur >= prev - 1e-13)
            assert np.all(cur >= 1.0 - 1e-12)
            prev = cur


class TestInnerLoop:
    def test_huge_tolerance_single_step(self):
        mesh, dw, dd, state0, cfg = small_problem()
        d_idx = boundary_vertices(mesh, dd.tags)
        cfg = FlowConfig(kappa=cfg.kappa, tau_n=cfg.tau_n, tau_s=cfg.tau_s,
                         tol_inner=1e9, tol_outer=cfg.tol_outer)
        _, count = inner_loop(state0.s, state0.n, cfg, d_idx)
        assert count == 1

    def test_e1_monotone_across_loop(self):
        mesh, dw, dd, state0, cfg = small_problem()
        d_idx = boundary_vertices(mesh, dd.tags)
        system = _director_system(state0.s, cfg, d_idx)
        n = state0.n
        energies = [energy_elastic(state0.s, n, cfg.kappa)]
        for _ in range(6):
            _, n = _inner_step_system(system, n, cfg)
            energies.append(energy_elastic(state0.s, n, cfg.kappa))
        assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))

    def test_max_inner_warns_and_continues(self):
        mesh, dw, dd, state0, cfg = small_problem()
        d_idx = boundary_vertices(mesh, dd.tags)
        cfg = FlowConfig(kappa=cfg.kappa, tau_n=cfg.tau_n, tau_s=cfg.tau_s,
                         tol_inner=1e-14, tol_outer=1e-6, max_inner=2)
        with pytest.warns(FlowWarning):
            n, count = inner_loop(state0.s, state0.n, cfg, d_idx)
        assert count == 2


class TestSStep:
    def test_constant_stationary(self):
        # c_dw = 0, constant director, s = g on a fully Dirichlet mesh
        mesh = generate_unit_square(3)
        from ericksen.model import DirichletData
        dd = DirichletData(tags=frozenset({1}), g=lambda x: S_HAT,
                           r=lambda x: S_HAT * np.array([1.0, 0.0]))
        d_idx = boundary_vertices(mesh, dd.tags)
        coeffs = np.zeros((mesh.num_vertices, 2))
        coeffs[:, 0] = 1.0
        n = VectorField(mesh, coeffs)
        s_old = ScalarField(mesh, np.full(mesh.num_vertices, S_HAT))
        cfg = FlowConfig(kappa=1.3, tau_n=0.1, tau_s=0.1)
        s_new = s_step(n, s_old, cfg, DoubleWell(0.0), d_idx,
                       np.full(len(d_idx), S_HAT))
        assert np.abs(s_new.coeffs - S_HAT).max() < 1e-10

    def test_double_well_stationary_at_shat(self):
        # with the potential on, s = s_hat remains (near-)stationary
        mesh = generate_unit_square(3)
        d_idx = boundary_vertices(mesh, {1})
        coeffs = np.zeros((mesh.num_vertices, 2))
        coeffs[:, 0] = 1.0
        n = VectorField(mesh, coeffs)
        s_old = ScalarField(mesh, np.full(mesh.num_vertices, S_HAT))
        cfg = FlowConfig(kappa=1.0, tau_n=0.1, tau_s=0.1)
        s_new = s_step(n, s_old, cfg, DoubleWell(0.1 * 0.3 ** -2), d_idx,
                       np.full(len(d_idx), S_HAT))
        # psi'(S_HAT) is ~6e-4 c_dw, so the move is tiny but nonzero
        assert np.abs(s_new.coeffs - S_HAT).max() < 1e-5


class TestOuterLoop:
    def test_energy_monotone_and_quantified_drop(self):
        mesh, dw, dd, state0, cfg = small_problem(n=8)
        run = outer_loop(state0, cfg, dw, dd)
        assert run.converged
        energies = [run.initial_energy] + [r.energy for r in run.history]
        slack = 1e-10 * run.initial_energy
        assert all(b <= a + slack for a, b in zip(energies, energies[1:]))
        for r in run.history:
            assert r.energy_drop >= r.dissipation - 1e-9 * run.initial_energy

    def test_equilibrium_terminates_immediately(self):
        mesh = generate_unit_cube(2)
        from ericksen.model import DirichletData, EricksenState
        dd = DirichletData(tags=frozenset({1, 2, 3, 4, 5, 6}), g=lambda x: S_HAT,
                           r=lambda x: S_HAT * np.array([0.0, 0.0, 1.0]))
        coeffs = np.zeros((mesh.num_vertices, 3))
        coeffs[:, 2] = 1.0
        state0 = EricksenState(
            ScalarField(mesh, np.full(mesh.num_vertices, S_HAT)),
            VectorField(mesh, coeffs))
        cfg = FlowConfig(kappa=0.5, tau_n=0.05, tau_s=0.05)
        run = outer_loop(state0, cfg, DoubleWell(0.0), dd)
        assert run.converged
        assert run.outer_iters == 1
        assert abs(run.history[0].energy_drop) < 1e-12

    def test_max_outer_flagged(self):
        mesh, dw, dd, state0, cfg = small_problem(n=8)
        cfg = FlowConfig(kappa=cfg.kappa, tau_n=cfg.tau_n, tau_s=cfg.tau_s,
                         tol_inner=1e-6, tol_outer=1e-12, max_outer=3)
        with pytest.warns(FlowWarning):
            run = outer_loop(state0, cfg, dw, dd)
        assert not run.converged
        assert run.outer_iters == 3

    def test_invalid_initial_rejected(self):
        mesh, dw, dd, state0, cfg = small_problem()
        state0.n.coeffs[len(state0.n.coeffs) // 2] *= 1.5
        with pytest.raises(ValueError, match="nodally unit"):
            outer_loop(state0, cfg, dw, dd)

    def test_callback_and_final_admissibility(self):
        mesh, dw, dd, state0, cfg = small_problem(n=5)
        seen = []
        run = outer_loop(state0, cfg, dw, dd,
                         callback=lambda rec, st: seen.append(rec.i))
        assert seen == [r.i for r in run.history]
        assert run.admissibility is not None
        assert run.admissibility.n_no_collapse

    def test_randomized_small_meshes_monotone(self):
        # perturbed interior directors, random admissible s; energy must decay
        rng = np.random.default_rng(12)
        for trial in range(3):
            mesh = generate_unit_square(5)  # 36 vertices <= 200
            from ericksen.model import DirichletData, EricksenState
            dd = DirichletData(tags=frozenset({1}), g=lambda x: S_HAT,
                               r=lambda x: S_HAT * np.array([1.0, 0.0]))
            d_idx = boundary_vertices(mesh, {1})
            coeffs = rng.normal(size=(mesh.num_vertices, 2))
            coeffs /= np.linalg.norm(coeffs, axis=1)[:, None]
            coeffs[d_idx] = [1.0, 0.0]
            s_vals = rng.uniform(0.1, 0.9, mesh.num_vertices)
            s_vals[d_idx] = S_HAT
            state0 = EricksenState(ScalarField(mesh, s_vals),
                                   VectorField(mesh, coeffs))
            cfg = FlowConfig(kappa=rng.uniform(0.2, 2.0), tau_n=0.05, tau_s=0.05,
                             max_outer=40)
            import warnings
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", FlowWarning)
                run = outer_loop(state0, cfg, DoubleWell(rng.uniform(0.0, 1.5)), dd)
            energies = [run.initial_energy] + [r.energy for r in run.history]
            slack = 1e-10 * max(run.initial_energy, 1.0)
            assert all(b <= a + slack for a, b in zip(energies, energies[1:]))
            norms_ok = run.state.n.nodal_norms() >= 1.0 - 1e-12
            assert np.all(norms_ok)


class TestCfl:
    def test_l2_scaling_constant_over_sweep(self):
        values = []
        for level in range(3):
            mesh = generate_unit_square(8 * 2 ** level)
            cfg = FlowConfig(kappa=2.0, tau_n=0.1 * 2.0 ** (-2 * level), tau_s=0.1)
            values.append(cfl_check(cfg, mesh).value)
        assert np.allclose(values, values[0], rtol=1e-12)

    def test_tau_to_zero(self):
        mesh = generate_unit_square(4)
        v1 = cfl_check(FlowConfig(kappa=1.0, tau_n=0.1, tau_s=0.1), mesh).value
        v2 = cfl_check(FlowConfig(kappa=1.0, tau_n=0.0125, tau_s=0.1), mesh).value
        assert v2 == pytest.approx(v1 / 8.0, rel=1e-12)

    def test_alpha2_matches_l2_exponent(self):
        mesh = generate_unit_square(4)
        l2 = cfl_check(FlowConfig(kappa=1.0, tau_n=0.1, tau_s=0.1), mesh)
        h1 = cfl_check(FlowConfig(kappa=1.0, tau_n=0.1, tau_s=0.1,
                                  metric="h1", alpha=2.0), mesh)
        # 2 - d - alpha = -2 = -d for d = 2: same power of h_min
        assert h1.value == pytest.approx(l2.value * np.log(mesh.h_min) ** 2, rel=1e-12)


class TestStabilityBounds:
    def test_report_fields(self):
        mesh, dw, dd, state0, cfg = small_problem(n=8)
        run = outer_loop(state0, cfg, dw, dd)
        rep = stability_bounds(run)
        assert rep.monotone
        assert rep.nodal_norms_ge_one
        assert rep.c1_fit == pytest.approx(rep.ratios.max())
        assert np.all(rep.err_n >= 0)

    def test_initial_error_zero(self):
        mesh, dw, dd, state0, cfg = small_problem(n=4)
        from ericksen.fem import unit_length_error
        assert unit_length_error(state0.n) == pytest.approx(0.0, abs=1e-13)
