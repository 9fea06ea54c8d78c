"""Nested alternating-direction gradient flow for the discrete energy.

Outer iteration i: (i) an inner loop of linearly-implicit tangential updates
of the director n with the degree of orientation s frozen, stopped when the
elastic energy stalls; (ii) one linearly-implicit step for s with the new
director frozen, treating the convex (quadratic) part of the double well
implicitly and the concave remainder explicitly.  The scheme never projects
the director onto the unit sphere; nodal norms satisfy
|n(z)|^2 += tau_n^2 |t(z)|^2 per update, so they only grow and the accrued
unit-length violation is proportional to tau_n.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fem import (
    ScalarField,
    VectorField,
    QuadratureRule,
    assemble_gradnsq_mass,
    assemble_gradsq_mass,
    assemble_mass,
    assemble_nsq_stiffness,
    assemble_s2_stiffness,
    assemble_stiffness_weighted,
    energy_elastic,
    energy_potential,
    unit_length_error,
)
from .linalg import build_tangent_basis, cg_solve, reduced_solve, vector_operator
from .mesh import SimplicialMesh
from .model import (
    AdmissibilityReport,
    DirichletData,
    DoubleWell,
    EricksenState,
    check_admissibility,
)

__all__ = [
    "FlowConfig",
    "OuterRecord",
    "FlowState",
    "FlowWarning",
    "metric_matrix",
    "inner_step",
    "inner_loop",
    "s_step",
    "outer_loop",
    "cfl_check",
    "CflReport",
    "stability_bounds",
    "StabilityReport",
]


class FlowWarning(UserWarning):
    """Iteration guard tripped; the run continues and is flagged."""


@dataclass
class FlowConfig:
    """All run parameters of the nested gradient flow."""

    kappa: float
    tau_n: float
    tau_s: float
    metric: str = "l2"            # "l2" or "h1" (weighted H1 with exponent alpha)
    alpha: float = 2.0
    tol_inner: float = 1e-6
    tol_outer: float = 1e-6
    eps_admissible: float = 0.1
    max_outer: int = 100000
    max_inner: int = 100000
    cg_tol: float = 1e-10
    cg_maxit: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = {
            "kappa": self.kappa, "tau_n": self.tau_n, "tau_s": self.tau_s,
            "tol_inner": self.tol_inner, "tol_outer": self.tol_outer,
            "eps_admissible": self.eps_admissible, "cg_tol": self.cg_tol,
        }
        for name, value in positive.items():
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite real, got {value}")
        if self.metric not in ("l2", "h1"):
            raise ValueError("metric must be 'l2' or 'h1'")
        if self.metric == "h1" and not (0.0 < self.alpha <= 2.0):
            raise ValueError("weighted H1 metric needs alpha in (0, 2]")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be >= 1")


def metric_matrix(config: FlowConfig, mesh: SimplicialMesh) -> sp.csr_matrix:
    """Gram matrix of the metric driving the director flow.

    L2: the consistent mass matrix.  Weighted H1: the full inner product
    (phi, psi) + (h_K^alpha grad phi, grad psi).  Including the mass term
    keeps the metric an upper bound for the L2 norm (the hypothesis behind
    the tau_n-proportional violation bound) and avoids a semidefinite
    operator; alpha = 2 then behaves like the L2 metric on oscillatory
    modes while damping them more strongly for smaller alpha.
    """
    mass = assemble_mass(mesh)
    if config.metric == "l2":
        return mass
    stiff = assemble_stiffness_weighted(mesh, mesh.h_K ** config.alpha)
    return (mass + stiff).tocsr()


@dataclass
class _DirectorSystem:
    """Operators of the tangential update, fixed while s is frozen."""

    metric: sp.csr_matrix         # M*
    rhs_op: sp.csr_matrix         # kappa * (|grad s|^2 mass) + (s^2 stiffness)
    a_scalar: sp.csr_matrix       # M* + tau_n * rhs_op
    vec_op: sp.csr_matrix         # componentwise a_scalar
    free: np.ndarray              # non-Dirichlet vertex indices


def _director_system(s: ScalarField, config: FlowConfig, dirichlet_idx,
                     metric: sp.csr_matrix | None = None) -> _DirectorSystem:
    mesh = s.mesh
    if metric is None:
        metric = metric_matrix(config, mesh)
    weighted_mass = assemble_gradsq_mass(mesh, s)
    weighted_stiff = assemble_s2_stiffness(mesh, s)
    rhs_op = (config.kappa * weighted_mass + weighted_stiff).tocsr()
    a_scalar = (metric + config.tau_n * rhs_op).tocsr()
    mask = np.ones(mesh.num_vertices, dtype=bool)
    mask[np.asarray(dirichlet_idx, dtype=np.int64)] = False
    free = np.flatnonzero(mask)
    return _DirectorSystem(
        metric=metric, rhs_op=rhs_op, a_scalar=a_scalar,
        vec_op=vector_operator(a_scalar, mesh.dim), free=free,
    )


def _inner_step_system(system: _DirectorSystem, n: VectorField,
                       config: FlowConfig) -> tuple[VectorField, VectorField]:
    basis = build_tangent_basis(n.coeffs, system.free)
    rhs = -(system.rhs_op @ n.coeffs)
    t = reduced_solve(system.a_scalar, basis, rhs, tol=config.cg_tol,
                      maxit=config.cg_maxit, vec_op=system.vec_op)
    t_field = VectorField(n.mesh, t)
    n_next = VectorField(n.mesh, n.coeffs + config.tau_n * t)
    return t_field, n_next


def inner_step(s: ScalarField, n: VectorField, config: FlowConfig,
               dirichlet_idx=()) -> tuple[VectorField, VectorField]:
    """One tangential update: solve for t in the discrete tangent space of n
    (zero on the Dirichlet set) and return (t, n + tau_n * t)."""
    system = _director_system(s, config, dirichlet_idx)
    return _inner_step_system(system, n, config)


@dataclass
class _InnerDiagnostics:
    count: int
    flagged: bool
    metric_sq_sum: float          # sum_l ||t^l||_*^2
    e1_of_t_sum: float            # sum_l E1[s, t^l]
    e1_final: float


def _inner_loop_system(system: _DirectorSystem, s: ScalarField, n: VectorField,
                       config: FlowConfig) -> tuple[VectorField, _InnerDiagnostics]:
    e1_prev = energy_elastic(s, n, config.kappa)
    metric_sq_sum = 0.0
    e1_of_t_sum = 0.0
    for step in range(config.max_inner):
        t, n_next = _inner_step_system(system, n, config)
        metric_sq_sum += float(np.sum(t.coeffs * (system.metric @ t.coeffs)))
        e1_of_t_sum += energy_elastic(s, t, config.kappa)
        e1_next = energy_elastic(s, n_next, config.kappa)
        n = n_next
        if abs(e1_next - e1_prev) < config.tol_inner:
            return n, _InnerDiagnostics(step + 1, False, metric_sq_sum,
                                        e1_of_t_sum, e1_next)
        e1_prev = e1_next
    warnings.warn(f"inner loop hit max_inner={config.max_inner} without meeting "
                  f"tol_inner={config.tol_inner}", FlowWarning, stacklevel=2)
    return n, _InnerDiagnostics(config.max_inner, True, metric_sq_sum,
                                e1_of_t_sum, e1_prev)


def inner_loop(s: ScalarField, n: VectorField, config: FlowConfig,
               dirichlet_idx=()) -> tuple[VectorField, int]:
    """Iterate tangential updates with s frozen until the elastic energy
    change drops below tol_inner; returns the director and the step count."""
    system = _director_system(s, config, dirichlet_idx)
    n_out, diag = _inner_loop_system(system, s, n, config)
    return n_out, diag.count


def _potential_load(s: ScalarField, dw: DoubleWell) -> np.ndarray:
    """Nodal load vector of the explicit part: int psi_e'(s_old) phi_i,
    degree-4 quadrature (exact for the cubic psi_e' composed with P1)."""
    mesh = s.mesh
    rule = QuadratureRule.simplex(mesh.dim, 4)
    vals = dw.eprime(s.coeffs[mesh.cells] @ rule.points.T)       # (nc, npts)
    cell_loads = (vals * rule.weights) @ rule.points             # (nc, d+1)
    cell_loads = cell_loads * mesh.cell_volume[:, None]
    out = np.zeros(mesh.num_vertices)
    np.add.at(out, mesh.cells, cell_loads)
    return out


def s_step(n_new: VectorField, s_old: ScalarField, config: FlowConfig,
           dw: DoubleWell, dirichlet_idx, g_vals,
           mass: sp.csr_matrix | None = None) -> ScalarField:
    """Implicit step for the degree of orientation with the director frozen.

    Solves the SPD system combining the backward difference quotient, the
    |n|^2-weighted diffusion, the |grad n|^2 reaction term and the implicit
    quadratic part of the double well; Dirichlet values are pinned to g.
    """
    mesh = s_old.mesh
    if mass is None:
        mass = assemble_mass(mesh)
    dirichlet_idx = np.asarray(dirichlet_idx, dtype=np.int64)
    g_vals = np.asarray(g_vals, dtype=float)

    stiff_n = assemble_nsq_stiffness(mesh, n_new)
    react_n = assemble_gradnsq_mass(mesh, n_new)
    A = (mass / config.tau_s + config.kappa * stiff_n + react_n
         + 126.0 * dw.c_dw * mass).tocsr()
    b = mass @ s_old.coeffs / config.tau_s + _potential_load(s_old, dw)

    x = np.zeros(mesh.num_vertices)
    x[dirichlet_idx] = g_vals
    mask = np.ones(mesh.num_vertices, dtype=bool)
    mask[dirichlet_idx] = False
    free = np.flatnonzero(mask)
    if len(free):
        A_ff = A[free][:, free].tocsr()
        rhs = b[free] - A[free][:, dirichlet_idx] @ g_vals
        x[free] = cg_solve(A_ff, rhs, tol=config.cg_tol, maxit=config.cg_maxit)
    return ScalarField(mesh, x)


@dataclass
class OuterRecord:
    """Per-outer-iteration log row (postio mirrors these columns)."""

    i: int
    energy: float
    e1: float
    e2: float
    inner_iters: int
    dts_l2: float
    err_n: float
    s_min: float
    s_max: float
    n_max: float
    wall_s: float
    energy_drop: float = 0.0
    dissipation: float = 0.0          # tau_s ||d_t s||^2 + tau_n sum ||t||_*^2
    numerical_dissipation: float = 0.0


@dataclass
class FlowState:
    """Final iterate plus the full outer-iteration history of one run."""

    state: EricksenState
    config: FlowConfig
    initial_energy: float
    initial_e1: float
    initial_e2: float
    history: list[OuterRecord] = field(default_factory=list)
    converged: bool = False
    inner_flagged: bool = False
    admissibility: AdmissibilityReport | None = None

    @property
    def outer_iters(self) -> int:
        return len(self.history)

    @property
    def energy(self) -> float:
        return self.history[-1].energy if self.history else self.initial_energy


def _validate_input(initial: EricksenState, dirichlet_values) -> None:
    norms = initial.n.nodal_norms()
    if np.max(np.abs(norms - 1.0)) > 1e-10:
        raise ValueError("initial director must be nodally unit")
    idx, g_vals, q_vals = dirichlet_values
    if np.max(np.abs(initial.s.coeffs[idx] - g_vals)) > 1e-10:
        raise ValueError("initial s does not match g on the Dirichlet set")
    if np.max(np.abs(initial.n.coeffs[idx] - q_vals)) > 1e-10:
        raise ValueError("initial director does not match r/g on the Dirichlet set")


def outer_loop(initial: EricksenState, config: FlowConfig, dw: DoubleWell,
               dirichlet: DirichletData, callback=None) -> FlowState:
    """Run the nested gradient flow until the total energy stalls.

    Alternates the inner director loop and the s step, recording energies,
    dissipation bounds and constraint diagnostics per outer iteration;
    terminates when |E^(i+1) - E^i| < tol_outer or max_outer is hit (the
    latter flags the run as non-converged but still returns it).  An optional
    callback(record, state) fires after every outer iteration.
    """
    mesh = initial.mesh
    dirichlet_values = dirichlet.nodal_values(mesh)
    _validate_input(initial, dirichlet_values)
    d_idx, g_vals, _ = dirichlet_values

    mass = assemble_mass(mesh)
    metric = metric_matrix(config, mesh)

    s = initial.s.copy()
    n = initial.n.copy()
    e1 = energy_elastic(s, n, config.kappa)
    e2 = energy_potential(s, dw)
    energy_prev = e1 + e2
    run = FlowState(state=EricksenState(s, n), config=config,
                    initial_energy=energy_prev, initial_e1=e1, initial_e2=e2)

    converged = False
    for i in range(1, config.max_outer + 1):
        tic = time.perf_counter()
        system = _director_system(s, config, d_idx, metric=metric)
        n, diag = _inner_loop_system(system, s, n, config)
        run.inner_flagged = run.inner_flagged or diag.flagged

        s_new = s_step(n, s, config, dw, d_idx, g_vals, mass=mass)
        dts = ScalarField(mesh, (s_new.coeffs - s.coeffs) / config.tau_s)
        dts_l2_sq = float(dts.coeffs @ (mass @ dts.coeffs))
        s = s_new

        e1 = energy_elastic(s, n, config.kappa)
        e2 = energy_potential(s, dw)
        energy = e1 + e2
        drop = energy_prev - energy
        record = OuterRecord(
            i=i, energy=energy, e1=e1, e2=e2,
            inner_iters=diag.count,
            dts_l2=float(np.sqrt(dts_l2_sq)),
            err_n=unit_length_error(n),
            s_min=float(s.coeffs.min()), s_max=float(s.coeffs.max()),
            n_max=float(n.nodal_norms().max()),
            wall_s=time.perf_counter() - tic,
            energy_drop=drop,
            dissipation=config.tau_s * dts_l2_sq + config.tau_n * diag.metric_sq_sum,
            numerical_dissipation=(config.tau_s ** 2 * energy_elastic(dts, n, config.kappa)
                                   + config.tau_n ** 2 * diag.e1_of_t_sum),
        )
        run.history.append(record)
        if callback is not None:
            callback(record, EricksenState(s, n))
        if abs(energy - energy_prev) < config.tol_outer:
            converged = True
            energy_prev = energy
            break
        energy_prev = energy

    if not converged:
        warnings.warn(f"outer loop hit max_outer={config.max_outer} without meeting "
                      f"tol_outer={config.tol_outer}", FlowWarning, stacklevel=2)
    run.state = EricksenState(s, n)
    run.converged = converged
    run.admissibility = check_admissibility(run.state, config.eps_admissible)
    return run


@dataclass(frozen=True)
class CflReport:
    metric: str
    value: float
    formula: str


def cfl_check(config: FlowConfig, mesh: SimplicialMesh) -> CflReport:
    """Advisory size of the step-size/mesh-size ratio entering the maximum
    norm bound; the admissible constant is arbitrary, so only the scaling is
    meaningful."""
    d = mesh.dim
    if config.metric == "l2":
        value = config.tau_n * mesh.h_min ** (-d)
        formula = "tau_n * h_min^-d"
    else:
        value = (config.tau_n * mesh.h_min ** (2 - d - config.alpha)
                 * np.log(mesh.h_min) ** 2)
        formula = "tau_n * h_min^(2-d-alpha) * log(h_min)^2"
    return CflReport(metric=config.metric, value=float(value), formula=formula)


@dataclass(frozen=True)
class StabilityReport:
    """Constraint-violation scaling extracted from a trajectory."""

    err_n: np.ndarray             # per recorded outer iteration
    ratios: np.ndarray            # err_n / (tau_n * E0)
    n_max_excess: np.ndarray      # max_z |n(z)| - 1 per iteration
    monotone: bool                # err_n non-decreasing in the iteration index
    c1_fit: float                 # max ratio: empirical constant in the tau_n bound
    nodal_norms_ge_one: bool


def stability_bounds(run: FlowState, initial_energy: float | None = None) -> StabilityReport:
    """Audit a trajectory against the tau_n-proportional violation bound and
    the monotone growth of nodal director norms."""
    if not run.history:
        raise ValueError("empty trajectory")
    e0 = run.initial_energy if initial_energy is None else float(initial_energy)
    err = np.array([r.err_n for r in run.history])
    excess = np.array([r.n_max - 1.0 for r in run.history])
    ratios = err / (run.config.tau_n * e0)
    monotone = bool(np.all(np.diff(err) >= -1e-12 * max(err.max(), 1.0)))
    return StabilityReport(
        err_n=err, ratios=ratios, n_max_excess=excess, monotone=monotone,
        c1_fit=float(ratios.max()),
        nodal_norms_ge_one=bool(np.all(excess >= -1e-12)),
    )
