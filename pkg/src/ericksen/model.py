"""Model data for the Ericksen energy: double-well potential with convex
splitting, strong-anchoring boundary triples (g, q, r), initial director
configurations, admissibility checks, and the built-in experiment presets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .fem import ScalarField, VectorField, unit_length_error
from .mesh import SimplicialMesh, boundary_vertices

__all__ = [
    "S_HAT",
    "DoubleWell",
    "DirichletData",
    "EricksenState",
    "AdmissibilityReport",
    "point_defect_field",
    "saturn_ring_bc",
    "check_admissibility",
    "Preset",
    "preset",
    "preset_names",
    "build_mesh",
    "dirichlet_data",
    "initial_state",
]

# degree of orientation at the global minimum of the double well
S_HAT = 0.750025


@dataclass(frozen=True)
class DoubleWell:
    """psi(s) = c_dw * (psi_c(s) - psi_e(s)) with quadratic convex part.

    psi_c(s) = 63 s^2 and psi_e(s) = -16 s^4 + (64/3) s^3 + 57 s^2 - 0.5625,
    so psi has a local minimum at s = 0 and its global minimum near S_HAT.
    The convex part being quadratic keeps the implicit step of the splitting
    scheme linear.
    """

    c_dw: float

    def __post_init__(self):
        if self.c_dw < 0 or not np.isfinite(self.c_dw):
            raise ValueError("c_dw must be a finite nonnegative real")

    @staticmethod
    def psi_c(s):
        s = np.asarray(s, dtype=float)
        return 63.0 * s ** 2

    @staticmethod
    def psi_e(s):
        s = np.asarray(s, dtype=float)
        return -16.0 * s ** 4 + (64.0 / 3.0) * s ** 3 + 57.0 * s ** 2 - 0.5625

    def value(self, s):
        return self.c_dw * (self.psi_c(s) - self.psi_e(s))

    def cprime(self, s):
        s = np.asarray(s, dtype=float)
        return self.c_dw * 126.0 * s

    def eprime(self, s):
        s = np.asarray(s, dtype=float)
        return self.c_dw * (-64.0 * s ** 3 + 64.0 * s ** 2 + 114.0 * s)

    def prime(self, s):
        return self.cprime(s) - self.eprime(s)


def point_defect_field(mesh: SimplicialMesh, center) -> VectorField:
    """Radial unit director (z - center) / |z - center| at every vertex.

    A vertex coinciding with the center gets the fallback e_1, so all nodal
    values are exactly unit.
    """
    center = np.asarray(center, dtype=float)
    if center.shape != (mesh.dim,):
        raise ValueError(f"center must be a {mesh.dim}-vector")
    rel = mesh.vertices - center
    norms = np.linalg.norm(rel, axis=1)
    out = np.zeros_like(rel)
    at_center = norms == 0.0
    out[~at_center] = rel[~at_center] / norms[~at_center, None]
    out[at_center, 0] = 1.0
    return VectorField(mesh, out)


def saturn_ring_bc(z3: float) -> np.ndarray:
    """Unit director on the outer container wall, rotating from (0,0,-1) at
    the bottom (z3=0) through (1,0,0) to (0,0,1) at the top (z3=1)."""
    t = min(max(float(z3), 0.0), 1.0)
    return np.array([np.sin(np.pi * t), 0.0, -np.cos(np.pi * t)])


@dataclass
class DirichletData:
    """Strong anchoring data on the tagged part of the boundary.

    g and r are callables of the vertex coordinate; q = r/g must be unit
    wherever it is imposed (checked when nodal values are extracted).
    """

    tags: frozenset
    g: Callable[[np.ndarray], float]
    r: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        self.tags = frozenset(int(t) for t in self.tags)
        if not self.tags:
            raise ValueError("DirichletData needs at least one boundary tag")

    def q(self, x) -> np.ndarray:
        return np.asarray(self.r(x), dtype=float) / float(self.g(x))

    def nodal_values(self, mesh: SimplicialMesh):
        """(vertex indices, g values, q values) on the Dirichlet boundary.

        Validates the structural condition |q(z)| = 1 to 1e-12.
        """
        idx = boundary_vertices(mesh, self.tags)
        g_vals = np.array([float(self.g(mesh.vertices[i])) for i in idx])
        r_vals = np.array([np.asarray(self.r(mesh.vertices[i]), dtype=float) for i in idx])
        if not (np.isfinite(g_vals).all() and np.isfinite(r_vals).all()):
            raise ValueError("non-finite Dirichlet data")
        if np.any(g_vals == 0.0):
            raise ValueError("g vanishes at a Dirichlet vertex; q = r/g undefined")
        q_vals = r_vals / g_vals[:, None]
        dev = np.abs(np.linalg.norm(q_vals, axis=1) - 1.0)
        if dev.max() > 1e-12:
            bad = idx[int(np.argmax(dev))]
            raise ValueError(f"|q| != 1 at Dirichlet vertex {bad} (deviation {dev.max():.2e})")
        return idx, g_vals, q_vals


@dataclass
class EricksenState:
    """Degree of orientation and director; u = I_h[s n] derived on demand."""

    s: ScalarField
    n: VectorField

    def __post_init__(self):
        if self.s.mesh is not self.n.mesh:
            raise ValueError("s and n live on different meshes")

    @property
    def mesh(self) -> SimplicialMesh:
        return self.s.mesh

    def u(self) -> VectorField:
        return VectorField(self.mesh, self.s.coeffs[:, None] * self.n.coeffs)

    def copy(self) -> "EricksenState":
        return EricksenState(self.s.copy(), self.n.copy())


@dataclass(frozen=True)
class AdmissibilityReport:
    err_n: float
    eps: float
    s_min: float
    s_max: float
    n_norm_min: float
    n_norm_max: float
    s_lower_bound: float
    passes_eps: bool
    s_in_bounds: bool
    n_no_collapse: bool

    @property
    def passes(self) -> bool:
        return self.passes_eps and self.s_in_bounds and self.n_no_collapse


def check_admissibility(state: EricksenState, eps: float) -> AdmissibilityReport:
    """Constraint report: unit-length violation vs eps and the open bounds
    -1/(d-1) < s < 1.  The s bounds are monitored, never enforced."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    err = unit_length_error(state.n)
    norms = state.n.nodal_norms()
    d = state.mesh.dim
    lower = -1.0 / (d - 1)
    s_min = float(state.s.coeffs.min())
    s_max = float(state.s.coeffs.max())
    return AdmissibilityReport(
        err_n=err,
        eps=float(eps),
        s_min=s_min,
        s_max=s_max,
        n_norm_min=float(norms.min()),
        n_norm_max=float(norms.max()),
        s_lower_bound=lower,
        passes_eps=err <= eps,
        s_in_bounds=(lower < s_min) and (s_max < 1.0),
        n_no_collapse=float(norms.min()) >= 1.0 - 1e-10,
    )


# ---------------------------------------------------------------------------
# experiment presets


@dataclass(frozen=True)
class Preset:
    """Complete parameter set of one built-in experiment."""

    name: str
    kappa: float
    c_dw: float
    tau_n: float
    tau_s: float
    dirichlet_tags: tuple
    bc: str
    generator: Optional[str]          # None: an imported .msh file is required
    mesh_params: dict = field(default_factory=dict)
    metric: str = "l2"
    alpha: float = 2.0
    tol: float = 1e-6
    defect_center: Optional[tuple] = None
    initial: str = "point_defect"     # or "updown_split"
    blend_width: float = 0.1          # regularization width of the initial defect
    particles: tuple = ()             # ("sphere", center, radius) / ("ellipsoid", center, semiaxes)
    box: Optional[tuple] = None       # ((x0,y0,z0), (x1,y1,z1)) outer container
    notes: str = ""

    @property
    def requires_mesh_file(self) -> bool:
        return self.generator is None


_C_DW_POINT2D = 0.1 * 0.3 ** -2

_PRESETS = {
    "point2d": Preset(
        name="point2d", kappa=2.0, c_dw=_C_DW_POINT2D, tau_n=0.1, tau_s=0.1,
        dirichlet_tags=(1,), bc="radial2d", generator="square",
        mesh_params={"n": 32}, defect_center=(0.24, 0.24),
        notes="point defect in the unit square; radial anchoring",
    ),
    "plane3d": Preset(
        name="plane3d", kappa=0.2, c_dw=0.0, tau_n=0.01, tau_s=0.01,
        dirichlet_tags=(1, 2), bc="plane3d", generator="cube",
        mesh_params={"n": 20}, defect_center=(0.24, 0.24, 0.5),
        blend_width=0.25,
        notes="plane defect at z=0.5 in the unit cube; crossed anchoring on top/bottom",
    ),
    "cylinder": Preset(
        name="cylinder", kappa=0.2, c_dw=0.0, tau_n=0.1, tau_s=1e-3,
        dirichlet_tags=(1,), bc="radial_xy", generator="cylinder",
        mesh_params={"n_r": 8, "n_theta": 24, "n_z": 10},
        defect_center=(0.24, 0.24, 0.5),
        notes="line defect along the cylinder axis for small kappa; "
              "for kappa=2 use tau_n=tau_s=0.01 and defect height 0.25",
    ),
    "propeller": Preset(
        name="propeller", kappa=0.1, c_dw=0.0, tau_n=0.02, tau_s=1e-4,
        dirichlet_tags=(3, 4, 5, 6), bc="radial_xy", generator="cube",
        mesh_params={"n": 16}, defect_center=(0.24, 0.24, 0.5),
        notes="propeller defect in the unit cube, lateral anchoring; "
              "for kappa=2 use tau_s=0.2 (fluting)",
    ),
    "saturn-ellipsoid": Preset(
        name="saturn-ellipsoid", kappa=1.0, c_dw=0.2, tau_n=0.01, tau_s=0.01,
        dirichlet_tags=(), bc="saturn", generator=None,
        initial="updown_split",
        particles=(("ellipsoid", (0.5, 0.5, 0.5), (0.3, 0.075, 0.075)),),
        box=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
        notes="Saturn ring around an ellipsoidal colloid; needs an imported mesh",
    ),
    "saturn-two": Preset(
        name="saturn-two", kappa=1.0, c_dw=0.2, tau_n=0.0025, tau_s=0.0025,
        dirichlet_tags=(), bc="saturn", generator=None,
        initial="updown_split",
        particles=(("sphere", (0.3, 0.5, 0.5), 0.1), ("sphere", (0.7, 0.5, 0.5), 0.1)),
        box=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
        notes="figure-eight defect around two spherical colloids; needs an imported mesh",
    ),
    "saturn-six": Preset(
        name="saturn-six", kappa=1.0, c_dw=0.2, tau_n=0.005, tau_s=0.005,
        dirichlet_tags=(), bc="saturn", generator=None,
        initial="updown_split",
        particles=(
            ("sphere", (0.2, 0.5, 0.5), 0.1), ("sphere", (0.8, 0.5, 0.5), 0.1),
            ("sphere", (0.5, 0.2, 0.5), 0.1), ("sphere", (0.5, 0.8, 0.5), 0.1),
            ("sphere", (0.5, 0.5, 0.2), 0.1), ("sphere", (0.5, 0.5, 0.8), 0.1),
        ),
        box=((-0.1, -0.1, -0.1), (1.1, 1.1, 1.1)),
        notes="combined defect around six spherical colloids; needs an imported mesh",
    ),
}


def preset_names() -> list:
    return sorted(_PRESETS)


def preset(name: str) -> Preset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(preset_names())}") from None


def build_mesh(pr: Preset, msh_path: Optional[str] = None,
               mesh_params: Optional[dict] = None) -> SimplicialMesh:
    """Materialize the preset mesh (generator or imported .msh)."""
    from . import mesh as meshmod
    from .postio import read_gmsh

    if msh_path is not None:
        return read_gmsh(msh_path)
    if pr.requires_mesh_file:
        raise ValueError(f"preset {pr.name!r} requires imported mesh (.msh file)")
    params = dict(pr.mesh_params)
    if mesh_params:
        params.update(mesh_params)
    builders = {
        "square": lambda p: meshmod.generate_unit_square(p["n"]),
        "cube": lambda p: meshmod.generate_unit_cube(p["n"]),
        "cylinder": lambda p: meshmod.generate_cylinder(p["n_r"], p["n_theta"], p["n_z"]),
    }
    return builders[pr.generator](params)


def _particle_normal(particles, x):
    """Outward unit normal of the nearest colloid surface."""
    best, best_dist = None, np.inf
    for shape in particles:
        kind, center = shape[0], np.asarray(shape[1], dtype=float)
        if kind == "sphere":
            radius = float(shape[2])
            dist = abs(np.linalg.norm(x - center) - radius)
            normal = x - center
        elif kind == "ellipsoid":
            semi = np.asarray(shape[2], dtype=float)
            level = ((x - center) / semi) ** 2
            dist = abs(level.sum() - 1.0)
            normal = (x - center) / semi ** 2   # gradient of the level set
        else:
            raise ValueError(f"unknown particle kind {kind!r}")
        if dist < best_dist:
            best, best_dist = normal, dist
    nrm = np.linalg.norm(best)
    if nrm == 0.0:
        return np.array([1.0, 0.0, 0.0])
    return best / nrm


def _saturn_q(pr: Preset):
    lo = np.asarray(pr.box[0], dtype=float)
    hi = np.asarray(pr.box[1], dtype=float)

    def q(x, tol=1e-9):
        on_box = np.any(np.abs(x - lo) < tol) or np.any(np.abs(x - hi) < tol)
        if on_box:
            zeta = (x[2] - lo[2]) / (hi[2] - lo[2])
            return saturn_ring_bc(zeta)
        return _particle_normal(pr.particles, x)

    return q


def _unit(v: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm == 0.0:  # on the axis of the radial recipes; off the anchoring set
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / nrm


def _bc_q(pr: Preset):
    if pr.bc == "radial2d":
        def q(x):
            return _unit(np.array([x[0] - 0.5, x[1] - 0.5]))
    elif pr.bc == "plane3d":
        def q(x):
            return np.array([1.0, 0.0, 0.0]) if x[2] < 0.5 else np.array([0.0, 1.0, 0.0])
    elif pr.bc == "radial_xy":
        def q(x):
            return _unit(np.array([x[0] - 0.5, x[1] - 0.5, 0.0]))
    elif pr.bc == "saturn":
        q = _saturn_q(pr)
    else:
        raise ValueError(f"unknown boundary recipe {pr.bc!r}")
    return q


def dirichlet_data(pr: Preset, mesh: SimplicialMesh) -> DirichletData:
    """Boundary triple (g, q, r) of the preset on the given mesh."""
    q = _bc_q(pr)
    tags = pr.dirichlet_tags
    if not tags:  # saturn presets anchor on the whole boundary of the import
        tags = tuple(int(t) for t in np.unique(mesh.boundary_tags))
    g = lambda x: S_HAT
    r = lambda x: S_HAT * np.asarray(q(x), dtype=float)
    return DirichletData(tags=frozenset(tags), g=g, r=r)


def _safe_normalize(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1)
    out = np.zeros_like(v)
    ok = norms > 1e-12
    out[ok] = v[ok] / norms[ok, None]
    out[~ok, 0] = 1.0
    return out


def initial_state(pr: Preset, mesh: SimplicialMesh,
                  dirichlet: DirichletData) -> EricksenState:
    """Initial pair (s0, n0): s0 = S_HAT and a nodally-unit director.

    For point-defect recipes the raw radial field is incompatible with the
    anchoring data at the boundary and its interpolant carries a spurious
    high-gradient layer there, so the director is regularized: blended into
    the anchoring field over a band of width blend_width next to the
    Dirichlet boundary and renormalized nodally.  Dirichlet nodal values are
    set to (g, q) exactly, as the flow input requires.
    """
    s0 = ScalarField(mesh, np.full(mesh.num_vertices, S_HAT))
    idx, g_vals, q_vals = dirichlet.nodal_values(mesh)
    if pr.initial == "point_defect":
        coeffs = point_defect_field(mesh, pr.defect_center).coeffs
        if pr.blend_width > 0:
            from scipy.spatial import cKDTree

            dist, _ = cKDTree(mesh.vertices[idx]).query(mesh.vertices)
            w = np.clip(1.0 - dist / pr.blend_width, 0.0, 1.0)
            q_fn = _bc_q(pr)
            anchor = np.array([q_fn(x) for x in mesh.vertices])
            coeffs = _safe_normalize((1.0 - w[:, None]) * coeffs + w[:, None] * anchor)
        n0 = VectorField(mesh, coeffs)
    elif pr.initial == "updown_split":
        coeffs = np.zeros((mesh.num_vertices, mesh.dim))
        up = mesh.vertices[:, 2] >= 0.5
        coeffs[up, 2] = 1.0
        coeffs[~up, 2] = -1.0
        n0 = VectorField(mesh, coeffs)
    else:
        raise ValueError(f"unknown initial recipe {pr.initial!r}")
    s0.coeffs[idx] = g_vals
    n0.coeffs[idx] = q_vals
    return EricksenState(s0, n0)


def with_params(pr: Preset, **kwargs) -> Preset:
    """Copy of the preset with selected fields replaced."""
    return replace(pr, **kwargs)
