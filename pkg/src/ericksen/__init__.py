"""Projection-free P1 finite elements and nested gradient flows for the
Ericksen model of nematic liquid crystals with variable degree of
orientation."""

from .fem import (
    QuadratureRule,
    ScalarField,
    VectorField,
    assemble_gradnsq_mass,
    assemble_gradsq_mass,
    assemble_mass,
    assemble_nsq_stiffness,
    assemble_s2_stiffness,
    assemble_stiffness_weighted,
    energy_elastic,
    energy_potential,
    nodal_interpolate,
    unit_length_error,
)
from .flow import (
    FlowConfig,
    FlowState,
    cfl_check,
    inner_loop,
    inner_step,
    metric_matrix,
    outer_loop,
    s_step,
    stability_bounds,
)
from .linalg import build_tangent_basis, cg_solve, reduced_solve
from .mesh import (
    SimplicialMesh,
    boundary_vertices,
    generate_cylinder,
    generate_unit_cube,
    generate_unit_square,
    shape_regularity,
)
from .model import (
    S_HAT,
    DirichletData,
    DoubleWell,
    EricksenState,
    check_admissibility,
    point_defect_field,
    preset,
    preset_names,
    saturn_ring_bc,
)
from .postio import read_gmsh, write_runlog_csv, write_vtk

__version__ = "0.1.0"
