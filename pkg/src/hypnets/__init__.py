"""Discrete A-nets, their extension by adapted doubly ruled patches, and the
associated layer transformations, with residual-based verification of every
incidence identity involved."""

from .anet import (
    ANet,
    TauField,
    bw_rescale,
    dbkp_residual,
    evolve_moutard_cube,
    lelieuvre_integrate,
    moutard_step,
    parallel_invariants,
    solve_layered_cauchy,
    solve_surface_cauchy,
    solve_two_layer_cauchy,
    tau_potential,
)
from .errors import ConfigError, GenericityError, GeometryError, SolverError
from .geometry import (
    Line3,
    Plane3,
    Tolerances,
    coplanarity_residual,
    cross_ratio,
    intersect_lines,
    menelaus_multiratio,
    project_through_line,
    verify_cox,
)
from .hypnet import (
    CrisscrossedQuad,
    Cross,
    HyperbolicNet,
    c1_residual_algebraic,
    c1_residual_geometric,
    classify_cross,
    cross_from_rho,
    extendability_check,
    propagate_cross_vertex,
    rho_evolve,
    same_hyperboloid,
    solve_rho_cauchy,
)
from .lattice import FaceField, ScalarField, VectorField, Window, axis_slice, shift
from .meshout import TriMesh, eval_patch, tessellate, write_obj
from .netio import load_artifact, save_artifact
from .verify import VerificationReport, verify_object
from .weingarten import (
    ACube,
    PhiField,
    WeingartenPair,
    backlund_transform,
    blaschke_center,
    complete_blaschke_cube,
    equi_twist_cube_check,
    generate_equitwisted_pair,
    is_weingarten_cube,
    iterate_weingarten,
    normalize_lambda,
    verify_rho_equals_tau,
    weingarten_propagate_algebraic,
    weingarten_propagate_geometric,
    weingarten_transform,
)

__version__ = "0.1.0"
