"""Numerical tools for a planar vortex system: closed-form families, the
area Cauchy transform, a punctured-disk sinh-Gordon solver, gauge and energy
checks, and a reproducible command-line pipeline."""

from .config import RunConfig, config_to_text, parse_config
from .errors import (
    BarrierError,
    ConfigurationError,
    FieldFormatError,
    GeometryError,
    NewtonStagnationError,
    SolverError,
    VerificationError,
    VortexError,
)
from .explicit import (
    FamilyParams,
    SolutionFields,
    check_pair_compat,
    divisor_of,
    generate_divisor_solution,
    generate_higgs_solution,
    generate_plane_wave,
)
from .fieldio import read_field, write_field
from .gauge import (
    ReconstructionParams,
    bogomolny_split,
    flux,
    gauge_transform,
    property_E_fit,
    reconstruct_fields,
    residual_higgs,
    residual_maineq,
    ymh_functional,
)
from .grid import DomainMask, Field, GridSpec, VortexDivisor, build_mask, count_zeros_winding, square_mask
from .pipeline import run_pipeline
from .sinh_gordon import (
    SinhGordonProblem,
    Window,
    barrier_search,
    distributional_charge,
    nested_refinement,
    solve_bvp,
)
from .vekua import (
    VekuaCoeffs,
    decay_zero_radius,
    lpnu_norms,
    similarity_factor,
    system_factor,
    t_operator,
)

__version__ = "0.1.0"
