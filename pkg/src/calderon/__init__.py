"""Weighted dyadic sequence spaces and Calderón-product factorizations."""
from .counterexamples import GapSpec, embedding_chain_check, gap_report, gap_sequence
from .dyadic import DyadicIndex, Window, ancestor, contains, cube_bounds, finest_cells
from .errors import (
    CalderonError,
    DegenerateFactorizationError,
    DivergentIntegralError,
    ParameterError,
    WindowError,
)
from .factorization import (
    Factorization,
    LevelSets,
    b_factorize,
    build_level_sets,
    f_factorize,
    holder_product_bound,
    lp_factorize,
    verify_factorization,
)
from .instances import InstanceShape, generate_instances
from .maximal import CellFunction, m_loc, vv_maximal_constant
from .oracle import oracle_calderon_norm
from .sequences import (
    Sequence,
    SpaceParams,
    YTable,
    b_norm,
    b_norm_y,
    cutoff,
    f_norm,
    interpolate_params,
    lift_seq,
    norm,
    ring_convergence_profile,
)
from .weights import (
    CellMeasure,
    Constant,
    Exponential,
    Power,
    PowerProduct,
    ap_constant,
    cell_mass,
    combine,
    w_class_ratio,
)

__version__ = "0.1.0"
