"""Restructuring map-reduce index spaces over power-of-two clocks.

Parse a computation spec, map its indexes onto a clock's graduations,
convolve the loop nest for parallelism, unfold copies, plan temporary
cells, and brute-force check the result: every lattice point exactly
once, dependence order respected, final memory identical to the
sequential enumeration.
"""

from .clock import (
    Clock,
    Cube,
    clock_point_tuples,
    clock_points,
    color_histogram,
    color_of,
    compose_clocks,
    cube_to_clock,
    factorize,
    full_points,
    make_clock,
)
from .emit import emit, schedule_from_json, schedule_to_json
from .engine import (
    SparseGraph,
    SparseRecord,
    VisitRecord,
    VisitTrace,
    enumerate_schedule,
    enumerate_sparse,
    parse_edge_list,
)
from .formula import (
    BlockBind,
    ComputationSpec,
    Formula,
    LessThan,
    SpecSyntaxError,
    check_legality,
    domain_points,
    extract_dependencies,
    infer_shapes,
    parse_spec,
    print_spec,
)
from .schedule import (
    BuildError,
    GradMapping,
    NO_PLAN,
    ScheduleTree,
    TempBudgetError,
    TempPlan,
    UnsupportedRewriteError,
    allocate_temporaries,
    apply_convolutions,
    build_schedule,
    compose_skeleton,
    map_indexes,
    mapping_from_assignment,
    mapping_from_order,
    normalize_spec,
    pad_and_guard,
    sequential_schedule,
    time_skeleton,
    unfold,
)
from .verify import (
    DEFAULT_SEED,
    ParallelismProfile,
    analyze,
    check_coverage,
    check_dependencies,
    equivalent,
    interpret,
    random_store,
    reference_interpret,
    verify_report,
    zeros,
)

__version__ = "0.1.0"

__all__ = [
    "BlockBind",
    "BuildError",
    "Clock",
    "ComputationSpec",
    "Cube",
    "DEFAULT_SEED",
    "Formula",
    "GradMapping",
    "LessThan",
    "NO_PLAN",
    "ParallelismProfile",
    "ScheduleTree",
    "SparseGraph",
    "SparseRecord",
    "SpecSyntaxError",
    "TempBudgetError",
    "TempPlan",
    "UnsupportedRewriteError",
    "VisitRecord",
    "VisitTrace",
    "allocate_temporaries",
    "analyze",
    "apply_convolutions",
    "build_schedule",
    "check_coverage",
    "check_dependencies",
    "check_legality",
    "clock_point_tuples",
    "clock_points",
    "color_histogram",
    "color_of",
    "compose_clocks",
    "compose_skeleton",
    "cube_to_clock",
    "domain_points",
    "emit",
    "enumerate_schedule",
    "enumerate_sparse",
    "equivalent",
    "extract_dependencies",
    "factorize",
    "full_points",
    "infer_shapes",
    "interpret",
    "make_clock",
    "map_indexes",
    "mapping_from_assignment",
    "mapping_from_order",
    "normalize_spec",
    "pad_and_guard",
    "parse_edge_list",
    "parse_spec",
    "print_spec",
    "random_store",
    "reference_interpret",
    "schedule_from_json",
    "schedule_to_json",
    "sequential_schedule",
    "time_skeleton",
    "unfold",
    "verify_report",
    "zeros",
]
