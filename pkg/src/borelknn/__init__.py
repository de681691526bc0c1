"""Similarity search and classification on Borel-reduced data.

The package bundles an exact bit-interleaving dimension reduction with
transported k-NN classification, a (k, c)-approximate-nearest-neighbour
index over the Hamming cube, query-instability diagnostics for
high-dimensional data, and a benchmark harness with synthetic problems of
known Bayes error.
"""

from ._version import __version__
from .ann import (
    AnnIndex,
    AnnParams,
    adversarial_kann,
    build_ann_index,
    kann_query,
    load_ann_index,
    sample_projection,
    project,
    thermometer_encode,
    thermometer_encode_batch,
)
from .bench import (
    Box,
    ConsistencyCurve,
    CvReport,
    Mm2Spec,
    bayes_error,
    emit_report,
    run_consistency,
    run_cv,
    step_spec,
    synth_mm2,
)
from .borel import (
    BorelCode,
    ReductionConfig,
    borel_inverse,
    borel_inverse_batch,
    borel_map,
    borel_map_batch,
    code_gap,
    grouped_reduce,
    grouped_reduce_batch,
    quantize_levels,
    reduced_distance,
)
from .core import (
    LabeledDataset,
    clamp_unit,
    derive_seed,
    distance,
    load_csv,
    normalize_unit_cube,
    split_folds,
    streamed_rng,
)
from .instability import (
    InstabilityProfile,
    eps_knn,
    instability_profile,
    is_c_unstable,
    vc_sample_bound,
)
from .knn import (
    NeighborSet,
    brute_knn,
    empirical_error,
    majority_vote,
    make_knn_rule,
    sorted_index_build,
    sorted_knn,
    sqrt_schedule,
    transport_rule,
    weighted_vote,
)

__all__ = [
    "__version__",
    "AnnIndex",
    "AnnParams",
    "adversarial_kann",
    "build_ann_index",
    "kann_query",
    "load_ann_index",
    "sample_projection",
    "project",
    "thermometer_encode",
    "thermometer_encode_batch",
    "Box",
    "ConsistencyCurve",
    "CvReport",
    "Mm2Spec",
    "bayes_error",
    "emit_report",
    "run_consistency",
    "run_cv",
    "step_spec",
    "synth_mm2",
    "BorelCode",
    "ReductionConfig",
    "borel_inverse",
    "borel_inverse_batch",
    "borel_map",
    "borel_map_batch",
    "code_gap",
    "grouped_reduce",
    "grouped_reduce_batch",
    "quantize_levels",
    "reduced_distance",
    "LabeledDataset",
    "clamp_unit",
    "derive_seed",
    "distance",
    "load_csv",
    "normalize_unit_cube",
    "split_folds",
    "streamed_rng",
    "InstabilityProfile",
    "eps_knn",
    "instability_profile",
    "is_c_unstable",
    "vc_sample_bound",
    "NeighborSet",
    "brute_knn",
    "empirical_error",
    "majority_vote",
    "make_knn_rule",
    "sorted_index_build",
    "sorted_knn",
    "sqrt_schedule",
    "transport_rule",
    "weighted_vote",
]
