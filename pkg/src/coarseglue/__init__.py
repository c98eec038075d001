"""Partitions of unity, Hilbert-space gluing and relative-ball embeddings on
finite metric spaces and finite windows of free products of cyclic groups."""

from .errors import (
    CertificateError,
    CoarseGlueError,
    InfeasibleParameters,
    InputError,
    MetricAxiomError,
    NormError,
    SeparationError,
)
from .groups import (
    GroupWindow,
    MarkedGroup,
    build_marked_group,
    osin_decomposition,
    rel_ball,
    relative_asdim_cover,
    relative_metric,
    separation_search,
    word_metric,
)
from .hilbert import (
    FeatureMap,
    PropertyAWitness,
    ball_witness,
    check_char_ue,
    check_equi,
    check_property_a,
    compression_profile,
    constant_map,
    glue,
    interval_indicator_map,
    interval_width,
    max_close_diff,
    orthonormal_map,
    pa_to_pou,
    sqrt_lift,
)
from .metric import (
    Cover,
    FiniteMetricSpace,
    check_separated,
    cover_stats,
    enlarge_cover,
    grid_space,
    integer_space,
    line_space,
    validate_metric,
)
from .partition import (
    PartitionOfUnity,
    choose_parameters,
    max_variation,
    pou_from_cover,
    product_refine,
    pullback_pou,
    separated_cover_pipeline,
    variation_certificate,
)
from .pipeline import relhyp_embed_pipeline

__version__ = "0.1.0"
