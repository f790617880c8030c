"""Hierarchical trees, their hyperbolic and Euclidean embeddings, and the
refinement-protocol sample-complexity experiments."""

from .trees import (
    GaltonWatsonResult,
    GrowthConfig,
    GrowthReport,
    IsingParams,
    IsingTree,
    LateralGraph,
    LeafCapError,
    WeightedTree,
    build_galton_watson,
    build_mary,
    check_regular_growth,
    extend_lateral,
    ising_weights,
    load_tree,
    save_tree,
    saw_correlation_bounds,
)
from .hyperbolic import (
    BallPoint,
    BoundaryError,
    GeodesicHyperplane,
    HyperbolicEmbedding,
    SphericalCodeError,
    align,
    calibrate_curvature,
    classify_child,
    cone_margin,
    distortion,
    embedding_to_csv,
    hyp_distance,
    lipschitz_pushforward,
    margin_classifier,
    mobius_add,
    mobius_back,
    mobius_to_origin,
    packing_converse_check,
    sarkar_embed,
    spherical_code,
)
from .euclidean import (
    CanonicalCut,
    CollisionReport,
    EuclideanEmbedding,
    canonical_cut,
    collision_bound,
    embed_euclidean,
    fat_shattering_accounting,
    find_collision,
    greedy_packing,
    mcshane_extend,
    required_readout_lipschitz,
)
from .wavelets import (
    Subspace,
    WaveletBasis,
    alignment,
    build_wavelets,
    contrast_basis,
    edge_cut_labels,
    fraction_approximated,
    gram_check,
)
from .protocol import (
    ProtocolConfig,
    RiskReport,
    SampleBatch,
    calibrate_sample_complexity,
    child_marginal_report,
    depthwise_estimate,
    fano_constants,
    kl_plugin_estimate,
    random_theta,
    risk,
    sample,
    separation_experiment,
    vg_packing,
)

__version__ = "0.1.0"
