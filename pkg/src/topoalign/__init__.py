"""Topological structure alignment toolkit.

Persistent homology of point clouds (union-find for dimension 0, boundary
reduction for small general-dimension diagrams), diagram distances, an
alignment loss over pairing-selected distance entries with exact
gradients, entropy-mixture hard-sample scoring, and a small deterministic
training harness that combines them.
"""

from .alignment import IsaContext, isa_loss, isa_loss_grad, structure_discrepancy
from .diagram_metrics import (
    DIAGONAL,
    DiagramMatching,
    bottleneck_distance,
    wasserstein_distance,
    wasserstein_matching,
)
from .persistence import (
    ESSENTIAL,
    Edge,
    PersistenceDiagram,
    PersistenceFeature,
    PersistencePairing,
    SimplexBudgetError,
    betti_counts,
    h0_persistence,
    read_diagram,
    rips_persistence,
    sorted_edge_filtration,
    write_diagram,
)
from .pointcloud import (
    DistanceMatrix,
    PointCloud,
    PointCloudError,
    flatten_inputs,
    load_point_cloud,
    pairwise_distances,
)
from .sde import (
    GumParams,
    PredictionRecord,
    SampleScore,
    entropy,
    gum_fit,
    gum_posterior,
    score_samples,
    structure_damage_score,
    weighted_classification_loss,
)
from .trainer import (
    DEFAULT_OPS,
    EncoderParams,
    Mode,
    PerturbationOp,
    TrainConfig,
    TrainState,
    arcface_loss,
    encode,
    init_encoder_params,
    load_config,
    make_blob_dataset,
    predict,
    rsp_perturb,
    run_experiment,
    train_step,
    write_report,
)

__version__ = "0.1.0"
