"""Dynamic graph regression via sketched least squares.

A graph's nearest-neighbor embedding feeds a tall least-squares system
whose solution is maintained under edge and node updates.  Two sketch
families (a sampled randomized Hadamard transform and a sparse sign
sketch) compress the system; rank-one pseudoinverse updates keep the
solution current without resolving from scratch.
"""

from dynareg.engine import (
    BACKENDS,
    ConsistencyReport,
    RebuildRequired,
    RegressionState,
    apply_delta,
    exact_solve,
    preprocess,
    residual,
    update_edge,
    update_node_delete,
    update_node_insert,
    verify_consistency,
)
from dynareg.graphstore import (
    DynamicGraph,
    EmbeddingMatrix,
    GraphDelta,
    UpdateVectorPair,
    affected_candidates_delete,
    affected_candidates_insert,
    build_embedding,
    delta_for_edge,
    delta_for_node_delete,
    delta_for_node_insert,
    mnn_embed_node,
)
from dynareg.numkit import (
    fwht_normalized,
    least_squares_solve,
    meyer_rank_one_pinv_update,
    pinv,
    pinv_vector,
    svd,
)
from dynareg.sketch import (
    CountSketch,
    SrhtSketch,
    countsketch_add_column,
    countsketch_apply,
    countsketch_new,
    countsketch_remove_column,
    countsketch_restore,
    countsketch_sample_count,
    srht_apply,
    srht_column,
    srht_new,
    srht_sample_count,
)
from dynareg.stateio import load_state, save_state

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BACKENDS",
    "ConsistencyReport",
    "RebuildRequired",
    "RegressionState",
    "apply_delta",
    "exact_solve",
    "preprocess",
    "residual",
    "update_edge",
    "update_node_delete",
    "update_node_insert",
    "verify_consistency",
    "DynamicGraph",
    "EmbeddingMatrix",
    "GraphDelta",
    "UpdateVectorPair",
    "affected_candidates_delete",
    "affected_candidates_insert",
    "build_embedding",
    "delta_for_edge",
    "delta_for_node_delete",
    "delta_for_node_insert",
    "mnn_embed_node",
    "fwht_normalized",
    "least_squares_solve",
    "meyer_rank_one_pinv_update",
    "pinv",
    "pinv_vector",
    "svd",
    "CountSketch",
    "SrhtSketch",
    "countsketch_add_column",
    "countsketch_apply",
    "countsketch_new",
    "countsketch_remove_column",
    "countsketch_restore",
    "countsketch_sample_count",
    "srht_apply",
    "srht_column",
    "srht_new",
    "srht_sample_count",
    "load_state",
    "save_state",
]
