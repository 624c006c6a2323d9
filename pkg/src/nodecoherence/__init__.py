"""Relation-coherence interpretation of node embeddings."""

from .baselines import KendallTauScorer, PropertyClassScorer, kendall_tau_score, property_classification_score
from .embeddings import (
    EmbeddingMatrix,
    demo_rp_embedding,
    distance_std,
    evd_basis,
    generate_evd_embedding,
    load_embedding,
    normalize_rows,
    pairwise_distance,
    save_embedding,
    shuffle_embedding,
)
from .graph import Graph, load_graph, normalized_adjacency_with_self_loops, save_graph
from .ime import ImeResult, expressiveness_sweep, pearson_correlation, run_ime
from .kernels import BACKEND
from .nci import (
    CoherenceParams,
    CoherenceReport,
    NCIScorer,
    clustering_coherence_rate,
    clustering_null_bound,
    coherence_rate,
    interpret_embedding,
    model_coherence_score,
    smoothness_coherence_rate,
    smoothness_null_bound,
)
from .relations import RelationSpec, SimilarityMatrix, compute_similarity

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "KendallTauScorer",
    "PropertyClassScorer",
    "kendall_tau_score",
    "property_classification_score",
    "EmbeddingMatrix",
    "demo_rp_embedding",
    "distance_std",
    "evd_basis",
    "generate_evd_embedding",
    "load_embedding",
    "normalize_rows",
    "pairwise_distance",
    "save_embedding",
    "shuffle_embedding",
    "Graph",
    "load_graph",
    "normalized_adjacency_with_self_loops",
    "save_graph",
    "ImeResult",
    "expressiveness_sweep",
    "pearson_correlation",
    "run_ime",
    "BACKEND",
    "CoherenceParams",
    "CoherenceReport",
    "NCIScorer",
    "clustering_coherence_rate",
    "clustering_null_bound",
    "coherence_rate",
    "interpret_embedding",
    "model_coherence_score",
    "smoothness_coherence_rate",
    "smoothness_null_bound",
    "RelationSpec",
    "SimilarityMatrix",
    "compute_similarity",
]
