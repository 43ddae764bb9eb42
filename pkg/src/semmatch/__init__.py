"""semmatch: visual and visual-semantic object-matching benchmark harness."""

from .embed import (
    ClassMatrix,
    EmbeddingSet,
    FeatureVector,
    SimilarityMatrix,
    classify_matrix,
    concat_sets,
    normalize_set,
    normalized_copy,
    semantic_similarity,
    sim_from_array,
    visual_similarity,
)
from .colorhist import HistogramConfig, RgbCrop, hs_histogram, rgb_to_hs
from .matchers import (
    AssignmentResult,
    assign_argmax,
    assign_hungarian,
    match_discrete,
)
from .zeroshot import (
    ClassificationOutcome,
    PromptSet,
    classification_outcome,
    ensemble_embed,
    expand_prompts,
    topk_accuracy,
)
from .benchgen import (
    CropRecord,
    MatchingProblem,
    PoolManifest,
    degrade_embeddings,
    filter_nway_pool,
    gen_cross_scene_pairs,
    gen_nway,
    gen_nway_batch,
    gen_planted_pool,
    gen_same_scene_pairs,
    validate_problem,
)
from .evalkit import (
    BenchmarkReport,
    MethodSpec,
    ReportRow,
    matching_accuracy,
    random_baseline,
    run_benchmark,
    wilson_interval,
)
from .embedstore import (
    load_manifest,
    load_problems,
    load_prompt_set,
    read_embeddings,
    save_manifest,
    save_problems,
    save_prompt_set,
    save_report,
    write_embeddings,
)

__version__ = "0.1.0"
