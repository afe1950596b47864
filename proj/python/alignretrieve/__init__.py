"""Retrieval-aligned repository code completion."""

from alignretrieve._core import (
    EmbedderParams,
    Snippet,
    __version__,
    bm25_retrieve,
    build_codebase,
    corpus_from_jsonl,
    corpus_to_jsonl,
    cosine,
    cumulative_error,
    dense_retrieve,
    edit_similarity,
    em_at_k,
    embed,
    enhanced_query,
    exact_match,
    init_embedder,
    load_checkpoint,
    optimal_n,
    p_at_least_one,
    perplexity,
    reward_from_scores,
    run_mock_completion,
    save_checkpoint,
    select_mp,
    tokenize,
    utility,
)

__all__ = [
    "EmbedderParams",
    "Snippet",
    "__version__",
    "bm25_retrieve",
    "build_codebase",
    "corpus_from_jsonl",
    "corpus_to_jsonl",
    "cosine",
    "cumulative_error",
    "dense_retrieve",
    "edit_similarity",
    "em_at_k",
    "embed",
    "enhanced_query",
    "exact_match",
    "init_embedder",
    "load_checkpoint",
    "optimal_n",
    "p_at_least_one",
    "perplexity",
    "reward_from_scores",
    "run_mock_completion",
    "save_checkpoint",
    "select_mp",
    "tokenize",
    "utility",
]
