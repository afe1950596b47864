#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/corpus.hpp"
#include "alignretrieve/error.hpp"
#include "alignretrieve/query_enhancement.hpp"
#include "alignretrieve/retrieval.hpp"
#include "alignretrieve/reward.hpp"
#include "alignretrieve/training_data.hpp"

namespace alignretrieve {

struct PipelineConfig {
    CorpusConfig corpus;
    std::size_t coarse_k = 5;
    std::size_t dense_k = 50;
    std::size_t fine_budget_tokens = 2048;
    std::size_t reward_n = 10;
    int sampling_k = 4;
    double temperature = 0.8;
    double top_p = 0.95;
    std::uint64_t sampling_seed = 0;
    int max_new_tokens = 64;
    std::size_t query_tail_lines = kQueryTailLines;
    bool no_dependency_context = false;
    bool no_query_enhancement = false;
    bool no_trained_retriever = false;
};

struct CompletionOutcome {
    std::string prediction;      // generator output cut at its first newline
    std::string raw_prediction;
    std::vector<CandidateCompletion> candidates;
    std::vector<RankedResult> coarse_results;
    std::vector<RankedResult> dense_results;
};

// Full pipeline for one completion: codebase, coarse retrieval, candidate
// sampling, enhanced query, dense retrieval, generation. The completion
// file's content is its unfinished code; cross files are used as given.
CompletionOutcome run_completion(const std::vector<SourceFile>& cross_files,
                                 const std::string& completion_path,
                                 const std::string& unfinished_code,
                                 const PipelineConfig& config, Backend& sampler,
                                 Backend& generator, const EmbedderParams& params,
                                 Diagnostics* diags);

// Training-time preparation: run the pipeline up to the enhanced query, then
// fix the reward candidate set to the top reward_n BM25 snippets under that
// query. Unusable samples (empty candidate set) come back empty.
std::optional<RewardSample> prepare_reward_sample(const TrainingSample& training_sample,
                                                  const PipelineConfig& config, Backend& sampler,
                                                  Diagnostics* diags);

}  // namespace alignretrieve
