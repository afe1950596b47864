#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/corpus.hpp"
#include "alignretrieve/error.hpp"
#include "alignretrieve/query_enhancement.hpp"
#include "alignretrieve/retrieval.hpp"

namespace alignretrieve {

struct RewardSample {
    EnhancedQuery query;
    std::vector<Snippet> snippets;  // candidate snippets, n >= 1
    std::string target;
};

struct RewardBreakdown {
    std::vector<double> ppls;
    std::size_t mp_index = 0;
    std::vector<double> scores;   // cosine(embed(snippet), embed(query.rendered))
    std::vector<double> softmax;  // sums to 1
    double reward = 0.0;          // log softmax[mp_index], <= 0
    std::vector<double> grad_scores;  // d reward / d scores, sums to 0
};

// Perplexity of the target under the backend, conditioned on the snippet
// framed above the query's unfinished code.
double conditional_ppl(Backend& backend, const EnhancedQuery& query, const Snippet& snippet,
                       const std::string& target);

// Index of the minimal perplexity; ties resolve to the lowest index.
std::size_t select_mp(const std::vector<double>& ppls);

std::vector<double> softmax_weights(const std::vector<double>& scores);

// Log-softmax of the scores at mp_index, computed with max subtraction.
double reward(const std::vector<double>& scores, std::size_t mp_index);

// d reward / d s_j = [j == mp_index] - softmax_j(scores).
std::vector<double> reward_gradient_wrt_scores(const std::vector<double>& scores,
                                               std::size_t mp_index);

// Full evaluation of one sample. Returns nullopt (with a diagnostic) when any
// perplexity call fails, so training can skip the sample.
std::optional<RewardBreakdown> evaluate_sample(Backend& backend, const EmbedderParams& params,
                                               const RewardSample& sample, Diagnostics* diags);

}  // namespace alignretrieve
