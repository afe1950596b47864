#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/corpus.hpp"
#include "alignretrieve/error.hpp"

namespace alignretrieve {

struct CompletionPrompt {
    std::vector<std::string> context_snippets;  // included snippet texts, prompt order
    std::string unfinished_code;                // the included unfinished-code tail
    std::string rendered;
    std::size_t token_budget = 0;
};

struct CandidateCompletion {
    std::string text;
    int sample_index = 0;
    std::map<std::string, std::string> backend_meta;
};

struct EnhancedQuery {
    std::string unfinished_code;
    std::vector<CandidateCompletion> candidates;
    std::string rendered;
};

inline constexpr std::size_t kMinUnfinishedTailLines = 50;
inline constexpr std::size_t kQueryTailLines = 10;

// Snippets framed above the unfinished code, added in the given (descending
// score) order until the budget stops the next one. The unfinished code is
// truncated from the top to fit, never below its final 50 lines.
CompletionPrompt build_prompt(const std::vector<Snippet>& ranked_snippets,
                              const std::string& unfinished_code, std::size_t token_budget);

// k sampled completions, each cut at its first blank line.
std::vector<CandidateCompletion> sample_candidates(Backend& backend, const std::string& prompt,
                                                   int k, double temperature, double top_p,
                                                   std::uint64_t seed, int max_new_tokens);

// Retrieval text: last `tail_line_count` unfinished lines, a blank line, then
// the candidates joined by newline in sample order. No candidates -> tail
// only (the no-enhancement path).
EnhancedQuery build_enhanced_query(const std::string& unfinished_code,
                                   const std::vector<CandidateCompletion>& candidates,
                                   std::size_t tail_line_count = kQueryTailLines);

// Sampling-theory calculators.
struct SamplingTheoryParams {
    double p_s = 0.5;  // single-sample success probability, in (0,1)
    double rho = 0.0;  // inter-sample correlation, in [0,1]
    double alpha = 1.0;
    double beta = 0.05;
    double gamma = 0.05;
};

void validate_theory_params(const SamplingTheoryParams& params);

// P(at least one success in n samples) = 1 - (1-p_s)^(n(1-rho)).
double p_at_least_one(const SamplingTheoryParams& params, int n);

// Cumulative expected error after n samples: n(1-p_s).
double cumulative_error(const SamplingTheoryParams& params, int n);

// U(n) = alpha [1-(1-p_s)^n] - beta n(1-p_s) - gamma n.
double utility(const SamplingTheoryParams& params, double n);

// Interior stationary point of U: requires 0 < beta(1-p_s)+gamma < -alpha ln(1-p_s).
double optimal_n(const SamplingTheoryParams& params);

}  // namespace alignretrieve
