#include "alignretrieve/query_enhancement.hpp"

#include <cmath>

#include "alignretrieve/prompt_format.hpp"
#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {

CompletionPrompt build_prompt(const std::vector<Snippet>& ranked_snippets,
                              const std::string& unfinished_code, std::size_t token_budget) {
    const std::vector<std::string> code_lines = split_lines(unfinished_code);
    const std::size_t tail_begin = code_lines.size() > kMinUnfinishedTailLines
                                       ? code_lines.size() - kMinUnfinishedTailLines
                                       : 0;
    std::string tail = join_lines(
        {code_lines.begin() + static_cast<std::ptrdiff_t>(tail_begin), code_lines.end()});
    if (estimate_tokens(tail) > token_budget) {
        throw Error(ErrorKind::InvalidConfig,
                    "token budget cannot hold the unfinished-code tail");
    }

    CompletionPrompt prompt;
    prompt.token_budget = token_budget;
    std::string frames;
    std::size_t used = estimate_tokens(tail);
    for (const Snippet& snippet : ranked_snippets) {
        const std::string frame = frame_snippet(snippet) + "\n";
        const std::size_t cost = estimate_tokens(frame);
        if (used + cost > token_budget) {
            break;
        }
        frames += frame;
        used += cost;
        prompt.context_snippets.push_back(snippet.text);
    }

    // Spend whatever budget remains on more unfinished-code lines above the
    // mandatory tail.
    std::size_t code_begin = tail_begin;
    while (code_begin > 0) {
        const std::size_t cost = estimate_tokens(code_lines[code_begin - 1]) + 1;
        if (used + cost > token_budget) {
            break;
        }
        used += cost;
        --code_begin;
    }
    prompt.unfinished_code = join_lines(
        {code_lines.begin() + static_cast<std::ptrdiff_t>(code_begin), code_lines.end()});
    prompt.rendered = frames + prompt.unfinished_code;
    return prompt;
}

std::vector<CandidateCompletion> sample_candidates(Backend& backend, const std::string& prompt,
                                                   int k, double temperature, double top_p,
                                                   std::uint64_t seed, int max_new_tokens) {
    if (k < 1) {
        throw Error(ErrorKind::InvalidParameter, "k must be >= 1");
    }
    std::vector<std::string> texts;
    try {
        texts = backend.complete(prompt, k, temperature, top_p, seed, max_new_tokens);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::BackendUnavailable) {
            throw Error(ErrorKind::BackendUnavailable,
                        "sampling failed with 0 of " + std::to_string(k) +
                            " candidates obtained: " + e.what());
        }
        throw;
    }
    std::vector<CandidateCompletion> candidates;
    candidates.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        std::vector<std::string> kept;
        for (const std::string& line : split_lines(texts[i])) {
            if (is_blank(line)) {
                break;
            }
            kept.push_back(line);
        }
        CandidateCompletion candidate;
        candidate.text = join_lines(kept);
        candidate.sample_index = static_cast<int>(i);
        candidates.push_back(std::move(candidate));
    }
    return candidates;
}

EnhancedQuery build_enhanced_query(const std::string& unfinished_code,
                                   const std::vector<CandidateCompletion>& candidates,
                                   std::size_t tail_line_count) {
    EnhancedQuery query;
    query.unfinished_code = unfinished_code;
    query.candidates = candidates;
    query.rendered = tail_lines(unfinished_code, tail_line_count);
    if (!candidates.empty()) {
        query.rendered += "\n\n";
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (i > 0) {
                query.rendered.push_back('\n');
            }
            query.rendered += candidates[i].text;
        }
    }
    return query;
}

void validate_theory_params(const SamplingTheoryParams& params) {
    if (!(params.p_s > 0.0 && params.p_s < 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "p_s must lie in (0,1)");
    }
    if (!(params.rho >= 0.0 && params.rho <= 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "rho must lie in [0,1]");
    }
    if (params.alpha < 0.0 || params.beta < 0.0 || params.gamma < 0.0) {
        throw Error(ErrorKind::InvalidParameter, "utility weights must be nonnegative");
    }
}

double p_at_least_one(const SamplingTheoryParams& params, int n) {
    validate_theory_params(params);
    if (n < 1) {
        throw Error(ErrorKind::InvalidParameter, "n must be >= 1");
    }
    const double effective = static_cast<double>(n) * (1.0 - params.rho);
    return 1.0 - std::pow(1.0 - params.p_s, effective);
}

double cumulative_error(const SamplingTheoryParams& params, int n) {
    validate_theory_params(params);
    if (n < 0) {
        throw Error(ErrorKind::InvalidParameter, "n must be >= 0");
    }
    return static_cast<double>(n) * (1.0 - params.p_s);
}

double utility(const SamplingTheoryParams& params, double n) {
    validate_theory_params(params);
    if (n < 1.0) {
        throw Error(ErrorKind::InvalidParameter, "n must be >= 1");
    }
    const double miss = 1.0 - params.p_s;
    return params.alpha * (1.0 - std::pow(miss, n)) - params.beta * n * miss - params.gamma * n;
}

double optimal_n(const SamplingTheoryParams& params) {
    validate_theory_params(params);
    const double miss = 1.0 - params.p_s;
    const double marginal_cost = params.beta * miss + params.gamma;
    const double benefit_slope = -params.alpha * std::log(miss);  // > 0 for p_s in (0,1)
    if (marginal_cost <= 0.0) {
        throw Error(ErrorKind::NoInteriorOptimum,
                    "utility has no interior maximum: zero marginal cost");
    }
    if (marginal_cost >= benefit_slope) {
        throw Error(ErrorKind::NoInteriorOptimum,
                    "utility has no interior maximum: cost dominates benefit slope");
    }
    return std::log(marginal_cost / benefit_slope) / std::log(miss);
}

}  // namespace alignretrieve
