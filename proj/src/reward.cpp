#include "alignretrieve/reward.hpp"

#include <algorithm>
#include <cmath>

#include "alignretrieve/prompt_format.hpp"

namespace alignretrieve {

double conditional_ppl(Backend& backend, const EnhancedQuery& query, const Snippet& snippet,
                       const std::string& target) {
    if (target.empty()) {
        throw Error(ErrorKind::InvalidParameter, "target must be non-empty");
    }
    const std::string context = render_snippet_context(snippet, query.unfinished_code);
    return perplexity(backend.score_continuation(context, target));
}

std::size_t select_mp(const std::vector<double>& ppls) {
    if (ppls.empty()) {
        throw Error(ErrorKind::InvalidParameter, "ppl list is empty");
    }
    std::size_t best = 0;
    for (std::size_t i = 0; i < ppls.size(); ++i) {
        if (std::isnan(ppls[i])) {
            throw Error(ErrorKind::InvalidInput, "NaN perplexity");
        }
        if (ppls[i] < ppls[best]) {
            best = i;
        }
    }
    return best;
}

std::vector<double> softmax_weights(const std::vector<double>& scores) {
    const double max_score = *std::max_element(scores.begin(), scores.end());
    std::vector<double> weights(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        weights[i] = std::exp(scores[i] - max_score);
        total += weights[i];
    }
    for (double& w : weights) {
        w /= total;
    }
    return weights;
}

double reward(const std::vector<double>& scores, std::size_t mp_index) {
    if (mp_index >= scores.size()) {
        throw Error(ErrorKind::InvalidParameter, "mp_index out of range");
    }
    const double max_score = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (double s : scores) {
        total += std::exp(s - max_score);
    }
    return scores[mp_index] - max_score - std::log(total);
}

std::vector<double> reward_gradient_wrt_scores(const std::vector<double>& scores,
                                               std::size_t mp_index) {
    if (mp_index >= scores.size()) {
        throw Error(ErrorKind::InvalidParameter, "mp_index out of range");
    }
    std::vector<double> grad = softmax_weights(scores);
    for (double& g : grad) {
        g = -g;
    }
    grad[mp_index] += 1.0;
    return grad;
}

std::optional<RewardBreakdown> evaluate_sample(Backend& backend, const EmbedderParams& params,
                                               const RewardSample& sample, Diagnostics* diags) {
    if (sample.snippets.empty()) {
        throw Error(ErrorKind::InvalidParameter, "reward sample has no snippets");
    }
    if (sample.target.empty()) {
        throw Error(ErrorKind::InvalidParameter, "reward sample target is empty");
    }
    RewardBreakdown breakdown;
    breakdown.ppls.reserve(sample.snippets.size());
    for (const Snippet& snippet : sample.snippets) {
        try {
            breakdown.ppls.push_back(conditional_ppl(backend, sample.query, snippet,
                                                     sample.target));
        } catch (const Error& e) {
            warn(diags, "skipping sample: ppl failed for " + snippet.id + ": " + e.what());
            return std::nullopt;
        }
    }
    breakdown.mp_index = select_mp(breakdown.ppls);
    const std::vector<double> query_embedding = embed(params, sample.query.rendered);
    breakdown.scores.reserve(sample.snippets.size());
    for (const Snippet& snippet : sample.snippets) {
        breakdown.scores.push_back(cosine(query_embedding, embed(params, snippet.text)));
    }
    breakdown.softmax = softmax_weights(breakdown.scores);
    breakdown.reward = reward(breakdown.scores, breakdown.mp_index);
    breakdown.grad_scores = reward_gradient_wrt_scores(breakdown.scores, breakdown.mp_index);
    return breakdown;
}

}  // namespace alignretrieve
