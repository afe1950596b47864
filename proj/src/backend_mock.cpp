#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/prompt_format.hpp"
#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {

void validate_backend_config(const BackendConfig& config) {
    if (config.kind == BackendKind::Http) {
        if (config.base_url.empty()) {
            throw Error(ErrorKind::InvalidConfig, "http backend requires base_url");
        }
        if (config.model.empty()) {
            throw Error(ErrorKind::InvalidConfig, "http backend requires a model name");
        }
    }
    if (config.timeout_seconds <= 0.0) {
        throw Error(ErrorKind::InvalidConfig, "backend timeout must be positive");
    }
    if (config.max_retries < 1) {
        throw Error(ErrorKind::InvalidConfig, "backend max_retries must be >= 1");
    }
    if (config.max_concurrent < 1) {
        throw Error(ErrorKind::InvalidConfig, "backend max_concurrent must be >= 1");
    }
}

double perplexity(const TokenLogprobs& scored) {
    if (scored.logprobs.empty()) {
        throw Error(ErrorKind::DegenerateInput, "cannot compute perplexity of zero tokens");
    }
    const double total = std::accumulate(scored.logprobs.begin(), scored.logprobs.end(), 0.0);
    return std::exp(-total / static_cast<double>(scored.logprobs.size()));
}

namespace {

std::set<std::string> token_set(const std::string& text) {
    const std::vector<std::string> tokens = tokenize(text);
    return {tokens.begin(), tokens.end()};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) {
        return 0.0;
    }
    std::size_t inter = 0;
    for (const std::string& t : a) {
        if (b.count(t) > 0) {
            ++inter;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

std::vector<std::string> MockBackend::complete(const std::string& prompt, int k,
                                               double /*temperature*/, double /*top_p*/,
                                               std::uint64_t seed, int /*max_new_tokens*/) {
    if (k < 1) {
        throw Error(ErrorKind::InvalidParameter, "k must be >= 1");
    }
    const std::vector<std::string> lines = context_snippet_lines(prompt);
    if (lines.empty()) {
        return std::vector<std::string>(static_cast<std::size_t>(k), "");
    }
    const std::set<std::string> tail = token_set(last_nonempty_line(prompt));
    std::vector<std::size_t> ranked(lines.size());
    std::iota(ranked.begin(), ranked.end(), 0);
    std::vector<double> overlap(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        overlap[i] = jaccard(token_set(lines[i]), tail);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        if (overlap[a] != overlap[b]) {
            return overlap[a] > overlap[b];
        }
        return a < b;
    });
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        const std::size_t rank = (static_cast<std::size_t>(j) + seed) % lines.size();
        out.push_back(lines[ranked[rank]]);
    }
    return out;
}

TokenLogprobs MockBackend::score_continuation(const std::string& context,
                                              const std::string& continuation) {
    std::istringstream words_in(continuation);
    std::vector<std::string> words;
    std::string word;
    while (words_in >> word) {
        words.push_back(word);
    }
    const std::set<std::string> cont_tokens = token_set(continuation);
    if (words.empty() || cont_tokens.empty()) {
        throw Error(ErrorKind::DegenerateInput, "continuation tokenizes to zero tokens");
    }
    std::string section;
    for (const std::string& line : context_snippet_lines(context)) {
        section += line;
        section.push_back('\n');
    }
    const std::set<std::string> section_tokens = token_set(section);
    std::size_t inter = 0;
    for (const std::string& t : cont_tokens) {
        if (section_tokens.count(t) > 0) {
            ++inter;
        }
    }
    const double overlap = static_cast<double>(inter) / static_cast<double>(cont_tokens.size());
    TokenLogprobs scored;
    scored.tokens = words;
    scored.logprobs.assign(words.size(), overlap - 1.0);
    return scored;
}

}  // namespace alignretrieve
