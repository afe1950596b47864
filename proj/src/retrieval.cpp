#include "alignretrieve/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "alignretrieve/rng.hpp"
#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {

namespace {

constexpr double kBm25K1 = 1.2;
constexpr double kBm25B = 0.75;

std::vector<RankedResult> take_top_k(std::vector<RankedResult> scored, std::size_t k) {
    std::sort(scored.begin(), scored.end(), [](const RankedResult& a, const RankedResult& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.snippet_id < b.snippet_id;
    });
    if (scored.size() > k) {
        scored.resize(k);
    }
    for (std::size_t i = 0; i < scored.size(); ++i) {
        scored[i].rank = static_cast<int>(i) + 1;
    }
    return scored;
}

}  // namespace

HashedFeatures hash_features(const std::vector<std::string>& tokens, std::size_t buckets) {
    if (buckets < 2) {
        throw Error(ErrorKind::InvalidParameter, "hash buckets must be >= 2");
    }
    std::map<std::size_t, double> counts;
    for (const std::string& token : tokens) {
        counts[stable_hash64(token) % buckets] += 1.0;
    }
    HashedFeatures features;
    double norm_sq = 0.0;
    for (const auto& [bucket, count] : counts) {
        norm_sq += count * count;
    }
    if (norm_sq <= 0.0) {
        return features;
    }
    const double norm = std::sqrt(norm_sq);
    features.entries.reserve(counts.size());
    for (const auto& [bucket, count] : counts) {
        features.entries.emplace_back(bucket, count / norm);
    }
    return features;
}

void validate_params(const EmbedderParams& params) {
    if (params.dim < 2) {
        throw Error(ErrorKind::InvalidParameter, "embedder dim must be >= 2");
    }
    if (params.buckets < params.dim) {
        throw Error(ErrorKind::InvalidParameter, "embedder buckets must be >= dim");
    }
    if (params.weights.size() != params.dim * params.buckets) {
        throw Error(ErrorKind::InvalidParameter, "embedder weight count must be dim * buckets");
    }
    for (double w : params.weights) {
        if (!std::isfinite(w)) {
            throw Error(ErrorKind::InvalidParameter, "embedder weights must be finite");
        }
    }
}

std::string params_checksum(const EmbedderParams& params) {
    std::string bytes = kStableHashVersion;
    bytes += ":" + std::to_string(params.dim) + "x" + std::to_string(params.buckets) + ":";
    const std::size_t offset = bytes.size();
    bytes.resize(offset + params.weights.size() * sizeof(double));
    std::memcpy(bytes.data() + offset, params.weights.data(),
                params.weights.size() * sizeof(double));
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(stable_hash64(bytes)));
    return hex;
}

std::vector<double> project(const EmbedderParams& params, const HashedFeatures& features) {
    std::vector<double> out(params.dim, 0.0);
    for (const auto& [bucket, value] : features.entries) {
        for (std::size_t row = 0; row < params.dim; ++row) {
            out[row] += params.at(row, bucket) * value;
        }
    }
    return out;
}

std::vector<double> embed(const EmbedderParams& params, const std::string& text) {
    const HashedFeatures features = hash_features(tokenize(text), params.buckets);
    std::vector<double> projected = project(params, features);
    double norm_sq = 0.0;
    for (double v : projected) {
        norm_sq += v * v;
    }
    if (norm_sq < 1e-24) {
        return std::vector<double>(params.dim, 0.0);
    }
    const double norm = std::sqrt(norm_sq);
    for (double& v : projected) {
        v /= norm;
    }
    return projected;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double semantic_gap(const EmbedderParams& params, const std::string& text_a,
                    const std::string& text_b) {
    return 1.0 - cosine(embed(params, text_a), embed(params, text_b));
}

RetrievalIndex::RetrievalIndex(std::vector<Snippet> snippets) : snippets_(std::move(snippets)) {
    term_freqs_.reserve(snippets_.size());
    doc_lengths_.reserve(snippets_.size());
    std::size_t total_length = 0;
    for (const Snippet& snippet : snippets_) {
        std::map<std::string, std::size_t> freqs;
        const std::vector<std::string> tokens = tokenize(snippet.text);
        for (const std::string& token : tokens) {
            ++freqs[token];
        }
        for (const auto& [term, count] : freqs) {
            ++doc_freqs_[term];
        }
        doc_lengths_.push_back(tokens.size());
        total_length += tokens.size();
        term_freqs_.push_back(std::move(freqs));
    }
    avg_doc_length_ = snippets_.empty() ? 0.0
                                        : static_cast<double>(total_length) /
                                              static_cast<double>(snippets_.size());
}

void RetrievalIndex::compute_embeddings(const EmbedderParams& params) {
    validate_params(params);
    embeddings_.clear();
    embeddings_.reserve(snippets_.size());
    for (const Snippet& snippet : snippets_) {
        embeddings_.push_back(embed(params, snippet.text));
    }
    embedder_version_ = params_checksum(params);
}

std::vector<RankedResult> RetrievalIndex::bm25_retrieve(const std::string& query_text,
                                                        std::size_t k) const {
    if (k < 1) {
        throw Error(ErrorKind::InvalidParameter, "k must be >= 1");
    }
    const std::vector<std::string> query_tokens = tokenize(query_text);
    if (query_tokens.empty() || snippets_.empty()) {
        return {};
    }
    const double n_docs = static_cast<double>(snippets_.size());
    std::vector<RankedResult> scored;
    for (std::size_t i = 0; i < snippets_.size(); ++i) {
        double score = 0.0;
        for (const std::string& term : query_tokens) {
            auto tf_it = term_freqs_[i].find(term);
            if (tf_it == term_freqs_[i].end()) {
                continue;
            }
            const double tf = static_cast<double>(tf_it->second);
            const double df = static_cast<double>(doc_freqs_.at(term));
            const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
            const double len_norm =
                avg_doc_length_ > 0.0
                    ? static_cast<double>(doc_lengths_[i]) / avg_doc_length_
                    : 0.0;
            score += idf * tf * (kBm25K1 + 1.0) /
                     (tf + kBm25K1 * (1.0 - kBm25B + kBm25B * len_norm));
        }
        if (score > 0.0) {
            scored.push_back({snippets_[i].id, score, 0});
        }
    }
    return take_top_k(std::move(scored), k);
}

std::vector<RankedResult> RetrievalIndex::dense_retrieve(const EmbedderParams& params,
                                                         const std::string& query_text,
                                                         std::size_t k) const {
    if (k < 1) {
        throw Error(ErrorKind::InvalidParameter, "k must be >= 1");
    }
    if (embeddings_.size() != snippets_.size() || embedder_version_ != params_checksum(params)) {
        throw Error(ErrorKind::StaleIndex,
                    "index embeddings missing or computed with different embedder parameters");
    }
    const std::vector<double> query_embedding = embed(params, query_text);
    std::vector<RankedResult> scored;
    scored.reserve(snippets_.size());
    for (std::size_t i = 0; i < snippets_.size(); ++i) {
        scored.push_back({snippets_[i].id, cosine(query_embedding, embeddings_[i]), 0});
    }
    return take_top_k(std::move(scored), k);
}

EmbedderParams init_params(std::size_t dim, std::size_t buckets, std::uint64_t seed) {
    EmbedderParams params;
    params.dim = dim;
    params.buckets = buckets;
    params.weights.resize(dim * buckets);
    const double bound = std::sqrt(6.0 / static_cast<double>(dim + buckets));
    Rng rng(seed);
    for (double& w : params.weights) {
        w = rng.uniform(-bound, bound);
    }
    validate_params(params);
    return params;
}

std::string params_to_json(const EmbedderParams& params) {
    nlohmann::json doc;
    doc["dim"] = params.dim;
    doc["buckets"] = params.buckets;
    doc["hash_version"] = kStableHashVersion;
    doc["weights"] = params.weights;
    return doc.dump();
}

EmbedderParams params_from_json(const std::string& json_text) {
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error(ErrorKind::InvalidInput, "checkpoint is not a JSON object");
    }
    EmbedderParams params;
    params.dim = doc.at("dim").get<std::size_t>();
    params.buckets = doc.at("buckets").get<std::size_t>();
    const std::string hash_version = doc.at("hash_version").get<std::string>();
    if (hash_version != kStableHashVersion) {
        throw Error(ErrorKind::InvalidInput,
                    "checkpoint hash version mismatch: " + hash_version);
    }
    params.weights = doc.at("weights").get<std::vector<double>>();
    if (params.weights.size() != params.dim * params.buckets) {
        throw Error(ErrorKind::InvalidInput, "checkpoint weight count must be dim * buckets");
    }
    validate_params(params);
    return params;
}

void save_checkpoint(const std::string& path, const EmbedderParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open checkpoint for writing: " + path);
    }
    out << params_to_json(params);
    out << "\n";
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing checkpoint: " + path);
    }
}

EmbedderParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open checkpoint: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return params_from_json(buffer.str());
}

}  // namespace alignretrieve
