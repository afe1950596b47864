#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "alignretrieve/corpus.hpp"
#include "alignretrieve/error.hpp"

namespace alignretrieve {

struct RankedResult {
    std::string snippet_id;
    double score = 0.0;
    int rank = 0;
};

// Sparse L2-normalized bag of hashed token counts. Entries sorted by bucket.
struct HashedFeatures {
    std::vector<std::pair<std::size_t, double>> entries;
    bool degenerate() const { return entries.empty(); }
};

HashedFeatures hash_features(const std::vector<std::string>& tokens, std::size_t buckets);

struct EmbedderParams {
    std::size_t dim = 128;
    std::size_t buckets = 4096;
    std::vector<double> weights;  // row-major dim x buckets

    double at(std::size_t row, std::size_t col) const { return weights[row * buckets + col]; }
    double& at(std::size_t row, std::size_t col) { return weights[row * buckets + col]; }
};

void validate_params(const EmbedderParams& params);

// Checksum over dim, buckets, hash version and exact weight bytes; identifies
// the parameters an index's embeddings were computed with.
std::string params_checksum(const EmbedderParams& params);

// W·h for sparse h (not normalized).
std::vector<double> project(const EmbedderParams& params, const HashedFeatures& features);

// Unit-norm embedding of text; all-zero when the projection is degenerate.
std::vector<double> embed(const EmbedderParams& params, const std::string& text);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// 1 - cosine(embed(a), embed(b)), in [0, 2].
double semantic_gap(const EmbedderParams& params, const std::string& text_a,
                    const std::string& text_b);

class RetrievalIndex {
public:
    explicit RetrievalIndex(std::vector<Snippet> snippets);

    const std::vector<Snippet>& snippets() const { return snippets_; }
    const Snippet& snippet(std::size_t i) const { return snippets_[i]; }
    std::size_t size() const { return snippets_.size(); }

    void compute_embeddings(const EmbedderParams& params);
    bool has_embeddings() const { return !embeddings_.empty(); }
    const std::string& embedder_version() const { return embedder_version_; }
    const std::vector<std::vector<double>>& embeddings() const { return embeddings_; }

    std::vector<RankedResult> bm25_retrieve(const std::string& query_text, std::size_t k) const;
    std::vector<RankedResult> dense_retrieve(const EmbedderParams& params,
                                             const std::string& query_text,
                                             std::size_t k) const;

private:
    std::vector<Snippet> snippets_;
    std::vector<std::map<std::string, std::size_t>> term_freqs_;
    std::vector<std::size_t> doc_lengths_;
    std::map<std::string, std::size_t> doc_freqs_;
    double avg_doc_length_ = 0.0;
    std::vector<std::vector<double>> embeddings_;
    std::string embedder_version_;
};

EmbedderParams init_params(std::size_t dim, std::size_t buckets, std::uint64_t seed);

std::string params_to_json(const EmbedderParams& params);
EmbedderParams params_from_json(const std::string& json_text);
void save_checkpoint(const std::string& path, const EmbedderParams& params);
EmbedderParams load_checkpoint(const std::string& path);

}  // namespace alignretrieve
