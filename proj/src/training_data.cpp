#include "alignretrieve/training_data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "alignretrieve/imports.hpp"
#include "alignretrieve/rng.hpp"
#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {

FileDependencyGraph build_file_dependency_graph(const std::vector<SourceFile>& repo) {
    FileDependencyGraph graph;
    std::vector<std::string> repo_paths;
    repo_paths.reserve(repo.size());
    for (const SourceFile& file : repo) {
        repo_paths.push_back(file.path);
    }
    for (const SourceFile& file : repo) {
        graph.nodes.push_back(file.path);
        const std::string language = language_of(file.path);
        if (language.empty()) {
            continue;
        }
        Diagnostics ignored;
        const std::vector<ImportRef> imports = extract_imports(file, language, &ignored);
        for (const ResolvedImport& imp : filter_intra_repo(imports, repo_paths, language)) {
            if (imp.path != file.path) {
                graph.edges.insert({file.path, imp.path});
            }
        }
    }
    std::sort(graph.nodes.begin(), graph.nodes.end());
    return graph;
}

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        for (std::size_t i = 0; i < n; ++i) {
            parent_[i] = i;
        }
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<RepoCluster> cluster_files(const FileDependencyGraph& graph) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        index[graph.nodes[i]] = i;
    }
    UnionFind uf(graph.nodes.size());
    for (const auto& [a, b] : graph.edges) {
        uf.unite(index.at(a), index.at(b));
    }
    std::map<std::size_t, std::vector<std::string>> members;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        members[uf.find(i)].push_back(graph.nodes[i]);
    }
    std::vector<RepoCluster> clusters;
    for (auto& [root, files] : members) {
        if (files.size() < 2) {
            continue;
        }
        RepoCluster cluster;
        std::sort(files.begin(), files.end());
        for (const auto& edge : graph.edges) {
            if (std::binary_search(files.begin(), files.end(), edge.first)) {
                cluster.edges.insert(edge);
            }
        }
        cluster.files = topo_sort_cluster(files, cluster.edges);
        clusters.push_back(std::move(cluster));
    }
    std::sort(clusters.begin(), clusters.end(), [](const RepoCluster& a, const RepoCluster& b) {
        return a.files.front() < b.files.front();
    });
    return clusters;
}

std::vector<std::string> topo_sort_cluster(
    const std::vector<std::string>& files,
    const std::set<std::pair<std::string, std::string>>& edges) {
    // Work on precedence edges: import a->b means b must precede a.
    std::set<std::pair<std::string, std::string>> precedence;
    for (const auto& [a, b] : edges) {
        precedence.insert({b, a});
    }
    std::set<std::string> remaining(files.begin(), files.end());
    std::vector<std::string> order;
    while (!remaining.empty()) {
        // Ready = no incoming precedence edge among remaining files.
        std::string ready;
        for (const std::string& f : remaining) {  // set iterates in sorted order
            bool blocked = false;
            for (const auto& [from, to] : precedence) {
                if (to == f && remaining.count(from) > 0) {
                    blocked = true;
                    break;
                }
            }
            if (!blocked) {
                ready = f;
                break;
            }
        }
        if (!ready.empty()) {
            order.push_back(ready);
            remaining.erase(ready);
            continue;
        }
        // Cycle: drop the precedence edge with the lexicographically largest
        // source (largest target, to break ties) and retry.
        std::pair<std::string, std::string> drop;
        for (const auto& edge : precedence) {
            if (remaining.count(edge.first) == 0 || remaining.count(edge.second) == 0) {
                continue;
            }
            if (drop.first.empty() || edge > drop) {
                drop = edge;
            }
        }
        precedence.erase(drop);
    }
    return order;
}

namespace {

std::size_t line_of_offset(const std::vector<std::size_t>& line_starts, std::size_t offset) {
    // Last line whose start is <= offset.
    auto it = std::upper_bound(line_starts.begin(), line_starts.end(), offset);
    return static_cast<std::size_t>(it - line_starts.begin()) - 1;
}

struct SpanCandidate {
    std::size_t begin_byte = 0;
    std::size_t end_byte = 0;
};

// Token spans whose first and last token both sit on lines away from the file
// edges and fit a target of `length` tokens.
std::vector<SpanCandidate> admissible_spans(const std::string& text,
                                            const std::vector<TokenSpan>& spans,
                                            std::size_t length, double edge_exclusion) {
    std::vector<SpanCandidate> out;
    if (spans.size() < length) {
        return out;
    }
    std::vector<std::size_t> line_starts = {0};
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\n') {
            line_starts.push_back(i + 1);
        }
    }
    const std::size_t line_count = line_starts.size();
    const std::size_t excluded = static_cast<std::size_t>(
        static_cast<double>(line_count) * edge_exclusion);
    const std::size_t lo_line = excluded;
    const std::size_t hi_line = line_count - excluded;  // exclusive
    if (lo_line >= hi_line) {
        return out;
    }
    for (std::size_t start = 0; start + length <= spans.size(); ++start) {
        const std::size_t first_line = line_of_offset(line_starts, spans[start].begin);
        const std::size_t last_line =
            line_of_offset(line_starts, spans[start + length - 1].end - 1);
        if (first_line >= lo_line && last_line < hi_line) {
            out.push_back({spans[start].begin, spans[start + length - 1].end});
        }
    }
    return out;
}

}  // namespace

TrainingSample sample_target(const std::string& repo_id, const RepoCluster& cluster,
                             const std::vector<SourceFile>& repo, std::uint64_t seed,
                             const TargetSpanConfig& config) {
    if (cluster.files.size() < 2) {
        throw Error(ErrorKind::InvalidParameter, "cluster must contain at least two files");
    }
    std::map<std::string, const SourceFile*> by_path;
    for (const SourceFile& file : repo) {
        by_path[file.path] = &file;
    }
    std::map<std::string, std::string> texts;
    for (const std::string& path : cluster.files) {
        auto it = by_path.find(path);
        if (it == by_path.end()) {
            throw Error(ErrorKind::InvalidInput, "cluster file missing from repo: " + path);
        }
        texts[path] = join_lines(it->second->lines);
    }

    Rng rng(seed);
    const std::size_t non_first = cluster.files.size() - 1;
    std::string file_path;
    std::size_t length = 0;
    std::vector<SpanCandidate> candidates;
    for (int attempt = 0; attempt < 64 && candidates.empty(); ++attempt) {
        file_path = cluster.files[1 + rng.below(non_first)];
        length = config.min_tokens +
                 rng.below(config.max_tokens - config.min_tokens + 1);
        candidates = admissible_spans(texts[file_path], token_spans(texts[file_path]), length,
                                      config.edge_exclusion);
    }
    if (candidates.empty()) {
        // Exhaustive deterministic fallback before declaring the cluster dead.
        for (std::size_t fi = 1; fi < cluster.files.size() && candidates.empty(); ++fi) {
            for (std::size_t len = config.min_tokens;
                 len <= config.max_tokens && candidates.empty(); ++len) {
                file_path = cluster.files[fi];
                length = len;
                candidates = admissible_spans(texts[file_path], token_spans(texts[file_path]),
                                              len, config.edge_exclusion);
            }
        }
        if (candidates.empty()) {
            throw Error(ErrorKind::ClusterUnusable,
                        "no admissible target span in any non-first file");
        }
    }
    const SpanCandidate chosen = candidates[rng.below(candidates.size())];

    TrainingSample sample;
    sample.repo_id = repo_id;
    sample.completion_file = file_path;
    const std::string& text = texts[file_path];
    sample.unfinished_code = text.substr(0, chosen.begin_byte);
    sample.target = text.substr(chosen.begin_byte, chosen.end_byte - chosen.begin_byte);
    sample.seed = seed;
    for (const std::string& path : cluster.files) {
        if (path != file_path) {
            sample.cross_files.push_back(*by_path.at(path));
        }
    }
    return sample;
}

std::string training_samples_to_jsonl(const std::vector<TrainingSample>& samples) {
    std::string out;
    for (const TrainingSample& s : samples) {
        nlohmann::json record;
        record["repo_id"] = s.repo_id;
        record["completion_file"] = s.completion_file;
        record["unfinished_code"] = s.unfinished_code;
        record["target"] = s.target;
        nlohmann::json files = nlohmann::json::array();
        for (const SourceFile& f : s.cross_files) {
            files.push_back({{"path", f.path}, {"content", join_lines(f.lines)}});
        }
        record["cross_files"] = files;
        record["seed"] = s.seed;
        out += record.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<TrainingSample> training_samples_from_jsonl(const std::string& jsonl) {
    std::vector<TrainingSample> samples;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            throw Error(ErrorKind::InvalidInput,
                        "training line " + std::to_string(line_no) + " is not a JSON object");
        }
        TrainingSample s;
        s.repo_id = record.at("repo_id").get<std::string>();
        s.completion_file = record.at("completion_file").get<std::string>();
        s.unfinished_code = record.at("unfinished_code").get<std::string>();
        s.target = record.at("target").get<std::string>();
        for (const nlohmann::json& f : record.at("cross_files")) {
            SourceFile file;
            file.path = f.at("path").get<std::string>();
            file.lines = split_lines(f.at("content").get<std::string>());
            s.cross_files.push_back(std::move(file));
        }
        s.seed = record.value("seed", 0ULL);
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_training_file(const std::string& path, const std::vector<TrainingSample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open training file for writing: " + path);
    }
    out << training_samples_to_jsonl(samples);
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing training file: " + path);
    }
}

std::vector<TrainingSample> read_training_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open training file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return training_samples_from_jsonl(buffer.str());
}

std::vector<TrainingSample> build_training_samples(const std::string& repo_id,
                                                   const std::vector<SourceFile>& repo,
                                                   std::size_t sample_count,
                                                   std::uint64_t master_seed,
                                                   const std::set<std::string>& holdout,
                                                   const TargetSpanConfig& config,
                                                   Diagnostics* diags) {
    if (holdout.count(repo_id) > 0) {
        warn(diags, "repo " + repo_id + " is in the holdout manifest, skipping");
        return {};
    }
    const FileDependencyGraph graph = build_file_dependency_graph(repo);
    const std::vector<RepoCluster> clusters = cluster_files(graph);
    if (clusters.empty()) {
        warn(diags, "repo " + repo_id + " has no multi-file dependency cluster");
        return {};
    }
    std::vector<TrainingSample> samples;
    const std::uint64_t base = seed_stream(master_seed, "dataset");
    for (std::size_t i = 0; i < sample_count; ++i) {
        const RepoCluster& cluster = clusters[i % clusters.size()];
        try {
            samples.push_back(sample_target(repo_id, cluster, repo, base + i, config));
        } catch (const Error& e) {
            warn(diags, "sample " + std::to_string(i) + " skipped: " + e.what());
        }
    }
    return samples;
}

}  // namespace alignretrieve
