#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "alignretrieve/corpus.hpp"
#include "alignretrieve/error.hpp"

namespace alignretrieve {

struct FileDependencyGraph {
    std::vector<std::string> nodes;                       // sorted paths
    std::set<std::pair<std::string, std::string>> edges;  // (a,b): a imports b
};

struct RepoCluster {
    std::vector<std::string> files;  // topologically ordered, dependency-free first
    std::set<std::pair<std::string, std::string>> edges;
};

struct TrainingSample {
    std::string repo_id;
    std::string completion_file;
    std::string unfinished_code;
    std::string target;
    std::vector<SourceFile> cross_files;
    std::uint64_t seed = 0;
};

FileDependencyGraph build_file_dependency_graph(const std::vector<SourceFile>& repo);

// Weakly connected components of size >= 2, each topologically ordered.
std::vector<RepoCluster> cluster_files(const FileDependencyGraph& graph);

// Dependency-first order: files whose imports are all satisfied come first.
// Import cycles are broken by dropping precedence edges from the
// lexicographically largest source until the sort can proceed.
std::vector<std::string> topo_sort_cluster(const std::vector<std::string>& files,
                                           const std::set<std::pair<std::string, std::string>>& edges);

struct TargetSpanConfig {
    std::size_t min_tokens = 16;
    std::size_t max_tokens = 96;
    double edge_exclusion = 0.10;  // fraction of lines excluded at each end
};

// One sample from a cluster: a non-first file, a 16-96 token target span away
// from the file edges, deterministic under the seed.
TrainingSample sample_target(const std::string& repo_id, const RepoCluster& cluster,
                             const std::vector<SourceFile>& repo, std::uint64_t seed,
                             const TargetSpanConfig& config);

std::string training_samples_to_jsonl(const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> training_samples_from_jsonl(const std::string& jsonl);
void write_training_file(const std::string& path, const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> read_training_file(const std::string& path);

// End-to-end dataset construction over one repository. Repos listed in
// `holdout` are skipped entirely.
std::vector<TrainingSample> build_training_samples(const std::string& repo_id,
                                                   const std::vector<SourceFile>& repo,
                                                   std::size_t sample_count,
                                                   std::uint64_t master_seed,
                                                   const std::set<std::string>& holdout,
                                                   const TargetSpanConfig& config,
                                                   Diagnostics* diags);

}  // namespace alignretrieve
