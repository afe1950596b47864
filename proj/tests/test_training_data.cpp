#include <doctest.h>

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "alignretrieve/rng.hpp"
#include "alignretrieve/tokenize.hpp"
#include "alignretrieve/training_data.hpp"
#include "fixtures.hpp"

using namespace alignretrieve;
using testfx::make_file;

namespace {

std::vector<SourceFile> chain_repo() {
    return {
        make_file("a.py", "import b\n\nx = b.value\n"),
        make_file("b.py", "value = 1\n"),
        make_file("c.py", "import a\nimport b\n\ny = a.x + b.value\n"),
    };
}

// Weakly connected components by BFS, ignoring edge direction.
std::vector<std::set<std::string>> bfs_components(const FileDependencyGraph& graph) {
    std::map<std::string, std::set<std::string>> adj;
    for (const auto& [a, b] : graph.edges) {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    std::set<std::string> seen;
    std::vector<std::set<std::string>> components;
    for (const std::string& start : graph.nodes) {
        if (seen.count(start) > 0) continue;
        std::set<std::string> component;
        std::queue<std::string> frontier;
        frontier.push(start);
        seen.insert(start);
        while (!frontier.empty()) {
            const std::string node = frontier.front();
            frontier.pop();
            component.insert(node);
            for (const std::string& next : adj[node]) {
                if (seen.insert(next).second) {
                    frontier.push(next);
                }
            }
        }
        if (component.size() >= 2) {
            components.push_back(std::move(component));
        }
    }
    return components;
}

std::size_t position_of(const std::vector<std::string>& order, const std::string& file) {
    return static_cast<std::size_t>(
        std::find(order.begin(), order.end(), file) - order.begin());
}

SourceFile big_target_file(const std::string& path, int line_count) {
    SourceFile file;
    file.path = path;
    file.lines.push_back("import lead");
    for (int i = 1; i < line_count; ++i) {
        file.lines.push_back("value_" + std::to_string(i) + " = compute_" +
                             std::to_string(i) + "(seed)");
    }
    return file;
}

}  // namespace

TEST_CASE("the dependency graph records intra-repo imports without self-edges") {
    const FileDependencyGraph graph = build_file_dependency_graph(chain_repo());
    CHECK(graph.nodes == std::vector<std::string>{"a.py", "b.py", "c.py"});
    const std::set<std::pair<std::string, std::string>> want = {
        {"a.py", "b.py"}, {"c.py", "a.py"}, {"c.py", "b.py"}};
    CHECK(graph.edges == want);
    for (const auto& [a, b] : graph.edges) {
        CHECK(a != b);
    }
}

TEST_CASE("stdlib imports never create graph edges") {
    const FileDependencyGraph graph = build_file_dependency_graph({
        make_file("a.py", "import os\nimport json\n"),
        make_file("b.py", "import numpy\n"),
    });
    CHECK(graph.edges.empty());
}

TEST_CASE("clusters are weak components of size at least two") {
    SUBCASE("an edgeless repo clusters nothing") {
        std::vector<SourceFile> repo;
        for (int i = 0; i < 5; ++i) {
            repo.push_back(make_file("f" + std::to_string(i) + ".py", "x = 1\n"));
        }
        CHECK(cluster_files(build_file_dependency_graph(repo)).empty());
    }
    SUBCASE("two mutually-importing pairs form two clusters") {
        const std::vector<SourceFile> repo = {
            make_file("a.py", "import b\n"), make_file("b.py", "import a\n"),
            make_file("c.py", "import d\n"), make_file("d.py", "import c\n"),
            make_file("e.py", "alone = True\n"),
        };
        const auto clusters = cluster_files(build_file_dependency_graph(repo));
        REQUIRE(clusters.size() == 2);
        CHECK(clusters[0].files == std::vector<std::string>{"a.py", "b.py"});
        CHECK(clusters[1].files == std::vector<std::string>{"c.py", "d.py"});
    }
    SUBCASE("components match an independent BFS on random graphs") {
        Rng rng(555);
        for (int round = 0; round < 10; ++round) {
            std::vector<SourceFile> repo;
            const int n = 8;
            std::vector<std::string> imports(n);
            for (int i = 0; i < n; ++i) {
                std::string body;
                for (int j = 0; j < n; ++j) {
                    if (i != j && rng.below(5) == 0) {
                        body += "import m" + std::to_string(j) + "\n";
                    }
                }
                body += "x = 1\n";
                repo.push_back(make_file("m" + std::to_string(i) + ".py", body));
            }
            const FileDependencyGraph graph = build_file_dependency_graph(repo);
            const auto clusters = cluster_files(graph);
            auto expected = bfs_components(graph);
            REQUIRE(clusters.size() == expected.size());
            std::vector<std::set<std::string>> got;
            for (const auto& c : clusters) {
                got.emplace_back(c.files.begin(), c.files.end());
            }
            std::sort(got.begin(), got.end());
            std::sort(expected.begin(), expected.end());
            CHECK(got == expected);
        }
    }
}

TEST_CASE("topological order puts imported files before their importers") {
    SUBCASE("a two-file chain") {
        const auto order = topo_sort_cluster({"a.py", "b.py"}, {{"a.py", "b.py"}});
        CHECK(order == std::vector<std::string>{"b.py", "a.py"});
    }
    SUBCASE("a three-file chain through the cluster example") {
        const auto clusters = cluster_files(build_file_dependency_graph(chain_repo()));
        REQUIRE(clusters.size() == 1);
        CHECK(clusters[0].files == std::vector<std::string>{"b.py", "a.py", "c.py"});
    }
    SUBCASE("a two-cycle drops the larger precedence edge") {
        const auto order =
            topo_sort_cluster({"a.py", "b.py"}, {{"a.py", "b.py"}, {"b.py", "a.py"}});
        CHECK(order == std::vector<std::string>{"a.py", "b.py"});
    }
    SUBCASE("a three-cycle resolves deterministically") {
        const auto order = topo_sort_cluster(
            {"a.py", "b.py", "c.py"},
            {{"a.py", "b.py"}, {"b.py", "c.py"}, {"c.py", "a.py"}});
        CHECK(order == std::vector<std::string>{"b.py", "a.py", "c.py"});
    }
    SUBCASE("every edge of an acyclic cluster is respected") {
        Rng rng(556);
        for (int round = 0; round < 10; ++round) {
            // Edges only from higher to lower index keep the graph acyclic.
            std::vector<std::string> files;
            const int n = 6;
            for (int i = 0; i < n; ++i) {
                files.push_back("f" + std::to_string(i) + ".py");
            }
            std::set<std::pair<std::string, std::string>> edges;
            for (int i = 1; i < n; ++i) {
                for (int j = 0; j < i; ++j) {
                    if (rng.below(3) == 0) {
                        edges.insert({files[i], files[j]});
                    }
                }
            }
            const auto order = topo_sort_cluster(files, edges);
            REQUIRE(order.size() == files.size());
            for (const auto& [importer, imported] : edges) {
                CHECK(position_of(order, imported) < position_of(order, importer));
            }
        }
    }
    SUBCASE("the first file has no unsatisfied imports") {
        const auto clusters = cluster_files(build_file_dependency_graph(chain_repo()));
        REQUIRE_FALSE(clusters.empty());
        const std::string& first = clusters[0].files.front();
        for (const auto& [importer, imported] : clusters[0].edges) {
            CHECK(importer != first);
        }
    }
}

TEST_CASE("sample_target picks a bounded span inside a non-first file") {
    const std::vector<SourceFile> repo = {
        make_file("lead.py", "seed = 1\n"),
        big_target_file("big.py", 200),
    };
    const auto clusters = cluster_files(build_file_dependency_graph(repo));
    REQUIRE(clusters.size() == 1);
    REQUIRE(clusters[0].files.front() == "lead.py");
    const TargetSpanConfig config;

    SUBCASE("deterministic under the seed") {
        const TrainingSample a = sample_target("r", clusters[0], repo, 42, config);
        const TrainingSample b = sample_target("r", clusters[0], repo, 42, config);
        CHECK(a.completion_file == b.completion_file);
        CHECK(a.unfinished_code == b.unfinished_code);
        CHECK(a.target == b.target);
        CHECK(a.seed == 42);
        const TrainingSample c = sample_target("r", clusters[0], repo, 43, config);
        CHECK((a.unfinished_code != c.unfinished_code || a.target != c.target));
    }

    SUBCASE("span statistics over many seeds") {
        const std::string full_text = join_lines(repo[1].lines);
        for (std::uint64_t seed = 0; seed < 300; ++seed) {
            const TrainingSample s = sample_target("r", clusters[0], repo, seed, config);
            CHECK(s.completion_file == "big.py");
            CHECK(s.repo_id == "r");
            // The sampled prefix plus target reproduces the file text.
            CHECK(full_text.rfind(s.unfinished_code + s.target, 0) == 0);
            const std::size_t tokens = tokenize(s.target).size();
            CHECK(tokens >= config.min_tokens);
            CHECK(tokens <= config.max_tokens);
            // 10% of 200 lines excluded at each end.
            const auto line_of = [](const std::string& text) {
                return std::count(text.begin(), text.end(), '\n');
            };
            CHECK(line_of(s.unfinished_code) >= 20);
            CHECK(line_of(s.unfinished_code + s.target) < 180);
            // Cross files are the cluster minus the completion file.
            REQUIRE(s.cross_files.size() == 1);
            CHECK(s.cross_files[0].path == "lead.py");
        }
    }
}

TEST_CASE("sample_target rejects unusable clusters") {
    SUBCASE("a single-file cluster is invalid") {
        RepoCluster cluster;
        cluster.files = {"a.py"};
        try {
            sample_target("r", cluster, {make_file("a.py", "x = 1\n")}, 0, TargetSpanConfig{});
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidParameter);
        }
    }
    SUBCASE("too few tokens in every non-first file") {
        const std::vector<SourceFile> repo = {
            make_file("x.py", "import y\nz = 1\n"),
            make_file("y.py", "w = 2\n"),
        };
        const auto clusters = cluster_files(build_file_dependency_graph(repo));
        REQUIRE(clusters.size() == 1);
        try {
            sample_target("r", clusters[0], repo, 0, TargetSpanConfig{});
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ClusterUnusable);
        }
    }
    SUBCASE("a cluster file missing from the repo") {
        RepoCluster cluster;
        cluster.files = {"a.py", "ghost.py"};
        try {
            sample_target("r", cluster, {make_file("a.py", "x = 1\n")}, 0, TargetSpanConfig{});
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidInput);
        }
    }
}

TEST_CASE("training samples round-trip through JSONL") {
    const std::vector<SourceFile> repo = {
        make_file("lead.py", "seed = 1\n"),
        big_target_file("big.py", 60),
    };
    const auto clusters = cluster_files(build_file_dependency_graph(repo));
    std::vector<TrainingSample> samples;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        samples.push_back(sample_target("demo", clusters[0], repo, seed, TargetSpanConfig{}));
    }
    const std::string jsonl = training_samples_to_jsonl(samples);
    const auto reloaded = training_samples_from_jsonl(jsonl);
    REQUIRE(reloaded.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(reloaded[i].repo_id == samples[i].repo_id);
        CHECK(reloaded[i].completion_file == samples[i].completion_file);
        CHECK(reloaded[i].unfinished_code == samples[i].unfinished_code);
        CHECK(reloaded[i].target == samples[i].target);
        CHECK(reloaded[i].seed == samples[i].seed);
        REQUIRE(reloaded[i].cross_files.size() == samples[i].cross_files.size());
        CHECK(reloaded[i].cross_files[0].path == samples[i].cross_files[0].path);
    }
    CHECK(training_samples_to_jsonl(reloaded) == jsonl);

    const testfx::TempDir dir("training-jsonl");
    const std::string path = dir.file("samples.jsonl");
    write_training_file(path, samples);
    CHECK(training_samples_to_jsonl(read_training_file(path)) == jsonl);

    SUBCASE("malformed lines are rejected with their line number") {
        try {
            training_samples_from_jsonl(jsonl + "not json\n");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidInput);
            CHECK(std::string(e.what()).find("line 4") != std::string::npos);
        }
    }
}

TEST_CASE("dataset construction walks clusters and honors the holdout list") {
    const std::vector<SourceFile> repo = {
        make_file("lead.py", "seed = 1\n"),
        big_target_file("big.py", 80),
    };
    const TargetSpanConfig config;
    SUBCASE("a held-out repo yields nothing") {
        Diagnostics diags;
        const auto samples =
            build_training_samples("held", repo, 4, 0, {"held"}, config, &diags);
        CHECK(samples.empty());
        REQUIRE_FALSE(diags.empty());
        CHECK(diags[0].find("holdout") != std::string::npos);
    }
    SUBCASE("a repo without clusters yields nothing") {
        Diagnostics diags;
        const auto samples = build_training_samples(
            "flat", {make_file("solo.py", "x = 1\n")}, 4, 0, {}, config, &diags);
        CHECK(samples.empty());
        CHECK_FALSE(diags.empty());
    }
    SUBCASE("sample count and determinism") {
        Diagnostics diags;
        const auto first = build_training_samples("demo", repo, 6, 7, {}, config, &diags);
        const auto second = build_training_samples("demo", repo, 6, 7, {}, config, &diags);
        CHECK(first.size() == 6);
        CHECK(training_samples_to_jsonl(first) == training_samples_to_jsonl(second));
        const auto other_seed = build_training_samples("demo", repo, 6, 8, {}, config, &diags);
        CHECK(training_samples_to_jsonl(first) != training_samples_to_jsonl(other_seed));
    }
}
