#pragma once

// Shared fixtures for the test binaries: synthetic repositories with known
// retrieval behavior, scripted backends, a fake HTTP transport, and temp-file
// helpers. Everything here is deterministic.

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/corpus.hpp"
#include "alignretrieve/error.hpp"
#include "alignretrieve/eval.hpp"
#include "alignretrieve/pipeline.hpp"
#include "alignretrieve/query_enhancement.hpp"
#include "alignretrieve/reward.hpp"

namespace alignretrieve::testfx {

inline SourceFile make_file(const std::string& path, const std::string& text) {
    SourceFile file;
    file.path = path;
    file.lines = split_lines(text);
    return file;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        const auto nanos = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(nanos) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

// --- Python class/function import fixture ---------------------------------
//
// generator.py defines a class with nested-class, nested-method and plain
// methods, plus a top-level function; example_cfg.py imports both.

inline SourceFile generator_file() {
    return make_file("generator.py",
                     "import math\n"
                     "\n"
                     "\n"
                     "class ExLlamaGenerator:\n"
                     "    class SamplerState:\n"
                     "        def __init__(self):\n"
                     "            self.temperature = 1.0\n"
                     "\n"
                     "        def clone(self):\n"
                     "            return self\n"
                     "\n"
                     "    def __init__(self, model, tokenizer):\n"
                     "        self.model = model\n"
                     "        self.tokenizer = tokenizer\n"
                     "\n"
                     "    def set_stop_conditions(self, stop_conditions):\n"
                     "        self.stop_conditions = stop_conditions\n"
                     "\n"
                     "    def get_accept_token(self, logits):\n"
                     "        return int(logits.argmax())\n"
                     "\n"
                     "\n"
                     "def timing_report(start, end):\n"
                     "    return end - start\n");
}

inline SourceFile generator_usage_file() {
    return make_file("example_cfg.py",
                     "from generator import ExLlamaGenerator, timing_report\n"
                     "\n"
                     "gen = ExLlamaGenerator(None, None)\n"
                     "gen.set_stop_conditions([])\n"
                     "token = gen.get_accept_token([0.25, 0.75])\n"
                     "print(timing_report(0.0, 1.0))\n");
}

inline std::vector<std::string> generator_class_signature_lines() {
    return {
        "class ExLlamaGenerator:",
        "    class SamplerState:",
        "        def __init__(self):",
        "        def clone(self):",
        "    def __init__(self, model, tokenizer):",
        "    def set_stop_conditions(self, stop_conditions):",
        "    def get_accept_token(self, logits):",
    };
}

inline std::string generator_function_signature_line() { return "def timing_report(start, end):"; }

// --- Benchmark task fixtures -----------------------------------------------
//
// Both families are sized against this prompt budget: the store snippet plus
// the unfinished tail fit, the panel snippet on top does not, and the small
// Java fixtures fit entirely.

inline constexpr std::size_t kFixtureBudgetTokens = 320;

inline PipelineConfig fixture_pipeline_config() {
    PipelineConfig config;
    config.fine_budget_tokens = kFixtureBudgetTokens;
    config.coarse_k = 5;
    config.dense_k = 50;
    config.reward_n = 10;
    config.sampling_k = 4;
    config.sampling_seed = 0;
    return config;
}

// Query-enhancement-sensitive task. The groundtruth line lives in a store
// file whose tokens barely overlap the unfinished tail, while a panel file
// soaks up the tail's local vocabulary. Plain dense retrieval ranks the
// panel first and the budget shuts the store out; BM25 ranks the store
// first (rare terms, high idf), so sampled candidates pull the enhanced
// query toward the store and flip the dense ranking.
inline BenchmarkTask qh_task(int variant) {
    static const char* kVerbs[] = {"fetch", "load", "scan", "pull", "grab"};
    static const char* kNouns[] = {"rows", "items", "pages", "blocks", "users"};
    const std::string verb = kVerbs[variant % 5];
    const std::string noun = kNouns[(variant / 5) % 5];
    auto upper = [](std::string s) {
        for (char& c : s) {
            c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
        return s;
    };
    const std::string query_const = upper(verb) + "_" + upper(noun) + "_QUERY";
    const std::string fn = verb + "_" + noun;
    const std::string tag = std::to_string(variant);

    BenchmarkTask task;
    task.task_id = "qh-" + std::string(variant < 10 ? "0" : "") + tag;
    task.files.push_back(make_file(
        "db/store_" + tag + ".py",
        query_const + " = \"select " + noun + " from stash\"\n" +
            "\n" +
            "def " + fn + "(conn):\n" +
            "    cursor = conn.execute(" + query_const + ")\n" +
            "    return cursor.fetchall()\n" +
            "\n" +
            "def collect_batch(conn):\n" +
            "    batch_" + noun + " = " + fn + "(conn)\n" +
            "    return batch_" + noun + "\n"));
    task.files.push_back(make_file(
        "ui/panel_" + tag + ".py",
        "def merge_window_frames(buffer, stream, window):\n"
        "    cache = buffer + stream + window + buffer + stream\n"
        "    queue = cache + window + buffer + stream + cache\n"
        "    worker = queue + cache + window + buffer + stream\n"
        "    signal = worker + queue + cache + window + buffer\n"
        "    flag = signal + worker + queue + cache + window\n"
        "    merge = flag + signal + worker + queue + cache\n"
        "    buffer = merge + flag + signal + worker + queue\n"
        "    stream = buffer + merge + flag + signal + worker\n"
        "    window = stream + buffer + merge + flag + signal\n"
        "    cache = window + stream + buffer + merge + flag\n"
        "    queue = cache + window + stream + buffer + merge\n"
        "    return queue + cache + window + stream + buffer\n"));
    task.files.push_back(make_file("lib/util_a_" + tag + ".py",
                                   "buffer = object()\nstream = object()\nwindow = object()\n"));
    task.files.push_back(make_file("lib/util_b_" + tag + ".py",
                                   "window = object()\ncache = object()\nqueue = object()\n"));
    task.files.push_back(make_file("lib/util_c_" + tag + ".py",
                                   "queue = object()\nworker = object()\nsignal = object()\n"));
    task.files.push_back(
        make_file("lib/util_d_" + tag + ".py",
                  "signal = object()\nflag = object()\nmerge = object()\nbuffer = object()\n"));
    task.completion_file = "app_" + tag + ".py";
    task.unfinished_code =
        "import os\n"
        "\n"
        "def run_report(path):\n"
        "    buffer = read_buffer(path)\n"
        "    stream = wrap_stream(buffer)\n"
        "    window = merge_window(buffer, stream)\n"
        "    cache = trim_cache(window)\n"
        "    queue = worker_queue(cache)\n"
        "    signal = flag_signal(queue)\n"
        "    conn = connect_stash()\n"
        "    stash = collect_batch(conn)\n"
        "    cursor = conn.prepare(" + query_const + ")\n" +
        "    batch_" + noun + " = " + fn + "(";
    task.groundtruth = "    batch_" + noun + " = " + fn + "(conn)";
    return task;
}

// Dependency-context-sensitive task. The groundtruth is a Java method
// signature; the defining file writes the method on one line with its body,
// so only the dependency snippet (header cut at the brace) contains the
// groundtruth text verbatim.
inline BenchmarkTask dc_task(int variant) {
    static const char* kKinds[] = {"Mask", "Gain", "Tint", "Blur", "Fade"};
    static const char* kAreas[] = {"Frame", "Layer", "Patch", "Tile", "Band"};
    const std::string fam = std::string(kKinds[variant % 5]) + kAreas[(variant / 5) % 5];
    const std::string tag = std::to_string(variant);
    const std::string cls = "Shaper" + tag;

    BenchmarkTask task;
    task.task_id = "dc-" + std::string(variant < 10 ? "0" : "") + tag;
    task.files.push_back(make_file(
        "fx/" + cls + ".java",
        "public class " + cls + " {\n" +
            "    public int apply" + fam + "(int frame) { return frame | " +
            std::to_string(variant + 2) + "; }\n" +
            "    public int clear" + fam + "(int frame) { return frame & " +
            std::to_string(variant + 3) + "; }\n" +
            "}\n"));
    task.completion_file = "Task" + tag + ".java";
    task.unfinished_code =
        "import fx." + cls + ";\n" +
        "\n" +
        "public class Task" + tag + " {\n" +
        "    public int render(int frame) {\n" +
        "        " + cls + " tool = new " + cls + "();\n" +
        "        int value = tool.apply" + fam + "(frame";
    task.groundtruth = "public int apply" + fam + "(int frame)";
    return task;
}

inline std::vector<BenchmarkTask> ablation_benchmark(int qh_count, int dc_count) {
    std::vector<BenchmarkTask> tasks;
    for (int v = 0; v < qh_count; ++v) {
        tasks.push_back(qh_task(v));
    }
    for (int v = 0; v < dc_count; ++v) {
        tasks.push_back(dc_task(v));
    }
    return tasks;
}

// --- Planted reward dataset -------------------------------------------------
//
// Sample i belongs to topic t = i % topics. Its query uses topic-t query
// tokens, the planted snippet (and only it) contains the target tokens, and
// the distractors come from other topics. Query and snippet tokens are
// disjoint, so a random projection scores near chance and the retriever has
// to learn the topic pairing. The mock evaluator gives the planted snippet
// perplexity 1 and every distractor e.

inline std::string topic_query_text(std::size_t topic) {
    const std::string t = std::to_string(topic);
    return "qtok" + t + "a qtok" + t + "b qtok" + t + "c qtok" + t + "d";
}

inline std::string topic_snippet_text(std::size_t topic) {
    const std::string t = std::to_string(topic);
    return "ptok" + t + "a ptok" + t + "b\nptok" + t + "c ptok" + t + "d";
}

inline std::string topic_target_text(std::size_t topic) {
    const std::string t = std::to_string(topic);
    return "ptok" + t + "a ptok" + t + "b ptok" + t + "c";
}

inline Snippet topic_snippet(std::size_t topic) {
    Snippet snippet;
    snippet.id = "plant" + std::to_string(topic);
    snippet.kind = SnippetKind::Base;
    snippet.origin_path = "plant" + std::to_string(topic) + ".py";
    snippet.start_line = 1;
    snippet.end_line = 2;
    snippet.text = topic_snippet_text(topic);
    snippet.line_count = 2;
    return snippet;
}

inline std::vector<RewardSample> planted_samples(std::size_t count, std::size_t topics,
                                                 std::size_t snippets_per_sample) {
    std::vector<RewardSample> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t topic = i % topics;
        RewardSample sample;
        sample.query = build_enhanced_query(topic_query_text(topic), {});
        sample.target = topic_target_text(topic);
        const std::size_t planted_pos = i % snippets_per_sample;
        for (std::size_t j = 0; j < snippets_per_sample; ++j) {
            if (j == planted_pos) {
                sample.snippets.push_back(topic_snippet(topic));
            } else {
                sample.snippets.push_back(topic_snippet((topic + j + 1) % topics));
            }
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

// The planted snippet is the one whose text contains the target's first
// token ("ptok<t>a"), which no other topic's snippet does.
inline std::size_t planted_index(const RewardSample& sample) {
    const std::string first_token = sample.target.substr(0, sample.target.find(' '));
    for (std::size_t j = 0; j < sample.snippets.size(); ++j) {
        if (sample.snippets[j].text.find(first_token) != std::string::npos) {
            return j;
        }
    }
    return 0;
}

// --- Scripted backends -------------------------------------------------------

// Returns canned completions and logprobs. complete() hands back the first k
// scripted texts (cycling when short); score_continuation() delegates to the
// scorer when set.
class ScriptedBackend : public Backend {
public:
    std::vector<std::string> completions;
    std::function<TokenLogprobs(const std::string&, const std::string&)> scorer;
    int complete_calls = 0;

    std::vector<std::string> complete(const std::string& /*prompt*/, int k, double /*temperature*/,
                                      double /*top_p*/, std::uint64_t /*seed*/,
                                      int /*max_new_tokens*/) override {
        ++complete_calls;
        if (k < 1) {
            throw Error(ErrorKind::InvalidParameter, "k must be >= 1");
        }
        std::vector<std::string> out;
        for (int j = 0; j < k; ++j) {
            if (completions.empty()) {
                out.push_back("");
            } else {
                out.push_back(completions[static_cast<std::size_t>(j) % completions.size()]);
            }
        }
        return out;
    }

    TokenLogprobs score_continuation(const std::string& context,
                                     const std::string& continuation) override {
        if (scorer) {
            return scorer(context, continuation);
        }
        TokenLogprobs scored;
        scored.tokens = {continuation};
        scored.logprobs = {-1.0};
        return scored;
    }
};

// Fails every call with a configurable error kind.
class ThrowingBackend : public Backend {
public:
    explicit ThrowingBackend(ErrorKind kind = ErrorKind::BackendUnavailable) : kind_(kind) {}

    std::vector<std::string> complete(const std::string&, int, double, double, std::uint64_t,
                                      int) override {
        throw Error(kind_, "scripted backend failure");
    }
    TokenLogprobs score_continuation(const std::string&, const std::string&) override {
        throw Error(kind_, "scripted backend failure");
    }

private:
    ErrorKind kind_;
};

// Transport double: scripted responses consumed in order (the last repeats),
// a request log, and a high-water mark of concurrent calls.
class FakeTransport : public Transport {
public:
    struct Request {
        std::string base_url;
        std::string path;
        std::string body;
        std::map<std::string, std::string> headers;
    };

    std::vector<HttpResponse> responses;
    std::chrono::milliseconds delay{0};

    HttpResponse post(const std::string& base_url, const std::string& path,
                      const std::string& body, const std::map<std::string, std::string>& headers,
                      double /*timeout_seconds*/) override {
        const int now = ++in_flight_;
        int seen = max_in_flight_.load();
        while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
        }
        if (delay.count() > 0) {
            std::this_thread::sleep_for(delay);
        }
        HttpResponse response;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            requests_.push_back({base_url, path, body, headers});
            if (responses.empty()) {
                response = {500, "no scripted response"};
            } else if (call_count_ < responses.size()) {
                response = responses[call_count_];
            } else {
                response = responses.back();
            }
            ++call_count_;
        }
        --in_flight_;
        return response;
    }

    std::vector<Request> requests() {
        std::lock_guard<std::mutex> lock(mutex_);
        return requests_;
    }
    std::size_t call_count() {
        std::lock_guard<std::mutex> lock(mutex_);
        return call_count_;
    }
    int max_in_flight() const { return max_in_flight_.load(); }

private:
    std::mutex mutex_;
    std::vector<Request> requests_;
    std::size_t call_count_ = 0;
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

}  // namespace alignretrieve::testfx
