#pragma once

#include <optional>
#include <string>
#include <vector>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/corpus.hpp"
#include "alignretrieve/error.hpp"
#include "alignretrieve/pipeline.hpp"
#include "alignretrieve/retrieval.hpp"

namespace alignretrieve {

struct BenchmarkTask {
    std::string task_id;
    std::vector<SourceFile> files;
    std::string completion_file;
    std::string unfinished_code;
    std::string groundtruth;
};

struct EvalRow {
    std::string task_id;
    std::string prediction;
    int em = 0;
    double es = 0.0;
    std::optional<int> em_at_k;  // set when query enhancement ran
};

struct EvalAggregates {
    double em_percent = 0.0;
    double es_percent = 0.0;
    std::optional<double> em_at_k_percent;
    std::size_t task_count = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;  // ordered by task_id
    std::optional<EvalAggregates> aggregates;  // absent for an empty task list
};

// 1 iff the strings match after stripping leading/trailing whitespace.
int exact_match(const std::string& pred, const std::string& gt);

// 1 - Levenshtein / max length, character level, after trimming; 1 when both
// trim to empty.
double edit_similarity(const std::string& pred, const std::string& gt);

std::size_t levenshtein(const std::string& a, const std::string& b);

// 1 iff any of the first k predictions exactly matches.
int em_at_k(const std::vector<std::string>& preds, const std::string& gt, std::size_t k);

EvalReport run_benchmark(const std::vector<BenchmarkTask>& tasks, const PipelineConfig& config,
                         Backend& sampler, Backend& generator, const EmbedderParams& params,
                         Diagnostics* diags);

std::string report_to_json(const EvalReport& report, const PipelineConfig& config);

std::vector<BenchmarkTask> tasks_from_jsonl(const std::string& jsonl);
std::vector<BenchmarkTask> read_tasks_file(const std::string& path);
std::string tasks_to_jsonl(const std::vector<BenchmarkTask>& tasks);
void write_tasks_file(const std::string& path, const std::vector<BenchmarkTask>& tasks);

}  // namespace alignretrieve
