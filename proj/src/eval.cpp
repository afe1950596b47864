#include "alignretrieve/eval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

int exact_match(const std::string& pred, const std::string& gt) {
    return trim(pred) == trim(gt) ? 1 : 0;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double edit_similarity(const std::string& pred, const std::string& gt) {
    const std::string a = trim(pred);
    const std::string b = trim(gt);
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) {
        return 1.0;
    }
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

int em_at_k(const std::vector<std::string>& preds, const std::string& gt, std::size_t k) {
    if (k < 1 || k > preds.size()) {
        throw Error(ErrorKind::InvalidParameter, "k out of range for em_at_k");
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (exact_match(preds[i], gt) == 1) {
            return 1;
        }
    }
    return 0;
}

EvalReport run_benchmark(const std::vector<BenchmarkTask>& tasks, const PipelineConfig& config,
                         Backend& sampler, Backend& generator, const EmbedderParams& params,
                         Diagnostics* diags) {
    std::vector<const BenchmarkTask*> ordered;
    ordered.reserve(tasks.size());
    for (const BenchmarkTask& task : tasks) {
        ordered.push_back(&task);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const BenchmarkTask* a, const BenchmarkTask* b) {
                  return a->task_id < b->task_id;
              });

    EvalReport report;
    for (const BenchmarkTask* task : ordered) {
        EvalRow row;
        row.task_id = task->task_id;
        try {
            const CompletionOutcome outcome =
                run_completion(task->files, task->completion_file, task->unfinished_code,
                               config, sampler, generator, params, diags);
            row.prediction = outcome.prediction;
            row.em = exact_match(outcome.prediction, task->groundtruth);
            row.es = edit_similarity(outcome.prediction, task->groundtruth);
            if (!config.no_query_enhancement && !outcome.candidates.empty()) {
                std::vector<std::string> texts;
                texts.reserve(outcome.candidates.size());
                for (const CandidateCompletion& candidate : outcome.candidates) {
                    texts.push_back(candidate.text);
                }
                row.em_at_k = em_at_k(texts, task->groundtruth, texts.size());
            }
        } catch (const Error& e) {
            warn(diags, "task " + task->task_id + " failed: " + e.what());
            row.prediction.clear();
            row.em = 0;
            row.es = 0.0;
        }
        report.rows.push_back(std::move(row));
    }

    if (!report.rows.empty()) {
        EvalAggregates agg;
        agg.task_count = report.rows.size();
        double em_at_k_sum = 0.0;
        std::size_t em_at_k_count = 0;
        for (const EvalRow& row : report.rows) {
            agg.em_percent += row.em;
            agg.es_percent += row.es;
            if (row.em_at_k.has_value()) {
                em_at_k_sum += *row.em_at_k;
                ++em_at_k_count;
            }
        }
        agg.em_percent = agg.em_percent / static_cast<double>(agg.task_count) * 100.0;
        agg.es_percent = agg.es_percent / static_cast<double>(agg.task_count) * 100.0;
        if (em_at_k_count > 0) {
            agg.em_at_k_percent = em_at_k_sum / static_cast<double>(em_at_k_count) * 100.0;
        }
        report.aggregates = agg;
    }
    return report;
}

std::string report_to_json(const EvalReport& report, const PipelineConfig& config) {
    nlohmann::json doc;
    nlohmann::json rows = nlohmann::json::array();
    for (const EvalRow& row : report.rows) {
        nlohmann::json r;
        r["task_id"] = row.task_id;
        r["prediction"] = row.prediction;
        r["em"] = row.em;
        r["es"] = row.es;
        if (row.em_at_k.has_value()) {
            r["em_at_k"] = *row.em_at_k;
        }
        rows.push_back(std::move(r));
    }
    doc["rows"] = std::move(rows);
    if (report.aggregates.has_value()) {
        nlohmann::json agg;
        agg["em_percent"] = report.aggregates->em_percent;
        agg["es_percent"] = report.aggregates->es_percent;
        if (report.aggregates->em_at_k_percent.has_value()) {
            agg["em_at_k_percent"] = *report.aggregates->em_at_k_percent;
        } else {
            agg["em_at_k_percent"] = nullptr;
        }
        agg["task_count"] = report.aggregates->task_count;
        doc["aggregates"] = std::move(agg);
    } else {
        doc["aggregates"] = nullptr;
    }
    nlohmann::json cfg;
    cfg["no_dependency_context"] = config.no_dependency_context;
    cfg["no_query_enhancement"] = config.no_query_enhancement;
    cfg["no_trained_retriever"] = config.no_trained_retriever;
    cfg["sampling_k"] = config.sampling_k;
    cfg["temperature"] = config.temperature;
    cfg["top_p"] = config.top_p;
    cfg["seed"] = config.sampling_seed;
    cfg["coarse_k"] = config.coarse_k;
    cfg["dense_k"] = config.dense_k;
    cfg["fine_budget_tokens"] = config.fine_budget_tokens;
    cfg["max_snippet_lines"] = config.corpus.max_snippet_lines;
    doc["config"] = std::move(cfg);
    return doc.dump(2) + "\n";
}

std::vector<BenchmarkTask> tasks_from_jsonl(const std::string& jsonl) {
    std::vector<BenchmarkTask> tasks;
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
                        "task line " + std::to_string(line_no) + " is not a JSON object");
        }
        BenchmarkTask task;
        task.task_id = record.at("task_id").get<std::string>();
        for (const nlohmann::json& f : record.at("files")) {
            SourceFile file;
            file.path = f.at("path").get<std::string>();
            file.lines = split_lines(f.at("content").get<std::string>());
            task.files.push_back(std::move(file));
        }
        task.completion_file = record.at("completion_file").get<std::string>();
        task.unfinished_code = record.at("unfinished_code").get<std::string>();
        task.groundtruth = record.at("groundtruth").get<std::string>();
        if (task.groundtruth.empty()) {
            throw Error(ErrorKind::InvalidInput, "task " + task.task_id + " has empty groundtruth");
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::vector<BenchmarkTask> read_tasks_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open tasks file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return tasks_from_jsonl(buffer.str());
}

std::string tasks_to_jsonl(const std::vector<BenchmarkTask>& tasks) {
    std::string out;
    for (const BenchmarkTask& task : tasks) {
        nlohmann::json record;
        record["task_id"] = task.task_id;
        nlohmann::json files = nlohmann::json::array();
        for (const SourceFile& f : task.files) {
            files.push_back({{"path", f.path}, {"content", join_lines(f.lines)}});
        }
        record["files"] = std::move(files);
        record["completion_file"] = task.completion_file;
        record["unfinished_code"] = task.unfinished_code;
        record["groundtruth"] = task.groundtruth;
        out += record.dump();
        out.push_back('\n');
    }
    return out;
}

void write_tasks_file(const std::string& path, const std::vector<BenchmarkTask>& tasks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open tasks file for writing: " + path);
    }
    out << tasks_to_jsonl(tasks);
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing tasks file: " + path);
    }
}

}  // namespace alignretrieve
