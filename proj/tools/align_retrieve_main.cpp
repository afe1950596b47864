#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/config.hpp"
#include "alignretrieve/corpus.hpp"
#include "alignretrieve/eval.hpp"
#include "alignretrieve/pipeline.hpp"
#include "alignretrieve/query_enhancement.hpp"
#include "alignretrieve/retrieval.hpp"
#include "alignretrieve/rng.hpp"
#include "alignretrieve/tokenize.hpp"
#include "alignretrieve/trainer.hpp"
#include "alignretrieve/training_data.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using namespace alignretrieve;

namespace {

struct CliOverrides {
    std::optional<std::string> repo, corpus, checkpoint, tasks;
    std::optional<int> sampling_k;
    std::optional<double> temperature, top_p;
    std::optional<std::uint64_t> sampling_seed, seed;
    std::optional<int> max_new_tokens;
    std::optional<std::size_t> tail_lines;
    std::optional<std::size_t> max_snippet_lines, coarse_k, dense_k, fine_budget, reward_n;
    std::optional<std::size_t> dim, buckets;
    bool no_dependency_context = false;
    bool no_query_enhancement = false;
    bool no_trained_retriever = false;
    std::optional<std::string> sampler_kind, generator_kind, evaluator_kind;
    std::optional<std::string> sampler_url, generator_url, evaluator_url;
    std::optional<std::string> sampler_model, generator_model, evaluator_model;
    std::optional<int> epochs;
    std::optional<std::size_t> samples_per_epoch;
    std::optional<double> learning_rate, clip_norm;
    std::optional<std::string> optimizer;
    std::optional<int> checkpoint_every;
};

void add_pipeline_options(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("--k", o.sampling_k, "candidate completions per sampling call");
    cmd->add_option("--temperature", o.temperature, "sampler temperature");
    cmd->add_option("--top-p", o.top_p, "sampler nucleus threshold");
    cmd->add_option("--sampling-seed", o.sampling_seed, "sampler seed");
    cmd->add_option("--max-new-tokens", o.max_new_tokens, "completion length cap");
    cmd->add_option("--tail-lines", o.tail_lines, "unfinished-code lines kept in the query");
    cmd->add_option("--max-snippet-lines", o.max_snippet_lines, "aggregation line limit");
    cmd->add_option("--coarse-k", o.coarse_k, "sparse retrieval depth");
    cmd->add_option("--dense-k", o.dense_k, "dense retrieval depth");
    cmd->add_option("--fine-budget-tokens", o.fine_budget, "prompt token budget");
    cmd->add_option("--reward-n", o.reward_n, "snippets per reward sample");
    cmd->add_option("--dim", o.dim, "embedding dimension");
    cmd->add_option("--buckets", o.buckets, "feature hash buckets");
    cmd->add_flag("--no-dependency-context", o.no_dependency_context,
                  "drop dependency snippets from the codebase");
    cmd->add_flag("--no-query-enhancement", o.no_query_enhancement,
                  "retrieve with the raw unfinished-code query");
    cmd->add_flag("--no-trained-retriever", o.no_trained_retriever,
                  "use a fresh random-init embedder");
    cmd->add_option("--seed", o.seed, "master seed");
}

void add_backend_options(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("--sampler-backend", o.sampler_kind, "mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--generator-backend", o.generator_kind, "mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--evaluator-backend", o.evaluator_kind, "mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--sampler-url", o.sampler_url, "sampler base URL");
    cmd->add_option("--generator-url", o.generator_url, "generator base URL");
    cmd->add_option("--evaluator-url", o.evaluator_url, "evaluator base URL");
    cmd->add_option("--sampler-model", o.sampler_model, "sampler model name");
    cmd->add_option("--generator-model", o.generator_model, "generator model name");
    cmd->add_option("--evaluator-model", o.evaluator_model, "evaluator model name");
}

void add_train_options(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--samples-per-epoch", o.samples_per_epoch, "samples per epoch");
    cmd->add_option("--learning-rate", o.learning_rate, "learning rate");
    cmd->add_option("--optimizer", o.optimizer, "adam or sgd")
        ->check(CLI::IsMember({"adam", "sgd"}));
    cmd->add_option("--checkpoint-every", o.checkpoint_every, "checkpoint period in epochs");
    cmd->add_option("--clip-norm", o.clip_norm, "gradient clip norm");
}

BackendKind parse_kind(const std::string& name) {
    return name == "http" ? BackendKind::Http : BackendKind::Mock;
}

AppConfig resolve_config(const std::string& config_path, const CliOverrides& o,
                         Diagnostics* diags) {
    AppConfig cfg;
    if (!config_path.empty()) {
        cfg = load_app_config(config_path, diags);
    }
    if (o.repo) cfg.repo_path = *o.repo;
    if (o.corpus) cfg.corpus_path = *o.corpus;
    if (o.checkpoint) cfg.checkpoint_path = *o.checkpoint;
    if (o.tasks) cfg.tasks_path = *o.tasks;
    if (o.sampling_k) cfg.pipeline.sampling_k = *o.sampling_k;
    if (o.temperature) cfg.pipeline.temperature = *o.temperature;
    if (o.top_p) cfg.pipeline.top_p = *o.top_p;
    if (o.sampling_seed) cfg.pipeline.sampling_seed = *o.sampling_seed;
    if (o.max_new_tokens) cfg.pipeline.max_new_tokens = *o.max_new_tokens;
    if (o.tail_lines) cfg.pipeline.query_tail_lines = *o.tail_lines;
    if (o.max_snippet_lines) cfg.pipeline.corpus.max_snippet_lines = *o.max_snippet_lines;
    if (o.coarse_k) cfg.pipeline.coarse_k = *o.coarse_k;
    if (o.dense_k) cfg.pipeline.dense_k = *o.dense_k;
    if (o.fine_budget) cfg.pipeline.fine_budget_tokens = *o.fine_budget;
    if (o.reward_n) cfg.pipeline.reward_n = *o.reward_n;
    if (o.dim) cfg.embed_dim = *o.dim;
    if (o.buckets) cfg.embed_buckets = *o.buckets;
    if (o.no_dependency_context) cfg.pipeline.no_dependency_context = true;
    if (o.no_query_enhancement) cfg.pipeline.no_query_enhancement = true;
    if (o.no_trained_retriever) cfg.pipeline.no_trained_retriever = true;
    if (o.sampler_kind) cfg.sampler.kind = parse_kind(*o.sampler_kind);
    if (o.generator_kind) cfg.generator.kind = parse_kind(*o.generator_kind);
    if (o.evaluator_kind) cfg.evaluator.kind = parse_kind(*o.evaluator_kind);
    if (o.sampler_url) cfg.sampler.base_url = *o.sampler_url;
    if (o.generator_url) cfg.generator.base_url = *o.generator_url;
    if (o.evaluator_url) cfg.evaluator.base_url = *o.evaluator_url;
    if (o.sampler_model) cfg.sampler.model = *o.sampler_model;
    if (o.generator_model) cfg.generator.model = *o.generator_model;
    if (o.evaluator_model) cfg.evaluator.model = *o.evaluator_model;
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.samples_per_epoch) cfg.train.samples_per_epoch = *o.samples_per_epoch;
    if (o.learning_rate) cfg.train.learning_rate = *o.learning_rate;
    if (o.optimizer) {
        cfg.train.optimizer = *o.optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
    }
    if (o.checkpoint_every) cfg.train.checkpoint_every = *o.checkpoint_every;
    if (o.clip_norm) cfg.train.clip_norm = *o.clip_norm;
    if (o.seed) cfg.seed = *o.seed;
    cfg.train.seed = cfg.seed;
    cfg.train.sampling_k = cfg.pipeline.sampling_k;
    cfg.train.snippets_per_sample = cfg.pipeline.reward_n;
    validate_app_config(cfg);
    return cfg;
}

std::vector<SourceFile> read_repo_files(const std::string& root) {
    if (!fs::is_directory(root)) {
        throw Error(ErrorKind::Io, "repository path is not a directory: " + root);
    }
    std::vector<SourceFile> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const std::string rel = fs::relative(entry.path(), root).generic_string();
        if (language_of(rel).empty() || rel.front() == '.') {
            continue;
        }
        std::ifstream in(entry.path(), std::ios::binary);
        if (!in) {
            throw Error(ErrorKind::Io, "cannot read file: " + entry.path().string());
        }
        std::ostringstream buffer;
        buffer << in.rdbuf();
        files.push_back({rel, split_lines(buffer.str())});
    }
    std::sort(files.begin(), files.end(),
              [](const SourceFile& a, const SourceFile& b) { return a.path < b.path; });
    return files;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open file for writing: " + path);
    }
    out << text;
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing file: " + path);
    }
}

EmbedderParams load_or_init_params(const AppConfig& cfg) {
    if (!cfg.pipeline.no_trained_retriever && !cfg.checkpoint_path.empty()) {
        return load_checkpoint(cfg.checkpoint_path);
    }
    return init_params(cfg.embed_dim, cfg.embed_buckets, seed_stream(cfg.seed, "init"));
}

void flush_diags(const Diagnostics& diags) {
    for (const std::string& d : diags) {
        std::cerr << "warning: " << d << "\n";
    }
}

int run_index(const AppConfig& cfg, const std::string& completion_file,
              const std::string& out_path) {
    Diagnostics diags;
    const std::vector<SourceFile> repo = read_repo_files(cfg.repo_path);
    std::vector<Snippet> snippets;
    if (completion_file.empty()) {
        snippets = build_base_corpus(repo, cfg.pipeline.corpus);
    } else {
        snippets = build_codebase(repo, completion_file, cfg.pipeline.corpus, &diags);
    }
    write_corpus_file(out_path, snippets);
    std::size_t base = 0;
    std::size_t dependency = 0;
    for (const Snippet& s : snippets) {
        (s.kind == SnippetKind::Base ? base : dependency) += 1;
    }
    flush_diags(diags);
    std::cout << "base snippets: " << base << "\n"
              << "dependency snippets: " << dependency << "\n"
              << "wrote " << out_path << "\n";
    return 0;
}

int run_complete(const AppConfig& cfg, const std::string& completion_file) {
    Diagnostics diags;
    std::vector<SourceFile> repo = read_repo_files(cfg.repo_path);
    const auto it = std::find_if(repo.begin(), repo.end(), [&](const SourceFile& f) {
        return f.path == completion_file;
    });
    if (it == repo.end()) {
        throw Error(ErrorKind::InvalidInput,
                    "completion file not found in repository: " + completion_file);
    }
    const std::string unfinished_code = join_lines(it->lines);
    std::vector<SourceFile> cross_files;
    for (const SourceFile& f : repo) {
        if (f.path != completion_file) {
            cross_files.push_back(f);
        }
    }
    const EmbedderParams params = load_or_init_params(cfg);
    std::unique_ptr<Backend> sampler = make_backend(cfg.sampler);
    std::unique_ptr<Backend> generator = make_backend(cfg.generator);
    const CompletionOutcome outcome =
        run_completion(cross_files, completion_file, unfinished_code, cfg.pipeline, *sampler,
                       *generator, params, &diags);
    flush_diags(diags);
    std::cout << outcome.prediction << "\n";
    return 0;
}

int run_train(const AppConfig& cfg, const std::string& dataset_path,
              const std::string& checkpoint_out, const std::string& metrics_out) {
    Diagnostics diags;
    const std::vector<TrainingSample> dataset = read_training_file(dataset_path);
    std::unique_ptr<Backend> sampler = make_backend(cfg.sampler);
    std::unique_ptr<Backend> evaluator = make_backend(cfg.evaluator);
    std::vector<RewardSample> samples;
    for (const TrainingSample& ts : dataset) {
        if (auto sample = prepare_reward_sample(ts, cfg.pipeline, *sampler, &diags)) {
            samples.push_back(std::move(*sample));
        }
    }
    if (samples.empty()) {
        throw Error(ErrorKind::InvalidConfig, "no usable training samples in " + dataset_path);
    }
    EmbedderParams params =
        init_params(cfg.embed_dim, cfg.embed_buckets, seed_stream(cfg.seed, "init"));
    const TrainResult result =
        train(cfg.train, samples, *evaluator, params, checkpoint_out, metrics_out, &diags);
    flush_diags(diags);
    const TrainMetrics& last = result.metrics.back();
    std::cout << "epochs: " << cfg.train.epochs << "\n"
              << "final mean_reward: " << last.mean_reward << "\n"
              << "final recall_at_1: " << last.recall_at_1 << "\n"
              << "checkpoint: " << result.checkpoint_path << "\n"
              << "metrics: " << result.metrics_path << "\n";
    return 0;
}

int run_eval(const AppConfig& cfg, const std::string& tasks_path, const std::string& report_path,
             bool sweep_k) {
    Diagnostics diags;
    const std::vector<BenchmarkTask> tasks = read_tasks_file(tasks_path);
    const EmbedderParams params = load_or_init_params(cfg);
    std::unique_ptr<Backend> sampler = make_backend(cfg.sampler);
    std::unique_ptr<Backend> generator = make_backend(cfg.generator);
    if (!sweep_k) {
        const EvalReport report =
            run_benchmark(tasks, cfg.pipeline, *sampler, *generator, params, &diags);
        write_text_file(report_path, report_to_json(report, cfg.pipeline));
        flush_diags(diags);
        if (report.aggregates.has_value()) {
            std::printf("tasks: %zu  EM: %.4f  ES: %.4f\n", report.aggregates->task_count,
                        report.aggregates->em_percent, report.aggregates->es_percent);
        } else {
            std::cout << "tasks: 0\n";
        }
        std::cout << "wrote " << report_path << "\n";
        return 0;
    }
    nlohmann::json sweep = nlohmann::json::array();
    for (int k = 1; k <= 6; ++k) {
        PipelineConfig pipeline = cfg.pipeline;
        pipeline.sampling_k = k;
        const EvalReport report = run_benchmark(tasks, pipeline, *sampler, *generator, params,
                                                &diags);
        nlohmann::json row;
        row["k"] = k;
        if (report.aggregates.has_value()) {
            row["em_percent"] = report.aggregates->em_percent;
            row["es_percent"] = report.aggregates->es_percent;
            if (report.aggregates->em_at_k_percent.has_value()) {
                row["em_at_k_percent"] = *report.aggregates->em_at_k_percent;
            } else {
                row["em_at_k_percent"] = nullptr;
            }
            std::printf("k=%d  EM: %.4f  ES: %.4f\n", k, report.aggregates->em_percent,
                        report.aggregates->es_percent);
        } else {
            row["em_percent"] = nullptr;
            row["es_percent"] = nullptr;
            row["em_at_k_percent"] = nullptr;
        }
        sweep.push_back(std::move(row));
    }
    nlohmann::json doc;
    doc["sweep"] = std::move(sweep);
    write_text_file(report_path, doc.dump(2) + "\n");
    flush_diags(diags);
    std::cout << "wrote " << report_path << "\n";
    return 0;
}

int run_theory(double p_s, double rho, double alpha, double beta, double gamma, int n_max) {
    SamplingTheoryParams params;
    params.p_s = p_s;
    params.rho = rho;
    params.alpha = alpha;
    params.beta = beta;
    params.gamma = gamma;
    validate_theory_params(params);
    if (n_max < 1) {
        throw Error(ErrorKind::InvalidParameter, "n_max must be >= 1");
    }
    std::printf("%4s  %14s  %16s  %12s\n", "n", "p_at_least_one", "cumulative_error", "utility");
    for (int n = 1; n <= n_max; ++n) {
        std::printf("%4d  %14.6f  %16.6f  %12.6f\n", n, p_at_least_one(params, n),
                    cumulative_error(params, n), utility(params, n));
    }
    try {
        const double n_star = optimal_n(params);
        std::printf("n* = %.6f\n", n_star);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoInteriorOptimum) {
            throw;
        }
        std::printf("n* = none (%s)\n", e.what());
    }
    return 0;
}

int run_dataset_build(const AppConfig& cfg, const std::string& out_path, std::size_t samples,
                      const std::string& exclude_path) {
    Diagnostics diags;
    const std::vector<SourceFile> repo = read_repo_files(cfg.repo_path);
    std::set<std::string> holdout;
    if (!exclude_path.empty()) {
        std::istringstream in(read_text_file(exclude_path));
        std::string line;
        while (std::getline(in, line)) {
            if (!is_blank(line)) {
                holdout.insert(line);
            }
        }
    }
    const std::string repo_id = fs::path(cfg.repo_path).filename().generic_string();
    const std::vector<TrainingSample> dataset = build_training_samples(
        repo_id, repo, samples, cfg.seed, holdout, TargetSpanConfig{}, &diags);
    write_training_file(out_path, dataset);
    flush_diags(diags);
    std::cout << "samples: " << dataset.size() << "\n"
              << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"repository-level code completion with aligned retrieval"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "TOML-style config file");

    CliOverrides o;

    auto* index_cmd = app.add_subcommand("index", "build and write the snippet corpus");
    std::string index_out;
    std::string index_completion;
    index_cmd->add_option("--repo", o.repo, "repository root")->required();
    index_cmd->add_option("--out", index_out, "corpus JSONL output path")->required();
    index_cmd->add_option("--completion-file", index_completion,
                          "completion file whose imports yield dependency snippets");
    index_cmd->add_option("--max-snippet-lines", o.max_snippet_lines, "aggregation line limit");

    auto* complete_cmd = app.add_subcommand("complete", "run one completion through the pipeline");
    std::string complete_file;
    complete_cmd->add_option("--repo", o.repo, "repository root")->required();
    complete_cmd->add_option("--file", complete_file, "unfinished file, repo-relative")
        ->required();
    complete_cmd->add_option("--checkpoint", o.checkpoint, "trained embedder checkpoint");
    add_pipeline_options(complete_cmd, o);
    add_backend_options(complete_cmd, o);

    auto* train_cmd = app.add_subcommand("train", "train the dense retriever on reward samples");
    std::string train_dataset;
    std::string train_checkpoint = "checkpoint.json";
    std::string train_metrics = "metrics.csv";
    train_cmd->add_option("--dataset", train_dataset, "training-set JSONL")->required();
    train_cmd->add_option("--checkpoint-out", train_checkpoint, "checkpoint output path");
    train_cmd->add_option("--metrics", train_metrics, "metrics CSV output path");
    add_train_options(train_cmd, o);
    add_pipeline_options(train_cmd, o);
    add_backend_options(train_cmd, o);

    auto* eval_cmd = app.add_subcommand("eval", "run the benchmark harness");
    std::string eval_tasks;
    std::string eval_report = "report.json";
    bool sweep_k = false;
    eval_cmd->add_option("--tasks", eval_tasks, "task JSONL")->required();
    eval_cmd->add_option("--report", eval_report, "report JSON output path");
    eval_cmd->add_flag("--sweep-k", sweep_k, "evaluate sampling numbers 1..6");
    eval_cmd->add_option("--checkpoint", o.checkpoint, "trained embedder checkpoint");
    add_pipeline_options(eval_cmd, o);
    add_backend_options(eval_cmd, o);

    auto* theory_cmd = app.add_subcommand("theory", "sampling-theory table");
    double p_s = 0.5;
    double rho = 0.0;
    double alpha = 1.0;
    double beta = 0.05;
    double gamma = 0.05;
    int n_max = 8;
    theory_cmd->add_option("--p-s", p_s, "single-sample success probability");
    theory_cmd->add_option("--rho", rho, "inter-sample correlation");
    theory_cmd->add_option("--alpha", alpha, "benefit weight");
    theory_cmd->add_option("--beta", beta, "error-cost weight");
    theory_cmd->add_option("--gamma", gamma, "compute-cost weight");
    theory_cmd->add_option("--n-max", n_max, "table rows");

    auto* dataset_cmd = app.add_subcommand("dataset-build", "construct training samples");
    std::string dataset_out;
    std::size_t dataset_samples = 10;
    std::string dataset_exclude;
    dataset_cmd->add_option("--repo", o.repo, "repository root")->required();
    dataset_cmd->add_option("--out", dataset_out, "training-set JSONL output")->required();
    dataset_cmd->add_option("--samples", dataset_samples, "samples to draw");
    dataset_cmd->add_option("--seed", o.seed, "master seed");
    dataset_cmd->add_option("--exclude", dataset_exclude, "holdout manifest, one repo id per line");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        Diagnostics config_diags;
        if (theory_cmd->parsed()) {
            return run_theory(p_s, rho, alpha, beta, gamma, n_max);
        }
        const AppConfig cfg = resolve_config(config_path, o, &config_diags);
        flush_diags(config_diags);
        if (index_cmd->parsed()) {
            return run_index(cfg, index_completion, index_out);
        }
        if (complete_cmd->parsed()) {
            return run_complete(cfg, complete_file);
        }
        if (train_cmd->parsed()) {
            return run_train(cfg, train_dataset, train_checkpoint, train_metrics);
        }
        if (eval_cmd->parsed()) {
            return run_eval(cfg, eval_tasks, eval_report, sweep_k);
        }
        if (dataset_cmd->parsed()) {
            return run_dataset_build(cfg, dataset_out, dataset_samples, dataset_exclude);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::InvalidParameter:
            case ErrorKind::InvalidConfig:
            case ErrorKind::InvalidInput:
                return 1;
            default:
                return 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
