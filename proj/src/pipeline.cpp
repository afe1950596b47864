#include "alignretrieve/pipeline.hpp"

#include <algorithm>
#include <map>

#include "alignretrieve/prompt_format.hpp"
#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {

namespace {

std::vector<SourceFile> assemble_repo(const std::vector<SourceFile>& cross_files,
                                      const std::string& completion_path,
                                      const std::string& unfinished_code) {
    std::vector<SourceFile> repo;
    repo.reserve(cross_files.size() + 1);
    for (const SourceFile& file : cross_files) {
        if (file.path != completion_path) {
            repo.push_back(file);
        }
    }
    SourceFile completion;
    completion.path = completion_path;
    completion.lines = split_lines(unfinished_code);
    repo.push_back(std::move(completion));
    return repo;
}

std::vector<Snippet> build_pipeline_codebase(const std::vector<SourceFile>& repo,
                                             const std::string& completion_path,
                                             const PipelineConfig& config, Diagnostics* diags) {
    std::vector<Snippet> snippets = build_codebase(repo, completion_path, config.corpus, diags);
    if (config.no_dependency_context) {
        snippets.erase(std::remove_if(snippets.begin(), snippets.end(),
                                      [](const Snippet& s) {
                                          return s.kind == SnippetKind::Dependency;
                                      }),
                       snippets.end());
    }
    return snippets;
}

std::vector<Snippet> resolve_results(const RetrievalIndex& index,
                                     const std::vector<RankedResult>& results) {
    std::map<std::string, const Snippet*> by_id;
    for (const Snippet& snippet : index.snippets()) {
        by_id[snippet.id] = &snippet;
    }
    std::vector<Snippet> out;
    out.reserve(results.size());
    for (const RankedResult& result : results) {
        out.push_back(*by_id.at(result.snippet_id));
    }
    return out;
}

std::vector<CandidateCompletion> pipeline_candidates(const RetrievalIndex& index,
                                                     const std::vector<RankedResult>& coarse,
                                                     const std::string& unfinished_code,
                                                     const PipelineConfig& config,
                                                     Backend& sampler) {
    const std::vector<Snippet> coarse_snippets = resolve_results(index, coarse);
    const CompletionPrompt prompt =
        build_prompt(coarse_snippets, unfinished_code, config.fine_budget_tokens);
    return sample_candidates(sampler, prompt.rendered, config.sampling_k, config.temperature,
                             config.top_p, config.sampling_seed, config.max_new_tokens);
}

}  // namespace

CompletionOutcome run_completion(const std::vector<SourceFile>& cross_files,
                                 const std::string& completion_path,
                                 const std::string& unfinished_code,
                                 const PipelineConfig& config, Backend& sampler,
                                 Backend& generator, const EmbedderParams& params,
                                 Diagnostics* diags) {
    const std::vector<SourceFile> repo =
        assemble_repo(cross_files, completion_path, unfinished_code);
    RetrievalIndex index(build_pipeline_codebase(repo, completion_path, config, diags));

    CompletionOutcome outcome;
    const std::string coarse_query =
        build_enhanced_query(unfinished_code, {}, config.query_tail_lines).rendered;
    outcome.coarse_results = index.bm25_retrieve(coarse_query, config.coarse_k);

    if (!config.no_query_enhancement) {
        outcome.candidates = pipeline_candidates(index, outcome.coarse_results, unfinished_code,
                                                 config, sampler);
    }
    const EnhancedQuery enhanced =
        build_enhanced_query(unfinished_code, outcome.candidates, config.query_tail_lines);

    index.compute_embeddings(params);
    outcome.dense_results = index.dense_retrieve(params, enhanced.rendered, config.dense_k);

    const CompletionPrompt generation_prompt = build_prompt(
        resolve_results(index, outcome.dense_results), unfinished_code,
        config.fine_budget_tokens);
    const std::vector<std::string> outputs =
        generator.complete(generation_prompt.rendered, 1, 0.0, 1.0, 0, config.max_new_tokens);
    outcome.raw_prediction = outputs.empty() ? "" : outputs.front();
    const std::vector<std::string> lines = split_lines(outcome.raw_prediction);
    outcome.prediction = lines.empty() ? "" : lines.front();
    return outcome;
}

std::optional<RewardSample> prepare_reward_sample(const TrainingSample& training_sample,
                                                  const PipelineConfig& config, Backend& sampler,
                                                  Diagnostics* diags) {
    const std::vector<SourceFile> repo =
        assemble_repo(training_sample.cross_files, training_sample.completion_file,
                      training_sample.unfinished_code);
    RetrievalIndex index(
        build_pipeline_codebase(repo, training_sample.completion_file, config, diags));

    const std::string coarse_query =
        build_enhanced_query(training_sample.unfinished_code, {}, config.query_tail_lines)
            .rendered;
    const std::vector<RankedResult> coarse = index.bm25_retrieve(coarse_query, config.coarse_k);

    std::vector<CandidateCompletion> candidates;
    if (!config.no_query_enhancement) {
        candidates = pipeline_candidates(index, coarse, training_sample.unfinished_code, config,
                                         sampler);
    }
    const EnhancedQuery enhanced = build_enhanced_query(
        training_sample.unfinished_code, candidates, config.query_tail_lines);

    const std::vector<RankedResult> pool =
        index.bm25_retrieve(enhanced.rendered, config.reward_n);
    if (pool.empty()) {
        warn(diags, "no reward candidates for " + training_sample.repo_id + "/" +
                        training_sample.completion_file);
        return std::nullopt;
    }
    RewardSample sample;
    sample.query = enhanced;
    sample.snippets = resolve_results(index, pool);
    sample.target = training_sample.target;
    return sample;
}

}  // namespace alignretrieve
