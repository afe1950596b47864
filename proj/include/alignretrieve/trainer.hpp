#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/error.hpp"
#include "alignretrieve/retrieval.hpp"
#include "alignretrieve/reward.hpp"

namespace alignretrieve {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
    int epochs = 20;
    std::size_t samples_per_epoch = 200;
    double learning_rate = 5e-5;
    std::size_t snippets_per_sample = 10;
    int sampling_k = 4;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    int checkpoint_every = 5;
    double clip_norm = 1.0;
};

struct TrainMetrics {
    int epoch = 0;
    double mean_reward = 0.0;
    double recall_at_1 = 0.0;
    double gradient_norm = 0.0;
};

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    std::uint64_t step = 0;
    std::vector<double> m;  // Adam first moment
    std::vector<double> v;  // Adam second moment
};

OptimizerState make_optimizer_state(OptimizerKind kind, std::size_t param_count);

// Ascent step on the reward: clips the gradient to clip_norm, then applies
// SGD or Adam (beta1 0.9, beta2 0.999, eps 1e-8).
void apply_update(EmbedderParams& params, const std::vector<double>& grad, double learning_rate,
                  double clip_norm, OptimizerState& state);

double gradient_norm(const std::vector<double>& grad);

// d cosine(embed(snippet), embed(query)) / dW, dense dim x buckets, for tests
// and finite-difference checks. Degenerate embeddings yield a zero gradient.
std::vector<double> score_gradient_wrt_params(const EmbedderParams& params,
                                              const std::string& snippet_text,
                                              const std::string& query_text);

// Accumulates weight * d cosine/dW into grad without materializing the dense
// per-score gradient.
void accumulate_score_gradient(const EmbedderParams& params, const std::string& snippet_text,
                               const std::string& query_text, double weight,
                               std::vector<double>& grad);

// Full d reward / dW for one sample given the per-score reward gradient.
std::vector<double> reward_gradient_wrt_params(const EmbedderParams& params,
                                               const std::vector<std::string>& snippet_texts,
                                               const std::string& query_text,
                                               const std::vector<double>& grad_scores);

struct StepOutcome {
    bool applied = false;  // false when the sample was skipped
    double reward = 0.0;
    bool mp_ranked_first = false;
    double gradient_norm = 0.0;
};

StepOutcome train_step(EmbedderParams& params, const RewardSample& sample, Backend& backend,
                       OptimizerState& state, const TrainConfig& config, Diagnostics* diags);

struct TrainResult {
    std::string checkpoint_path;
    std::string metrics_path;
    std::vector<TrainMetrics> metrics;
};

std::string metrics_to_csv(const std::vector<TrainMetrics>& metrics);

// Epoch 0 is a pure evaluation pass; epochs 1..N update the parameters.
// Checkpoints are written every checkpoint_every epochs and at the end.
TrainResult train(const TrainConfig& config, const std::vector<RewardSample>& dataset,
                  Backend& backend, EmbedderParams& params, const std::string& checkpoint_path,
                  const std::string& metrics_path, Diagnostics* diags);

}  // namespace alignretrieve
