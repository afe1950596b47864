#include "alignretrieve/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "alignretrieve/rng.hpp"
#include "alignretrieve/tokenize.hpp"

namespace alignretrieve {

OptimizerState make_optimizer_state(OptimizerKind kind, std::size_t param_count) {
    OptimizerState state;
    state.kind = kind;
    if (kind == OptimizerKind::Adam) {
        state.m.assign(param_count, 0.0);
        state.v.assign(param_count, 0.0);
    }
    return state;
}

double gradient_norm(const std::vector<double>& grad) {
    double norm_sq = 0.0;
    for (double g : grad) {
        norm_sq += g * g;
    }
    return std::sqrt(norm_sq);
}

void apply_update(EmbedderParams& params, const std::vector<double>& grad, double learning_rate,
                  double clip_norm, OptimizerState& state) {
    if (grad.size() != params.weights.size()) {
        throw Error(ErrorKind::InvalidParameter, "gradient size must match parameter count");
    }
    const double norm = gradient_norm(grad);
    const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
    if (state.kind == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < grad.size(); ++i) {
            params.weights[i] += learning_rate * scale * grad[i];
        }
        ++state.step;
        return;
    }
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    ++state.step;
    const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double g = scale * grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        const double m_hat = state.m[i] / bias1;
        const double v_hat = state.v[i] / bias2;
        params.weights[i] += learning_rate * m_hat / (std::sqrt(v_hat) + eps);
    }
}

namespace {

struct EmbeddingParts {
    HashedFeatures features;
    std::vector<double> projected;  // W h, pre-normalization
    double norm = 0.0;
    std::vector<double> unit;       // e = W h / norm, empty when degenerate
};

EmbeddingParts embed_parts(const EmbedderParams& params, const std::string& text) {
    EmbeddingParts parts;
    parts.features = hash_features(tokenize(text), params.buckets);
    parts.projected = project(params, parts.features);
    double norm_sq = 0.0;
    for (double v : parts.projected) {
        norm_sq += v * v;
    }
    if (norm_sq < 1e-24) {
        return parts;
    }
    parts.norm = std::sqrt(norm_sq);
    parts.unit = parts.projected;
    for (double& v : parts.unit) {
        v /= parts.norm;
    }
    return parts;
}

// weight * d cos(e_c, e_q) / dW added into grad, using
//   d s/dW = ((e_q - s e_c)/|u|) h_c^T + ((e_c - s e_q)/|v|) h_q^T.
void accumulate_from_parts(const EmbedderParams& params, const EmbeddingParts& c,
                           const EmbeddingParts& q, double weight, std::vector<double>& grad) {
    if (c.unit.empty() || q.unit.empty() || weight == 0.0) {
        return;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < params.dim; ++i) {
        s += c.unit[i] * q.unit[i];
    }
    std::vector<double> dc(params.dim);
    std::vector<double> dq(params.dim);
    for (std::size_t i = 0; i < params.dim; ++i) {
        dc[i] = (q.unit[i] - s * c.unit[i]) / c.norm;
        dq[i] = (c.unit[i] - s * q.unit[i]) / q.norm;
    }
    for (const auto& [bucket, value] : c.features.entries) {
        for (std::size_t row = 0; row < params.dim; ++row) {
            grad[row * params.buckets + bucket] += weight * dc[row] * value;
        }
    }
    for (const auto& [bucket, value] : q.features.entries) {
        for (std::size_t row = 0; row < params.dim; ++row) {
            grad[row * params.buckets + bucket] += weight * dq[row] * value;
        }
    }
}

}  // namespace

std::vector<double> score_gradient_wrt_params(const EmbedderParams& params,
                                              const std::string& snippet_text,
                                              const std::string& query_text) {
    std::vector<double> grad(params.weights.size(), 0.0);
    accumulate_score_gradient(params, snippet_text, query_text, 1.0, grad);
    return grad;
}

void accumulate_score_gradient(const EmbedderParams& params, const std::string& snippet_text,
                               const std::string& query_text, double weight,
                               std::vector<double>& grad) {
    const EmbeddingParts c = embed_parts(params, snippet_text);
    const EmbeddingParts q = embed_parts(params, query_text);
    accumulate_from_parts(params, c, q, weight, grad);
}

std::vector<double> reward_gradient_wrt_params(const EmbedderParams& params,
                                               const std::vector<std::string>& snippet_texts,
                                               const std::string& query_text,
                                               const std::vector<double>& grad_scores) {
    if (snippet_texts.size() != grad_scores.size()) {
        throw Error(ErrorKind::InvalidParameter, "snippet and score-gradient counts differ");
    }
    std::vector<double> grad(params.weights.size(), 0.0);
    const EmbeddingParts q = embed_parts(params, query_text);
    for (std::size_t i = 0; i < snippet_texts.size(); ++i) {
        const EmbeddingParts c = embed_parts(params, snippet_texts[i]);
        accumulate_from_parts(params, c, q, grad_scores[i], grad);
    }
    return grad;
}

StepOutcome train_step(EmbedderParams& params, const RewardSample& sample, Backend& backend,
                       OptimizerState& state, const TrainConfig& config, Diagnostics* diags) {
    const std::optional<RewardBreakdown> breakdown =
        evaluate_sample(backend, params, sample, diags);
    if (!breakdown.has_value()) {
        return {};
    }
    std::vector<std::string> texts;
    texts.reserve(sample.snippets.size());
    for (const Snippet& snippet : sample.snippets) {
        texts.push_back(snippet.text);
    }
    const std::vector<double> grad = reward_gradient_wrt_params(
        params, texts, sample.query.rendered, breakdown->grad_scores);
    StepOutcome outcome;
    outcome.applied = true;
    outcome.reward = breakdown->reward;
    outcome.gradient_norm = gradient_norm(grad);
    const std::size_t top = static_cast<std::size_t>(
        std::max_element(breakdown->scores.begin(), breakdown->scores.end()) -
        breakdown->scores.begin());
    outcome.mp_ranked_first = top == breakdown->mp_index;
    apply_update(params, grad, config.learning_rate, config.clip_norm, state);
    return outcome;
}

std::string metrics_to_csv(const std::vector<TrainMetrics>& metrics) {
    std::string out = "epoch,mean_reward,recall_at_1,gradient_norm\n";
    char row[160];
    for (const TrainMetrics& m : metrics) {
        std::snprintf(row, sizeof(row), "%d,%.9g,%.9g,%.9g\n", m.epoch, m.mean_reward,
                      m.recall_at_1, m.gradient_norm);
        out += row;
    }
    return out;
}

namespace {

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

// Evaluation-only pass: mean reward and recall under the current parameters.
TrainMetrics eval_epoch(int epoch, const TrainConfig& config,
                        const std::vector<RewardSample>& dataset, Backend& backend,
                        const EmbedderParams& params, Diagnostics* diags) {
    TrainMetrics row;
    row.epoch = epoch;
    std::size_t counted = 0;
    const std::size_t limit = std::min(dataset.size(), config.samples_per_epoch);
    for (std::size_t i = 0; i < limit; ++i) {
        const std::optional<RewardBreakdown> breakdown =
            evaluate_sample(backend, params, dataset[i], diags);
        if (!breakdown.has_value()) {
            continue;
        }
        ++counted;
        row.mean_reward += breakdown->reward;
        const std::size_t top = static_cast<std::size_t>(
            std::max_element(breakdown->scores.begin(), breakdown->scores.end()) -
            breakdown->scores.begin());
        if (top == breakdown->mp_index) {
            row.recall_at_1 += 1.0;
        }
    }
    if (counted > 0) {
        row.mean_reward /= static_cast<double>(counted);
        row.recall_at_1 /= static_cast<double>(counted);
    }
    return row;
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<RewardSample>& dataset,
                  Backend& backend, EmbedderParams& params, const std::string& checkpoint_path,
                  const std::string& metrics_path, Diagnostics* diags) {
    if (dataset.empty()) {
        throw Error(ErrorKind::InvalidConfig, "training dataset is empty");
    }
    TrainResult result;
    result.checkpoint_path = checkpoint_path;
    result.metrics_path = metrics_path;
    OptimizerState state = make_optimizer_state(config.optimizer, params.weights.size());

    result.metrics.push_back(eval_epoch(0, config, dataset, backend, params, diags));

    const std::uint64_t shuffle_seed = seed_stream(config.seed, "trainer.shuffle");
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::vector<std::size_t> order(dataset.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(shuffle_seed + static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        const std::size_t limit = std::min(order.size(), config.samples_per_epoch);

        TrainMetrics row;
        row.epoch = epoch;
        std::size_t counted = 0;
        for (std::size_t i = 0; i < limit; ++i) {
            const StepOutcome outcome =
                train_step(params, dataset[order[i]], backend, state, config, diags);
            if (!outcome.applied) {
                continue;
            }
            ++counted;
            row.mean_reward += outcome.reward;
            row.gradient_norm += outcome.gradient_norm;
            if (outcome.mp_ranked_first) {
                row.recall_at_1 += 1.0;
            }
        }
        if (counted > 0) {
            row.mean_reward /= static_cast<double>(counted);
            row.recall_at_1 /= static_cast<double>(counted);
            row.gradient_norm /= static_cast<double>(counted);
        }
        result.metrics.push_back(row);

        if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 &&
            epoch != config.epochs) {
            save_checkpoint(checkpoint_path + ".epoch" + std::to_string(epoch), params);
        }
    }

    save_checkpoint(checkpoint_path, params);
    write_text_file(metrics_path, metrics_to_csv(result.metrics));
    return result;
}

}  // namespace alignretrieve
