#include "alignretrieve/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

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

std::string strip_comment(const std::string& line) {
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote != 0) {
            if (c == quote) {
                quote = 0;
            }
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

std::string unquote(const std::string& value) {
    if (value.size() >= 2 &&
        ((value.front() == '"' && value.back() == '"') ||
         (value.front() == '\'' && value.back() == '\''))) {
        return value.substr(1, value.size() - 2);
    }
    return value;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> values;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw Error(ErrorKind::InvalidConfig,
                            "config line " + std::to_string(line_no) + ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::InvalidConfig,
                        "config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unquote(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw Error(ErrorKind::InvalidConfig,
                        "config line " + std::to_string(line_no) + ": empty key");
        }
        values[section.empty() ? key : section + "." + key] = value;
    }
    return values;
}

namespace {

class ConfigReader {
public:
    ConfigReader(std::map<std::string, std::string> values, Diagnostics* diags)
        : values_(std::move(values)), diags_(diags) {}

    void read(const std::string& key, std::string& out) {
        auto it = values_.find(key);
        if (it != values_.end()) {
            out = it->second;
            used_.insert(key);
        }
    }

    template <typename T>
    void read_number(const std::string& key, T& out) {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return;
        }
        used_.insert(key);
        std::istringstream in(it->second);
        T parsed{};
        if (!(in >> parsed) || !(in >> std::ws).eof()) {
            throw Error(ErrorKind::InvalidConfig,
                        "config key " + key + " has a non-numeric value: " + it->second);
        }
        out = parsed;
    }

    void read_bool(const std::string& key, bool& out) {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return;
        }
        used_.insert(key);
        if (it->second == "true") {
            out = true;
        } else if (it->second == "false") {
            out = false;
        } else {
            throw Error(ErrorKind::InvalidConfig,
                        "config key " + key + " must be true or false: " + it->second);
        }
    }

    void read_backend_kind(const std::string& key, BackendKind& out) {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return;
        }
        used_.insert(key);
        if (it->second == "mock") {
            out = BackendKind::Mock;
        } else if (it->second == "http") {
            out = BackendKind::Http;
        } else {
            throw Error(ErrorKind::InvalidConfig,
                        "config key " + key + " must be mock or http: " + it->second);
        }
    }

    void read_optimizer(const std::string& key, OptimizerKind& out) {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return;
        }
        used_.insert(key);
        if (it->second == "adam") {
            out = OptimizerKind::Adam;
        } else if (it->second == "sgd") {
            out = OptimizerKind::Sgd;
        } else {
            throw Error(ErrorKind::InvalidConfig,
                        "config key " + key + " must be adam or sgd: " + it->second);
        }
    }

    void warn_unused() {
        for (const auto& [key, value] : values_) {
            if (used_.count(key) == 0) {
                warn(diags_, "unknown config key ignored: " + key);
            }
        }
    }

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
    Diagnostics* diags_;
};

void read_backend(ConfigReader& reader, const std::string& section, BackendConfig& backend) {
    reader.read_backend_kind(section + ".kind", backend.kind);
    reader.read(section + ".base_url", backend.base_url);
    reader.read(section + ".model", backend.model);
    reader.read(section + ".api_key_env", backend.api_key_env);
    reader.read_number(section + ".timeout_seconds", backend.timeout_seconds);
    reader.read_number(section + ".max_retries", backend.max_retries);
    reader.read_number(section + ".max_concurrent", backend.max_concurrent);
}

}  // namespace

AppConfig app_config_from_text(const std::string& text, Diagnostics* diags) {
    AppConfig config;
    ConfigReader reader(parse_config_text(text), diags);

    reader.read("paths.repo", config.repo_path);
    reader.read("paths.corpus", config.corpus_path);
    reader.read("paths.checkpoint", config.checkpoint_path);
    reader.read("paths.tasks", config.tasks_path);

    read_backend(reader, "sampler", config.sampler);
    read_backend(reader, "evaluator", config.evaluator);
    read_backend(reader, "generator", config.generator);

    reader.read_number("sampling.k", config.pipeline.sampling_k);
    reader.read_number("sampling.temperature", config.pipeline.temperature);
    reader.read_number("sampling.top_p", config.pipeline.top_p);
    reader.read_number("sampling.seed", config.pipeline.sampling_seed);
    reader.read_number("sampling.max_new_tokens", config.pipeline.max_new_tokens);
    reader.read_number("sampling.tail_lines", config.pipeline.query_tail_lines);

    reader.read_number("retrieval.max_snippet_lines", config.pipeline.corpus.max_snippet_lines);
    reader.read_number("retrieval.coarse_k", config.pipeline.coarse_k);
    reader.read_number("retrieval.dense_k", config.pipeline.dense_k);
    reader.read_number("retrieval.fine_budget_tokens", config.pipeline.fine_budget_tokens);
    reader.read_number("retrieval.reward_n", config.pipeline.reward_n);
    reader.read_number("retrieval.dim", config.embed_dim);
    reader.read_number("retrieval.buckets", config.embed_buckets);

    reader.read_bool("ablation.no_dependency_context", config.pipeline.no_dependency_context);
    reader.read_bool("ablation.no_query_enhancement", config.pipeline.no_query_enhancement);
    reader.read_bool("ablation.no_trained_retriever", config.pipeline.no_trained_retriever);

    reader.read_number("train.epochs", config.train.epochs);
    reader.read_number("train.samples_per_epoch", config.train.samples_per_epoch);
    reader.read_number("train.learning_rate", config.train.learning_rate);
    reader.read_number("train.snippets_per_sample", config.train.snippets_per_sample);
    reader.read_optimizer("train.optimizer", config.train.optimizer);
    reader.read_number("train.checkpoint_every", config.train.checkpoint_every);
    reader.read_number("train.clip_norm", config.train.clip_norm);

    reader.read_number("seed", config.seed);

    reader.warn_unused();
    validate_app_config(config);
    return config;
}

AppConfig load_app_config(const std::string& path, Diagnostics* diags) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open config file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return app_config_from_text(buffer.str(), diags);
}

void validate_app_config(const AppConfig& config) {
    validate_backend_config(config.sampler);
    validate_backend_config(config.evaluator);
    validate_backend_config(config.generator);
    if (config.pipeline.sampling_k < 1 || config.pipeline.sampling_k > 8) {
        throw Error(ErrorKind::InvalidConfig, "sampling.k must lie in [1, 8]");
    }
    if (config.pipeline.temperature < 0.0) {
        throw Error(ErrorKind::InvalidConfig, "sampling.temperature must be >= 0");
    }
    if (!(config.pipeline.top_p > 0.0 && config.pipeline.top_p <= 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "sampling.top_p must lie in (0, 1]");
    }
    if (config.pipeline.max_new_tokens < 1) {
        throw Error(ErrorKind::InvalidConfig, "sampling.max_new_tokens must be >= 1");
    }
    if (config.pipeline.corpus.max_snippet_lines < 1) {
        throw Error(ErrorKind::InvalidConfig, "retrieval.max_snippet_lines must be >= 1");
    }
    if (config.pipeline.coarse_k < 1 || config.pipeline.dense_k < 1 ||
        config.pipeline.reward_n < 1) {
        throw Error(ErrorKind::InvalidConfig, "retrieval k values must be >= 1");
    }
    if (config.pipeline.fine_budget_tokens < 1) {
        throw Error(ErrorKind::InvalidConfig, "retrieval.fine_budget_tokens must be >= 1");
    }
    if (config.embed_dim < 2 || config.embed_buckets < config.embed_dim) {
        throw Error(ErrorKind::InvalidConfig, "retrieval.dim/buckets out of range");
    }
    if (config.train.epochs < 0) {
        throw Error(ErrorKind::InvalidConfig, "train.epochs must be >= 0");
    }
    if (config.train.samples_per_epoch < 1) {
        throw Error(ErrorKind::InvalidConfig, "train.samples_per_epoch must be >= 1");
    }
    if (config.train.learning_rate < 0.0) {
        throw Error(ErrorKind::InvalidConfig, "train.learning_rate must be >= 0");
    }
    if (config.train.snippets_per_sample < 1) {
        throw Error(ErrorKind::InvalidConfig, "train.snippets_per_sample must be >= 1");
    }
}

}  // namespace alignretrieve
