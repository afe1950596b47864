#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "alignretrieve/error.hpp"

namespace alignretrieve {

enum class BackendKind { Http, Mock };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string base_url;
    std::string model;
    std::string api_key_env = "ALIGN_RETRIEVE_API_KEY";
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int max_concurrent = 4;
};

void validate_backend_config(const BackendConfig& config);

struct TokenLogprobs {
    std::vector<std::string> tokens;
    std::vector<double> logprobs;  // natural log, each <= 0
};

double perplexity(const TokenLogprobs& scored);

class Backend {
public:
    virtual ~Backend() = default;

    // k sampled completions for the prompt. Deterministic for the mock kind.
    virtual std::vector<std::string> complete(const std::string& prompt, int k,
                                              double temperature, double top_p,
                                              std::uint64_t seed, int max_new_tokens) = 0;

    // Token-level logprobs of `continuation` given `context`.
    virtual TokenLogprobs score_continuation(const std::string& context,
                                             const std::string& continuation) = 0;
};

// Deterministic stand-in for the sampler/evaluator/generator LLMs.
//
// complete(): the j-th sample is the context-snippet line with the
// (j+seed)-th highest Jaccard token overlap against the last non-empty
// prompt line; ties resolve in corpus (appearance) order, ranks wrap
// around modulo the line count.
//
// score_continuation(): one pseudo-token per whitespace word, each with
// logprob overlap(context snippet section, continuation) - 1, so the
// perplexity is exp(1 - overlap) in [1, e].
class MockBackend : public Backend {
public:
    std::vector<std::string> complete(const std::string& prompt, int k, double temperature,
                                      double top_p, std::uint64_t seed,
                                      int max_new_tokens) override;
    TokenLogprobs score_continuation(const std::string& context,
                                     const std::string& continuation) override;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Injectable wire layer so tests can fake the server.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& base_url, const std::string& path,
                              const std::string& body,
                              const std::map<std::string, std::string>& headers,
                              double timeout_seconds) = 0;
};

std::unique_ptr<Transport> make_httplib_transport();

// OpenAI-compatible /v1/completions client with retries, an API key taken
// from the configured environment variable, and a concurrent-request bound.
class HttpBackend : public Backend {
public:
    HttpBackend(BackendConfig config, std::unique_ptr<Transport> transport);
    ~HttpBackend() override;

    std::vector<std::string> complete(const std::string& prompt, int k, double temperature,
                                      double top_p, std::uint64_t seed,
                                      int max_new_tokens) override;
    TokenLogprobs score_continuation(const std::string& context,
                                     const std::string& continuation) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);
std::unique_ptr<Backend> make_backend(const BackendConfig& config,
                                      std::unique_ptr<Transport> transport);

}  // namespace alignretrieve
