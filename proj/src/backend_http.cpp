#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "alignretrieve/backend.hpp"

namespace alignretrieve {

namespace {

// Runtime-bounded counting semaphore guarding the concurrent-request limit.
class RequestGate {
public:
    explicit RequestGate(int limit) : available_(limit) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [this] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

struct GateGuard {
    explicit GateGuard(RequestGate& gate) : gate_(gate) { gate_.acquire(); }
    ~GateGuard() { gate_.release(); }
    RequestGate& gate_;
};

class HttplibTransport : public Transport {
public:
    HttpResponse post(const std::string& base_url, const std::string& path,
                      const std::string& body,
                      const std::map<std::string, std::string>& headers,
                      double timeout_seconds) override {
        httplib::Client client(base_url);
        const auto timeout = std::chrono::milliseconds(
            static_cast<long long>(timeout_seconds * 1000.0));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers hdrs(headers.begin(), headers.end());
        httplib::Result result = client.Post(path, hdrs, body, "application/json");
        if (!result) {
            return {0, httplib::to_string(result.error())};
        }
        return {result->status, result->body};
    }
};

bool retryable_status(int status) {
    return status == 0 || status == 429 || status >= 500;
}

}  // namespace

std::unique_ptr<Transport> make_httplib_transport() {
    return std::make_unique<HttplibTransport>();
}

struct HttpBackend::Impl {
    BackendConfig config;
    std::unique_ptr<Transport> transport;
    RequestGate gate;
    std::string api_key;

    Impl(BackendConfig cfg, std::unique_ptr<Transport> t)
        : config(std::move(cfg)), transport(std::move(t)), gate(config.max_concurrent) {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key != nullptr) {
            api_key = key;
        }
    }

    nlohmann::json post_completions(const nlohmann::json& request) {
        std::map<std::string, std::string> headers;
        if (!api_key.empty()) {
            headers["Authorization"] = "Bearer " + api_key;
        }
        const std::string body = request.dump();
        HttpResponse response;
        for (int attempt = 0; attempt < config.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100LL << attempt));
            }
            {
                GateGuard guard(gate);
                response = transport->post(config.base_url, "/v1/completions", body, headers,
                                           config.timeout_seconds);
            }
            if (response.status >= 200 && response.status < 300) {
                nlohmann::json parsed = nlohmann::json::parse(response.body, nullptr, false);
                if (parsed.is_discarded() || !parsed.is_object()) {
                    throw Error(ErrorKind::MalformedResponse,
                                "completions response is not a JSON object");
                }
                return parsed;
            }
            if (!retryable_status(response.status)) {
                break;
            }
        }
        throw Error(ErrorKind::BackendUnavailable,
                    "completions request failed with status " +
                        std::to_string(response.status) + ": " + response.body);
    }
};

HttpBackend::HttpBackend(BackendConfig config, std::unique_ptr<Transport> transport) {
    validate_backend_config(config);
    impl_ = std::make_unique<Impl>(std::move(config), std::move(transport));
}

HttpBackend::~HttpBackend() = default;

std::vector<std::string> HttpBackend::complete(const std::string& prompt, int k,
                                               double temperature, double top_p,
                                               std::uint64_t /*seed*/, int max_new_tokens) {
    if (k < 1) {
        throw Error(ErrorKind::InvalidParameter, "k must be >= 1");
    }
    nlohmann::json request;
    request["model"] = impl_->config.model;
    request["prompt"] = prompt;
    request["n"] = k;
    request["temperature"] = temperature;
    request["top_p"] = top_p;
    request["max_tokens"] = max_new_tokens;
    const nlohmann::json response = impl_->post_completions(request);
    if (!response.contains("choices") || !response["choices"].is_array()) {
        throw Error(ErrorKind::MalformedResponse, "completions response lacks choices");
    }
    std::vector<std::string> texts;
    for (const nlohmann::json& choice : response["choices"]) {
        texts.push_back(choice.value("text", ""));
    }
    return texts;
}

TokenLogprobs HttpBackend::score_continuation(const std::string& context,
                                              const std::string& continuation) {
    if (continuation.empty()) {
        throw Error(ErrorKind::DegenerateInput, "continuation is empty");
    }
    nlohmann::json request;
    request["model"] = impl_->config.model;
    request["prompt"] = context + continuation;
    request["max_tokens"] = 0;
    request["echo"] = true;
    request["logprobs"] = 1;
    const nlohmann::json response = impl_->post_completions(request);
    if (!response.contains("choices") || !response["choices"].is_array() ||
        response["choices"].empty()) {
        throw Error(ErrorKind::MalformedResponse, "logprobs response lacks choices");
    }
    const nlohmann::json& choice = response["choices"][0];
    if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) {
        throw Error(ErrorKind::MalformedResponse, "logprobs response lacks logprobs block");
    }
    const nlohmann::json& block = choice["logprobs"];
    if (!block.contains("tokens") || !block.contains("token_logprobs") ||
        !block.contains("text_offset")) {
        throw Error(ErrorKind::MalformedResponse,
                    "logprobs block missing tokens/token_logprobs/text_offset");
    }
    const auto& tokens = block["tokens"];
    const auto& logprobs = block["token_logprobs"];
    const auto& offsets = block["text_offset"];
    if (tokens.size() != logprobs.size() || tokens.size() != offsets.size()) {
        throw Error(ErrorKind::MalformedResponse, "logprobs arrays have mismatched lengths");
    }
    TokenLogprobs scored;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (offsets[i].get<std::size_t>() < context.size()) {
            continue;  // token belongs to the echoed context
        }
        if (logprobs[i].is_null()) {
            throw Error(ErrorKind::MalformedResponse, "null logprob inside continuation span");
        }
        const double lp = logprobs[i].get<double>();
        if (lp > 0.0) {
            throw Error(ErrorKind::MalformedResponse, "positive logprob in response");
        }
        scored.tokens.push_back(tokens[i].get<std::string>());
        scored.logprobs.push_back(lp);
    }
    if (scored.tokens.empty()) {
        throw Error(ErrorKind::DegenerateInput, "continuation tokenizes to zero tokens");
    }
    return scored;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    if (config.kind == BackendKind::Mock) {
        return std::make_unique<MockBackend>();
    }
    return std::make_unique<HttpBackend>(config, make_httplib_transport());
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config,
                                      std::unique_ptr<Transport> transport) {
    if (config.kind == BackendKind::Mock) {
        return std::make_unique<MockBackend>();
    }
    return std::make_unique<HttpBackend>(config, std::move(transport));
}

}  // namespace alignretrieve
