#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/prompt_format.hpp"
#include "fixtures.hpp"

using namespace alignretrieve;

namespace {

BackendConfig http_config(const std::string& url = "http://fake.test") {
    BackendConfig config;
    config.kind = BackendKind::Http;
    config.base_url = url;
    config.model = "scorer-1";
    return config;
}

HttpResponse ok_completion(const std::vector<std::string>& texts) {
    nlohmann::json body;
    body["choices"] = nlohmann::json::array();
    for (const std::string& t : texts) {
        body["choices"].push_back({{"text", t}});
    }
    return {200, body.dump()};
}

HttpResponse ok_logprobs(const std::vector<std::string>& tokens,
                         const std::vector<nlohmann::json>& logprobs,
                         const std::vector<std::size_t>& offsets) {
    nlohmann::json block;
    block["tokens"] = tokens;
    block["token_logprobs"] = logprobs;
    block["text_offset"] = offsets;
    nlohmann::json body;
    body["choices"] = nlohmann::json::array({{{"text", ""}, {"logprobs", block}}});
    return {200, body.dump()};
}

const std::string kOpsPrompt =
    "# context: lib/ops.py\n"
    "# def add_vec(a, b):\n"
    "# def mul_vec(a, b):\n"
    "# def norm_vec(a):\n"
    "\n"
    "x = add_vec(p, q)";

}  // namespace

TEST_CASE("validate_backend_config") {
    validate_backend_config(BackendConfig{});  // mock defaults are fine
    validate_backend_config(http_config());
    auto expect_invalid = [](BackendConfig config) {
        try {
            validate_backend_config(config);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidConfig);
        }
    };
    BackendConfig no_url = http_config();
    no_url.base_url.clear();
    expect_invalid(no_url);
    BackendConfig no_model = http_config();
    no_model.model.clear();
    expect_invalid(no_model);
    BackendConfig bad_timeout;
    bad_timeout.timeout_seconds = 0.0;
    expect_invalid(bad_timeout);
    BackendConfig bad_retries;
    bad_retries.max_retries = 0;
    expect_invalid(bad_retries);
    BackendConfig bad_concurrent;
    bad_concurrent.max_concurrent = 0;
    expect_invalid(bad_concurrent);
}

TEST_CASE("perplexity is exp of the negated mean logprob") {
    TokenLogprobs scored;
    scored.tokens = {"a", "b"};
    scored.logprobs = {-0.5, -0.5};
    CHECK(perplexity(scored) == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
    scored.tokens = {"a"};
    scored.logprobs = {0.0};
    CHECK(perplexity(scored) == doctest::Approx(1.0).epsilon(1e-12));
    try {
        perplexity(TokenLogprobs{});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateInput);
    }
}

TEST_CASE("mock completions rank context lines by tail overlap") {
    MockBackend mock;
    // Tail tokens {x, add, vec, p, q}: add_vec scores 2/8, norm_vec 1/8,
    // mul_vec 1/9.
    const auto out = mock.complete(kOpsPrompt, 3, 0.8, 0.95, 0, 32);
    REQUIRE(out.size() == 3);
    CHECK(out[0] == "def add_vec(a, b):");
    CHECK(out[1] == "def norm_vec(a):");
    CHECK(out[2] == "def mul_vec(a, b):");
    SUBCASE("the seed rotates through the ranking") {
        const auto shifted = mock.complete(kOpsPrompt, 3, 0.8, 0.95, 1, 32);
        CHECK(shifted[0] == "def norm_vec(a):");
        CHECK(shifted[1] == "def mul_vec(a, b):");
        CHECK(shifted[2] == "def add_vec(a, b):");
    }
    SUBCASE("k beyond the line count wraps around") {
        const auto wrapped = mock.complete(kOpsPrompt, 5, 0.8, 0.95, 0, 32);
        REQUIRE(wrapped.size() == 5);
        CHECK(wrapped[3] == wrapped[0]);
        CHECK(wrapped[4] == wrapped[1]);
    }
    SUBCASE("repeat calls are identical") {
        CHECK(mock.complete(kOpsPrompt, 3, 0.8, 0.95, 0, 32) == out);
    }
}

TEST_CASE("mock completion ties resolve in appearance order") {
    const std::string prompt =
        "# context: t.py\n"
        "# def one_vec(a):\n"
        "# def two_vec(a):\n"
        "\n"
        "vec";
    MockBackend mock;
    const auto out = mock.complete(prompt, 2, 0.0, 1.0, 0, 8);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == "def one_vec(a):");
    CHECK(out[1] == "def two_vec(a):");
}

TEST_CASE("mock completions without any context section are empty strings") {
    MockBackend mock;
    const auto out = mock.complete("plain code\nmore code", 3, 0.0, 1.0, 0, 8);
    REQUIRE(out.size() == 3);
    for (const auto& s : out) CHECK(s.empty());
    try {
        mock.complete(kOpsPrompt, 0, 0.0, 1.0, 0, 8);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidParameter);
    }
}

TEST_CASE("mock scoring maps token overlap onto [1, e] perplexity") {
    MockBackend mock;
    const std::string context =
        "# context: a.py\n"
        "# alpha beta gamma\n"
        "\n"
        "unrelated tail";
    SUBCASE("full overlap scores perplexity one") {
        const auto scored = mock.score_continuation(context, "alpha beta");
        REQUIRE(scored.tokens.size() == 2);
        CHECK(scored.logprobs[0] == doctest::Approx(0.0));
        CHECK(perplexity(scored) == doctest::Approx(1.0));
    }
    SUBCASE("no overlap scores perplexity e") {
        const auto scored = mock.score_continuation(context, "omega psi");
        CHECK(perplexity(scored) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    }
    SUBCASE("half overlap lands in between") {
        const auto scored = mock.score_continuation(context, "alpha omega");
        CHECK(perplexity(scored) == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
    }
    SUBCASE("tokens outside the framed section do not count") {
        // "unrelated" appears in the prompt tail but not in a context block.
        const auto scored = mock.score_continuation(context, "unrelated");
        CHECK(perplexity(scored) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    }
    SUBCASE("one pseudo-token per whitespace word") {
        const auto scored = mock.score_continuation(context, "alpha  beta\n gamma");
        CHECK(scored.tokens == std::vector<std::string>{"alpha", "beta", "gamma"});
        CHECK(scored.logprobs.size() == 3);
    }
    SUBCASE("degenerate continuations are rejected") {
        try {
            mock.score_continuation(context, "");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateInput);
        }
        try {
            mock.score_continuation(context, "() ::");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateInput);
        }
    }
}

TEST_CASE("http completions send the documented request") {
    setenv("ALIGN_RETRIEVE_API_KEY", "sk-test-key", 1);
    auto transport = std::make_unique<testfx::FakeTransport>();
    auto* t = transport.get();
    t->responses.push_back(ok_completion({"one", "two"}));
    HttpBackend backend(http_config(), std::move(transport));
    const auto out = backend.complete("prompt body", 2, 0.8, 0.95, 7, 64);
    CHECK(out == std::vector<std::string>{"one", "two"});

    const auto requests = t->requests();
    REQUIRE(requests.size() == 1);
    CHECK(requests[0].base_url == "http://fake.test");
    CHECK(requests[0].path == "/v1/completions");
    CHECK(requests[0].headers.at("Authorization") == "Bearer sk-test-key");
    const nlohmann::json body = nlohmann::json::parse(requests[0].body);
    CHECK(body.at("model") == "scorer-1");
    CHECK(body.at("prompt") == "prompt body");
    CHECK(body.at("n") == 2);
    CHECK(body.at("temperature") == doctest::Approx(0.8));
    CHECK(body.at("top_p") == doctest::Approx(0.95));
    CHECK(body.at("max_tokens") == 64);
    CHECK_FALSE(body.contains("echo"));
    unsetenv("ALIGN_RETRIEVE_API_KEY");
}

TEST_CASE("a missing API key sends no authorization header") {
    unsetenv("ALIGN_RETRIEVE_API_KEY");
    auto transport = std::make_unique<testfx::FakeTransport>();
    auto* t = transport.get();
    t->responses.push_back(ok_completion({"x"}));
    HttpBackend backend(http_config(), std::move(transport));
    backend.complete("p", 1, 0.0, 1.0, 0, 8);
    REQUIRE(t->requests().size() == 1);
    CHECK(t->requests()[0].headers.count("Authorization") == 0);
}

TEST_CASE("a custom key environment variable is honored") {
    setenv("OTHER_KEY_VAR", "alt-key", 1);
    BackendConfig config = http_config();
    config.api_key_env = "OTHER_KEY_VAR";
    auto transport = std::make_unique<testfx::FakeTransport>();
    auto* t = transport.get();
    t->responses.push_back(ok_completion({"x"}));
    HttpBackend backend(config, std::move(transport));
    backend.complete("p", 1, 0.0, 1.0, 0, 8);
    CHECK(t->requests()[0].headers.at("Authorization") == "Bearer alt-key");
    unsetenv("OTHER_KEY_VAR");
}

TEST_CASE("retryable statuses are retried until a success") {
    auto transport = std::make_unique<testfx::FakeTransport>();
    auto* t = transport.get();
    t->responses.push_back({500, "worker lost"});
    t->responses.push_back(ok_completion({"recovered"}));
    HttpBackend backend(http_config(), std::move(transport));
    const auto out = backend.complete("p", 1, 0.0, 1.0, 0, 8);
    CHECK(out == std::vector<std::string>{"recovered"});
    CHECK(t->call_count() == 2);
}

TEST_CASE("retries exhaust into a backend failure") {
    auto transport = std::make_unique<testfx::FakeTransport>();
    auto* t = transport.get();
    t->responses.push_back({503, "down"});
    BackendConfig config = http_config();
    config.max_retries = 2;
    HttpBackend backend(config, std::move(transport));
    try {
        backend.complete("p", 1, 0.0, 1.0, 0, 8);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BackendUnavailable);
        CHECK(std::string(e.what()).find("503") != std::string::npos);
    }
    CHECK(t->call_count() == 2);
}

TEST_CASE("client errors are not retried") {
    auto transport = std::make_unique<testfx::FakeTransport>();
    auto* t = transport.get();
    t->responses.push_back({400, "bad request"});
    HttpBackend backend(http_config(), std::move(transport));
    try {
        backend.complete("p", 1, 0.0, 1.0, 0, 8);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BackendUnavailable);
    }
    CHECK(t->call_count() == 1);
}

TEST_CASE("malformed completion responses are rejected") {
    SUBCASE("not JSON") {
        auto transport = std::make_unique<testfx::FakeTransport>();
        transport->responses.push_back({200, "<html>oops</html>"});
        HttpBackend backend(http_config(), std::move(transport));
        try {
            backend.complete("p", 1, 0.0, 1.0, 0, 8);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MalformedResponse);
        }
    }
    SUBCASE("choices missing") {
        auto transport = std::make_unique<testfx::FakeTransport>();
        transport->responses.push_back({200, "{\"id\": \"x\"}"});
        HttpBackend backend(http_config(), std::move(transport));
        try {
            backend.complete("p", 1, 0.0, 1.0, 0, 8);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MalformedResponse);
        }
    }
}

TEST_CASE("http scoring echoes the full prompt and slices the continuation") {
    auto transport = std::make_unique<testfx::FakeTransport>();
    auto* t = transport.get();
    // context "ab" spans offsets [0, 2); "c" and "d" belong to the
    // continuation. The context token's logprob may be null.
    t->responses.push_back(ok_logprobs({"ab", "c", "d"},
                                       {nullptr, -0.5, -0.5},
                                       {0, 2, 3}));
    HttpBackend backend(http_config(), std::move(transport));
    const TokenLogprobs scored = backend.score_continuation("ab", "cd");
    CHECK(scored.tokens == std::vector<std::string>{"c", "d"});
    CHECK(perplexity(scored) == doctest::Approx(std::exp(0.5)).epsilon(1e-12));

    const nlohmann::json body = nlohmann::json::parse(t->requests()[0].body);
    CHECK(body.at("prompt") == "abcd");
    CHECK(body.at("echo") == true);
    CHECK(body.at("logprobs") == 1);
    CHECK(body.at("max_tokens") == 0);
}

TEST_CASE("http scoring rejects damaged logprob payloads") {
    auto make_backend_with = [](HttpResponse response) {
        auto transport = std::make_unique<testfx::FakeTransport>();
        transport->responses.push_back(std::move(response));
        return std::make_unique<HttpBackend>(http_config(), std::move(transport));
    };
    SUBCASE("null logprob inside the continuation span") {
        auto backend = make_backend_with(
            ok_logprobs({"ab", "c"}, {nullptr, nullptr}, {0, 2}));
        try {
            backend->score_continuation("ab", "c");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MalformedResponse);
        }
    }
    SUBCASE("positive logprob") {
        auto backend = make_backend_with(ok_logprobs({"ab", "c"}, {nullptr, 0.25}, {0, 2}));
        try {
            backend->score_continuation("ab", "c");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MalformedResponse);
        }
    }
    SUBCASE("mismatched array lengths") {
        auto backend = make_backend_with(ok_logprobs({"ab", "c"}, {nullptr}, {0, 2}));
        try {
            backend->score_continuation("ab", "c");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MalformedResponse);
        }
    }
    SUBCASE("every token inside the context span") {
        auto backend = make_backend_with(ok_logprobs({"ab"}, {nullptr}, {0}));
        try {
            backend->score_continuation("ab", "c");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateInput);
        }
    }
    SUBCASE("empty continuation never reaches the wire") {
        auto transport = std::make_unique<testfx::FakeTransport>();
        auto* t = transport.get();
        HttpBackend backend(http_config(), std::move(transport));
        try {
            backend.score_continuation("ab", "");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateInput);
        }
        CHECK(t->call_count() == 0);
    }
}

TEST_CASE("concurrent requests respect the configured bound") {
    auto transport = std::make_unique<testfx::FakeTransport>();
    auto* t = transport.get();
    t->responses.push_back(ok_completion({"x"}));
    t->delay = std::chrono::milliseconds(25);
    BackendConfig config = http_config();
    config.max_concurrent = 2;
    HttpBackend backend(config, std::move(transport));
    std::vector<std::thread> threads;
    for (int i = 0; i < 6; ++i) {
        threads.emplace_back([&backend] { backend.complete("p", 1, 0.0, 1.0, 0, 8); });
    }
    for (auto& th : threads) th.join();
    CHECK(t->call_count() == 6);
    CHECK(t->max_in_flight() <= 2);
    CHECK(t->max_in_flight() >= 1);
}

TEST_CASE("make_backend dispatches on the configured kind") {
    BackendConfig mock_config;
    auto mock = make_backend(mock_config);
    REQUIRE(mock != nullptr);
    CHECK(mock->complete("no frames here", 1, 0.0, 1.0, 0, 8) ==
          std::vector<std::string>{""});

    auto transport = std::make_unique<testfx::FakeTransport>();
    transport->responses.push_back(ok_completion({"remote"}));
    auto http = make_backend(http_config(), std::move(transport));
    CHECK(http->complete("p", 1, 0.0, 1.0, 0, 8) == std::vector<std::string>{"remote"});
}
