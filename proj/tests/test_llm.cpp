#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "taskexposure/llm.hpp"
#include "taskexposure/prompts.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

using namespace taskexposure;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

StructuredRequest unit_request(const std::string& id, const std::string& text = "t") {
    StructuredRequest r;
    r.request_id = id;
    r.kind = "unit";
    r.user_prompt = text;
    r.output_schema = Schema::object({{"x", Schema::number(0.0, 1.0)}});
    return r;
}

BatchPolicy fast_policy() {
    BatchPolicy p;
    p.max_in_flight = 4;
    p.max_attempts = 3;
    p.backoff_base = std::chrono::milliseconds(0);
    return p;
}

} // namespace

TEST_SUITE("llm") {

TEST_CASE("fingerprint depends on prompts and schema") {
    auto a = unit_request("a");
    auto b = unit_request("b");
    CHECK(a.fingerprint() == b.fingerprint());
    b.user_prompt = "u";
    CHECK(a.fingerprint() != b.fingerprint());
    b = unit_request("b");
    b.output_schema = Schema::object({{"y", Schema::number()}});
    CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("strict mock refuses unfixtured requests") {
    MockProvider m;
    const auto r = unit_request("a");
    CHECK_THROWS_AS(m.complete(r), FixtureMissError);
    m.add_fixture(r, R"({"x": 0.4})");
    CHECK(m.complete(r).text == R"({"x": 0.4})");
}

TEST_CASE("every request ends in one response or one failure") {
    MockProvider m;
    std::vector<StructuredRequest> reqs;
    for (int i = 0; i < 12; ++i) reqs.push_back(unit_request("r" + std::to_string(i), "p" + std::to_string(i)));
    for (int i = 0; i < 12; ++i) {
        if (i % 4 == 0) continue; // fixture miss
        const std::string payload = i % 4 == 1 ? R"({"x": 1.5})" : R"({"x": 0.25})";
        m.add_fixture(reqs[static_cast<std::size_t>(i)], payload);
    }
    const auto res = submit_batch(m, reqs, fast_policy());
    CHECK(res.report.submitted == 12);
    CHECK(res.report.reconciles());
    CHECK(res.report.succeeded == 6);
    CHECK(res.report.failed.size() == 6);
    const auto* miss = res.report.failure_for("r0");
    REQUIRE(miss);
    CHECK(miss->failure == FailureClass::FixtureMiss);
    const auto* invalid = res.report.failure_for("r1");
    REQUIRE(invalid);
    CHECK(invalid->failure == FailureClass::SchemaInvalid);
    CHECK(invalid->validation == ErrorClass::RangeViolation);
    REQUIRE(res.find("r2"));
    CHECK(res.find("r2")->payload["x"] == 0.25);
    CHECK(res.find("r1") == nullptr);
    std::vector<std::string> order;
    for (const auto& r : res.responses) order.push_back(r.request_id);
    CHECK(order == std::vector<std::string>{"r2", "r3", "r6", "r7", "r10", "r11"});
}

TEST_CASE("schema-invalid responses are retried up to the cap") {
    MockProvider m;
    const auto r = unit_request("a");
    m.add_fixture_sequence(r.fingerprint(), {R"({"x": 3})", R"({"x": "no"})", R"({"x": 0.5})"});
    auto res = submit_batch(m, {r}, fast_policy());
    CHECK(res.report.succeeded == 1);
    CHECK(res.report.provider_calls == 3);

    MockProvider m2;
    m2.add_fixture(r, R"({"x": 3})");
    res = submit_batch(m2, {r}, fast_policy());
    CHECK(res.report.failed.size() == 1);
    CHECK(m2.completion_calls() == 3);
}

TEST_CASE("transport failures retried then reported") {
    MockProvider m;
    const auto r = unit_request("a");
    m.add_fixture(r, R"({"x": 0.1})");
    m.inject_transport_failures(2);
    auto res = submit_batch(m, {r}, fast_policy());
    CHECK(res.report.succeeded == 1);
    m.inject_transport_failures(3);
    res = submit_batch(m, {r}, fast_policy());
    REQUIRE(res.report.failed.size() == 1);
    CHECK(res.report.failed[0].failure == FailureClass::Transport);
}

TEST_CASE("structural check runs after the schema") {
    MockProvider m;
    auto r = unit_request("a");
    r.check = [](const json& p) {
        return p["x"].get<double>() > 0.5 ? ValidationResult::reject(ErrorClass::CapExceeded, "/x", "too big")
                                          : ValidationResult::accept(p);
    };
    m.add_fixture(r, R"({"x": 0.9})");
    const auto res = submit_batch(m, {r}, fast_policy());
    REQUIRE(res.report.failed.size() == 1);
    CHECK(res.report.failed[0].validation == ErrorClass::CapExceeded);
}

TEST_CASE("duplicate ids and empty schemas are precondition errors") {
    MockProvider m;
    CHECK_THROWS_AS(submit_batch(m, {unit_request("a"), unit_request("a")}), PreconditionError);
    auto r = unit_request("b");
    r.output_schema = Schema::object({});
    CHECK_THROWS_AS(submit_batch(m, {r}), PreconditionError);
}

TEST_CASE("cache serves repeated requests without provider calls") {
    const auto dir = fs::temp_directory_path() / "te_cache_test";
    fs::remove_all(dir);
    ResponseCache cache(dir.string());
    MockProvider m;
    const auto r = unit_request("a");
    m.add_fixture(r, R"({"x": 0.7})");
    auto first = submit_batch(m, {r}, fast_policy(), &cache);
    CHECK(first.report.cache_hits == 0);
    auto second = submit_batch(m, {r}, fast_policy(), &cache);
    CHECK(second.report.cache_hits == 1);
    CHECK(m.completion_calls() == 1);
    CHECK(second.responses[0].from_cache);
    CHECK(second.responses[0].payload == first.responses[0].payload);
    fs::remove_all(dir);
}

TEST_CASE("hashed embeddings are deterministic and unit length") {
    const auto a = hashed_embedding("prepare ministerial briefings", 64);
    const auto b = hashed_embedding("prepare ministerial briefings", 64);
    CHECK(a == b);
    double n = 0;
    for (double x : a) n += x * x;
    CHECK(n == doctest::Approx(1.0));
    MockProvider m(MockProvider::Options{true, 32});
    CHECK(m.embed({"x y"})[0].size() == 32);
    CHECK_THROWS_AS(m.embed({""}), PreconditionError);
    CHECK_THROWS_AS(m.embed({}), PreconditionError);
}

TEST_CASE("embed_texts chunks and reports failures") {
    MockProvider m(MockProvider::Options{true, 8});
    const auto out = embed_texts(m, {"a", "b", "c"}, fast_policy(), 2);
    CHECK(out.failures.empty());
    CHECK(out.vectors.size() == 3);
    CHECK(m.embedding_calls() == 2);
}

TEST_CASE("fixture file loading") {
    MockProvider m(MockProvider::Options{true, 2});
    const auto r = unit_request("a");
    m.load_fixtures(json{{"fixtures", {{{"fingerprint", r.fingerprint()}, {"payload", {{"x", 0.3}}}}}},
                         {"embeddings", {{{"text", "hello"}, {"vector", {1.0, 0.0}}}}}});
    CHECK(json::parse(m.complete(r).text)["x"] == 0.3);
    CHECK(m.embed({"hello"})[0][0] == 1.0);
}

TEST_CASE("remote provider speaks the chat and embeddings protocol") {
    httplib::Server server;
    json last_body;
    std::string last_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        last_body = json::parse(req.body);
        last_auth = req.get_header_value("Authorization");
        json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", R"({"x": 0.6})"}}}}}},
                   {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 5}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        const json body = json::parse(req.body);
        json data = json::array();
        for (std::size_t i = 0; i < body["input"].size(); ++i) {
            data.push_back({{"index", i}, {"embedding", {1.0 * static_cast<double>(i), 0.5, 0.25}}});
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    server.Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("TE_TEST_KEY", "secret", 1);
    RemoteOptions o;
    o.base_url = "http://127.0.0.1:" + std::to_string(port);
    o.model = "test-model";
    o.api_key_env = "TE_TEST_KEY";
    o.embedding_dim = 3;
    RemoteProvider p(o);
    const auto r = unit_request("a");
    const auto c = p.complete(r);
    CHECK(json::parse(c.text)["x"] == 0.6);
    CHECK(c.usage.input == 11);
    CHECK(last_body["model"] == "test-model");
    CHECK(last_body["temperature"] == 0.0);
    CHECK(last_body["response_format"]["type"] == "json_schema");
    CHECK(last_auth == "Bearer secret");
    const auto e = p.embed({"a", "b"});
    CHECK(e[1][0] == 1.0);

    RemoteOptions bad = o;
    bad.chat_path = "/fail";
    RemoteProvider pf(bad);
    CHECK_THROWS_AS(pf.complete(r), TransportError);

    server.stop();
    t.join();
    CHECK_THROWS_AS(p.complete(r), TransportError);
    RemoteOptions nomodel;
    CHECK_THROWS_AS(RemoteProvider{nomodel}, ProviderError);
}

}
