#pragma once

#include "taskexposure/common.hpp"
#include "taskexposure/schema.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace taskexposure {

/// Extra structural check run after schema validation (permutations, caps,
/// referential integrity).
using PayloadCheck = std::function<ValidationResult(const nlohmann::json&)>;

struct StructuredRequest {
    std::string request_id;
    std::string kind; // extract, score, label, focus, themes, reorder, new_tasks, ...
    std::string system_prompt;
    std::string user_prompt;
    Schema output_schema;
    PayloadCheck check;
    nlohmann::json context; // structured inputs the prompt was built from

    /// sha256 over (system_prompt, user_prompt, schema).
    std::string fingerprint() const;
};

struct StructuredResponse {
    std::string request_id;
    nlohmann::json payload;
    std::string raw;
    bool from_cache = false;
};

enum class FailureClass { SchemaInvalid, Transport, FixtureMiss };
std::string failure_class_name(FailureClass c);

struct BatchFailure {
    std::string request_id;
    FailureClass failure = FailureClass::SchemaInvalid;
    ErrorClass validation = ErrorClass::None; // set for SchemaInvalid
    std::string message;
};

struct TokenUsage {
    std::uint64_t input = 0;
    std::uint64_t output = 0;
};

struct BatchReport {
    std::size_t submitted = 0;
    std::size_t succeeded = 0;
    std::vector<BatchFailure> failed;
    TokenUsage token_usage;
    std::size_t provider_calls = 0;
    std::size_t cache_hits = 0;

    bool reconciles() const { return submitted == succeeded + failed.size(); }
    void merge(const BatchReport& other);
    const BatchFailure* failure_for(const std::string& request_id) const;
};

struct Completion {
    std::string text;
    TokenUsage usage;
};

/// Retryable transport problem (connection, timeout, 5xx, rate limit).
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-retryable refusal, e.g. a strict mock without a fixture.
class FixtureMissError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Embedding = std::vector<double>;

/// Providers must be safe for concurrent calls.
class Provider {
public:
    virtual ~Provider() = default;
    /// Identifies provider+model; part of the cache key.
    virtual std::string id() const = 0;
    virtual Completion complete(const StructuredRequest& request) = 0;
    /// Throws PreconditionError on empty input or an empty text.
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
    virtual std::size_t embedding_dim() const = 0;
};

/// Produces a payload for an unfixtured request, or nullopt.
using Responder = std::function<std::optional<std::string>(const StructuredRequest&)>;

/// Deterministic offline provider. Fixtures map a request fingerprint to one
/// payload or a sequence of payloads served on successive calls (the last
/// one repeats).
class MockProvider : public Provider {
public:
    struct Options {
        bool strict = true;
        std::size_t embedding_dim = 768;
    };

    MockProvider();
    explicit MockProvider(Options options);

    void add_fixture(const std::string& fingerprint, std::string payload);
    void add_fixture_sequence(const std::string& fingerprint, std::vector<std::string> payloads);
    void add_fixture(const StructuredRequest& request, std::string payload);
    void add_embedding(const std::string& text, Embedding vector);
    /// Used for unfixtured requests when not strict.
    void set_responder(Responder responder);
    /// The next `n` completions throw TransportError.
    void inject_transport_failures(std::size_t n);

    /// {"fixtures": [{"fingerprint", "payload" | "responses"}], "embeddings": [{"text", "vector"}]}
    void load_fixtures(const nlohmann::json& doc);
    void load_fixture_file(const std::string& path);

    std::string id() const override { return "mock"; }
    Completion complete(const StructuredRequest& request) override;
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
    std::size_t embedding_dim() const override { return options_.embedding_dim; }

    std::size_t completion_calls() const { return completion_calls_.load(); }
    std::size_t embedding_calls() const { return embedding_calls_.load(); }

private:
    Options options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::vector<std::string>> fixtures_;
    std::map<std::string, std::size_t> served_;
    std::map<std::string, Embedding> embeddings_;
    Responder responder_;
    std::size_t pending_failures_ = 0;
    std::atomic<std::size_t> completion_calls_{0};
    std::atomic<std::size_t> embedding_calls_{0};
};

/// Signed feature-hashing bag of words (unigrams plus bigrams), L2-normalized.
Embedding hashed_embedding(std::string_view text, std::size_t dim);

struct RemoteOptions {
    std::string base_url = "http://localhost:8000"; // scheme://host[:port]
    std::string chat_path = "/v1/chat/completions";
    std::string embeddings_path = "/v1/embeddings";
    std::string model;
    std::string embedding_model;
    std::string api_key_env = "TASKEXPOSURE_API_KEY";
    double temperature = 0.0;
    int max_tokens = 2048;
    int timeout_seconds = 120;
    std::size_t embedding_dim = 768;
};

/// OpenAI-compatible chat-completions and embeddings endpoints.
class RemoteProvider : public Provider {
public:
    explicit RemoteProvider(RemoteOptions options);

    std::string id() const override;
    Completion complete(const StructuredRequest& request) override;
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
    std::size_t embedding_dim() const override { return options_.embedding_dim; }

    /// The request body sent for `request`; exposed for inspection.
    nlohmann::json chat_body(const StructuredRequest& request) const;

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

    RemoteOptions options_;
    std::string api_key_;
};

/// Content-addressed on-disk response cache; one file per key.
class ResponseCache {
public:
    explicit ResponseCache(std::string directory);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& payload);
    const std::string& directory() const { return directory_; }

private:
    std::string path_for(const std::string& key) const;

    std::string directory_;
    mutable std::mutex write_mutex_;
};

struct BatchPolicy {
    std::size_t max_in_flight = 8;
    std::size_t max_attempts = 3;
    std::chrono::milliseconds backoff_base{200};
};

struct BatchResult {
    /// Successful responses in request order.
    std::vector<StructuredResponse> responses;
    BatchReport report;

    const StructuredResponse* find(const std::string& request_id) const;
};

/// Runs every request to exactly one response or one failure entry.
/// Throws PreconditionError on duplicate request ids or empty schemas.
BatchResult submit_batch(Provider& provider, const std::vector<StructuredRequest>& requests,
                         const BatchPolicy& policy = {}, ResponseCache* cache = nullptr);

struct EmbeddingBatch {
    std::vector<std::optional<Embedding>> vectors; // aligned with input
    std::vector<std::pair<std::size_t, std::string>> failures;
};

/// Embeds texts in chunks with retries; failed chunks become per-text
/// failure entries. Throws PreconditionError for empty input or texts.
EmbeddingBatch embed_texts(Provider& provider, const std::vector<std::string>& texts,
                           const BatchPolicy& policy = {}, std::size_t chunk_size = 64);

} // namespace taskexposure
