#include "taskexposure/llm.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace taskexposure {

std::string StructuredRequest::fingerprint() const {
    std::string material;
    material.reserve(system_prompt.size() + user_prompt.size() + 256);
    material.append(system_prompt).push_back('\x1f');
    material.append(user_prompt).push_back('\x1f');
    material.append(output_schema.to_json_schema().dump());
    return sha256_hex(material);
}

std::string failure_class_name(FailureClass c) {
    switch (c) {
    case FailureClass::SchemaInvalid: return "SchemaInvalid";
    case FailureClass::Transport: return "Transport";
    case FailureClass::FixtureMiss: return "FixtureMiss";
    }
    return "Unknown";
}

void BatchReport::merge(const BatchReport& other) {
    submitted += other.submitted;
    succeeded += other.succeeded;
    failed.insert(failed.end(), other.failed.begin(), other.failed.end());
    token_usage.input += other.token_usage.input;
    token_usage.output += other.token_usage.output;
    provider_calls += other.provider_calls;
    cache_hits += other.cache_hits;
}

const BatchFailure* BatchReport::failure_for(const std::string& request_id) const {
    for (const auto& f : failed) {
        if (f.request_id == request_id) return &f;
    }
    return nullptr;
}

const StructuredResponse* BatchResult::find(const std::string& request_id) const {
    for (const auto& r : responses) {
        if (r.request_id == request_id) return &r;
    }
    return nullptr;
}

// ---------------------------------------------------------------- mock

MockProvider::MockProvider() : MockProvider(Options{}) {}

MockProvider::MockProvider(Options options) : options_(options) {
    if (options_.embedding_dim == 0) throw PreconditionError("embedding_dim must be positive");
}

void MockProvider::add_fixture(const std::string& fingerprint, std::string payload) {
    std::lock_guard lock(mutex_);
    fixtures_[fingerprint] = {std::move(payload)};
}

void MockProvider::add_fixture_sequence(const std::string& fingerprint, std::vector<std::string> payloads) {
    if (payloads.empty()) throw PreconditionError("fixture sequence is empty");
    std::lock_guard lock(mutex_);
    fixtures_[fingerprint] = std::move(payloads);
}

void MockProvider::add_fixture(const StructuredRequest& request, std::string payload) {
    add_fixture(request.fingerprint(), std::move(payload));
}

void MockProvider::add_embedding(const std::string& text, Embedding vector) {
    if (vector.size() != options_.embedding_dim) {
        throw PreconditionError("fixture embedding has dimension " + std::to_string(vector.size()) +
                                ", provider uses " + std::to_string(options_.embedding_dim));
    }
    std::lock_guard lock(mutex_);
    embeddings_[text] = std::move(vector);
}

void MockProvider::set_responder(Responder responder) {
    std::lock_guard lock(mutex_);
    responder_ = std::move(responder);
}

void MockProvider::inject_transport_failures(std::size_t n) {
    std::lock_guard lock(mutex_);
    pending_failures_ = n;
}

void MockProvider::load_fixtures(const json& doc) {
    if (doc.contains("fixtures")) {
        for (const auto& f : doc.at("fixtures")) {
            const std::string fp = f.at("fingerprint").get<std::string>();
            auto as_text = [](const json& p) { return p.is_string() ? p.get<std::string>() : p.dump(); };
            if (f.contains("responses")) {
                std::vector<std::string> seq;
                for (const auto& p : f.at("responses")) seq.push_back(as_text(p));
                add_fixture_sequence(fp, std::move(seq));
            } else {
                add_fixture(fp, as_text(f.at("payload")));
            }
        }
    }
    if (doc.contains("embeddings")) {
        for (const auto& e : doc.at("embeddings")) {
            add_embedding(e.at("text").get<std::string>(), e.at("vector").get<Embedding>());
        }
    }
}

void MockProvider::load_fixture_file(const std::string& path) {
    try {
        load_fixtures(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw DataError("invalid fixture file " + path + ": " + e.what());
    }
}

Completion MockProvider::complete(const StructuredRequest& request) {
    ++completion_calls_;
    const std::string fp = request.fingerprint();
    Responder responder;
    {
        std::lock_guard lock(mutex_);
        if (pending_failures_ > 0) {
            --pending_failures_;
            throw TransportError("injected transport failure");
        }
        auto it = fixtures_.find(fp);
        if (it != fixtures_.end()) {
            std::size_t& n = served_[fp];
            const std::string& payload = it->second[std::min(n, it->second.size() - 1)];
            ++n;
            return {payload, {request.system_prompt.size() / 4 + request.user_prompt.size() / 4, payload.size() / 4}};
        }
        if (options_.strict || !responder_) {
            throw FixtureMissError("no fixture for request " + request.request_id + " (fingerprint " +
                                   fp.substr(0, 12) + ")");
        }
        responder = responder_;
    }
    auto payload = responder(request);
    if (!payload) throw FixtureMissError("responder declined request " + request.request_id);
    return {*payload, {request.system_prompt.size() / 4 + request.user_prompt.size() / 4, payload->size() / 4}};
}

std::vector<Embedding> MockProvider::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw PreconditionError("embed: no texts");
    for (const auto& t : texts) {
        if (t.empty()) throw PreconditionError("embed: empty text");
    }
    ++embedding_calls_;
    std::vector<Embedding> out;
    out.reserve(texts.size());
    std::lock_guard lock(mutex_);
    for (const auto& t : texts) {
        auto it = embeddings_.find(t);
        out.push_back(it != embeddings_.end() ? it->second : hashed_embedding(t, options_.embedding_dim));
    }
    return out;
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

Embedding hashed_embedding(std::string_view text, std::size_t dim) {
    Embedding v(dim, 0.0);
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    auto add = [&](std::string_view feature, double weight) {
        const std::uint64_t h = fnv1a(feature);
        const std::size_t idx = static_cast<std::size_t>(h % dim);
        v[idx] += ((h >> 63) ? -1.0 : 1.0) * weight;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add(tokens[i], 1.0);
        if (i + 1 < tokens.size()) add(tokens[i] + " " + tokens[i + 1], 0.5);
    }
    if (tokens.empty()) add(text, 1.0);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
    }
    return v;
}

// -------------------------------------------------------------- remote

RemoteProvider::RemoteProvider(RemoteOptions options) : options_(std::move(options)) {
    if (options_.model.empty()) throw ProviderError("remote provider: model is not configured");
    if (!options_.api_key_env.empty()) {
        if (const char* key = std::getenv(options_.api_key_env.c_str())) api_key_ = key;
    }
}

std::string RemoteProvider::id() const { return "remote:" + options_.base_url + ":" + options_.model; }

json RemoteProvider::chat_body(const StructuredRequest& request) const {
    json messages = json::array();
    if (!request.system_prompt.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    }
    messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
    return json{{"model", options_.model},
                {"messages", messages},
                {"temperature", options_.temperature},
                {"max_tokens", options_.max_tokens},
                {"response_format",
                 {{"type", "json_schema"},
                  {"json_schema",
                   {{"name", request.kind.empty() ? "output" : request.kind},
                    {"strict", true},
                    {"schema", request.output_schema.to_json_schema()}}}}}};
}

json RemoteProvider::post(const std::string& path, const json& body) const {
    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);
    client.set_write_timeout(options_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("POST " + path + " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("POST " + path + " returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw ProviderError("POST " + path + " returned HTTP " + std::to_string(res->status) + ": " +
                            res->body.substr(0, 200));
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw TransportError("POST " + path + ": unparseable response body: " + e.what());
    }
}

Completion RemoteProvider::complete(const StructuredRequest& request) {
    const json reply = post(options_.chat_path, chat_body(request));
    Completion c;
    try {
        const auto& message = reply.at("choices").at(0).at("message");
        if (message.contains("content") && message.at("content").is_string()) {
            c.text = message.at("content").get<std::string>();
        } else if (message.contains("tool_calls")) {
            c.text = message.at("tool_calls").at(0).at("function").at("arguments").get<std::string>();
        } else {
            throw TransportError("chat completion has no content");
        }
        if (reply.contains("usage")) {
            c.usage.input = reply["usage"].value("prompt_tokens", 0ULL);
            c.usage.output = reply["usage"].value("completion_tokens", 0ULL);
        }
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed chat completion: ") + e.what());
    }
    return c;
}

std::vector<Embedding> RemoteProvider::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw PreconditionError("embed: no texts");
    for (const auto& t : texts) {
        if (t.empty()) throw PreconditionError("embed: empty text");
    }
    const json reply = post(options_.embeddings_path,
                            json{{"model", options_.embedding_model.empty() ? options_.model : options_.embedding_model},
                                 {"input", texts}});
    std::vector<Embedding> out(texts.size());
    try {
        for (const auto& item : reply.at("data")) {
            const std::size_t idx = item.value("index", std::size_t{0});
            if (idx >= out.size()) throw TransportError("embedding index out of range");
            out[idx] = item.at("embedding").get<Embedding>();
            if (out[idx].size() != options_.embedding_dim) {
                throw ProviderError("embedding dimension " + std::to_string(out[idx].size()) + " != configured " +
                                    std::to_string(options_.embedding_dim));
            }
        }
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed embeddings response: ") + e.what());
    }
    for (const auto& v : out) {
        if (v.empty()) throw TransportError("embeddings response is missing entries");
    }
    return out;
}

// --------------------------------------------------------------- cache

ResponseCache::ResponseCache(std::string directory) : directory_(std::move(directory)) {
    fs::create_directories(directory_);
}

std::string ResponseCache::path_for(const std::string& key) const {
    return (fs::path(directory_) / key.substr(0, 2) / (key + ".json")).string();
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void ResponseCache::put(const std::string& key, const std::string& payload) {
    std::lock_guard lock(write_mutex_);
    const fs::path target = path_for(key);
    fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write cache entry " + tmp.string());
        out << payload;
    }
    fs::rename(tmp, target);
}

// --------------------------------------------------------------- batch

namespace {

struct Outcome {
    std::optional<StructuredResponse> response;
    std::optional<BatchFailure> failure;
    TokenUsage usage;
    std::size_t calls = 0;
    bool cache_hit = false;
};

ValidationResult full_validate(const StructuredRequest& req, std::string_view raw) {
    ValidationResult v = validate_payload(raw, req.output_schema);
    if (v.ok() && req.check) {
        ValidationResult extra = req.check(v.payload);
        if (!extra.ok()) return extra;
    }
    return v;
}

Outcome run_one(Provider& provider, const StructuredRequest& req, const BatchPolicy& policy, ResponseCache* cache) {
    Outcome out;
    const std::string key = cache ? sha256_hex(provider.id() + "\x1f" + req.fingerprint()) : std::string{};
    if (cache) {
        if (auto hit = cache->get(key)) {
            ValidationResult v = full_validate(req, *hit);
            if (v.ok()) {
                out.response = StructuredResponse{req.request_id, std::move(v.payload), *hit, true};
                out.cache_hit = true;
                return out;
            }
        }
    }
    BatchFailure last{req.request_id, FailureClass::Transport, ErrorClass::None, "no attempts made"};
    const std::size_t attempts = std::max<std::size_t>(1, policy.max_attempts);
    for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0 && policy.backoff_base.count() > 0) {
            std::this_thread::sleep_for(policy.backoff_base * (1LL << std::min<std::size_t>(attempt - 1, 10)));
        }
        Completion c;
        try {
            ++out.calls;
            c = provider.complete(req);
        } catch (const TransportError& e) {
            last = {req.request_id, FailureClass::Transport, ErrorClass::None, e.what()};
            continue;
        } catch (const FixtureMissError& e) {
            out.failure = BatchFailure{req.request_id, FailureClass::FixtureMiss, ErrorClass::None, e.what()};
            return out;
        }
        out.usage.input += c.usage.input;
        out.usage.output += c.usage.output;
        ValidationResult v = full_validate(req, c.text);
        if (!v.ok()) {
            last = {req.request_id, FailureClass::SchemaInvalid, v.error, v.message};
            continue;
        }
        if (cache) cache->put(key, c.text);
        out.response = StructuredResponse{req.request_id, std::move(v.payload), std::move(c.text), false};
        return out;
    }
    out.failure = last;
    return out;
}

} // namespace

BatchResult submit_batch(Provider& provider, const std::vector<StructuredRequest>& requests,
                         const BatchPolicy& policy, ResponseCache* cache) {
    std::set<std::string> ids;
    for (const auto& r : requests) {
        if (!ids.insert(r.request_id).second) throw PreconditionError("duplicate request_id '" + r.request_id + "'");
        if (r.output_schema.empty()) throw PreconditionError("request '" + r.request_id + "' has an empty schema");
    }
    std::vector<Outcome> outcomes(requests.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(policy.max_in_flight, requests.size()));
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr fatal;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            try {
                outcomes[i] = run_one(provider, requests[i], policy, cache);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!fatal) fatal = std::current_exception();
                next.store(requests.size());
                return;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    BatchResult result;
    result.report.submitted = requests.size();
    for (auto& o : outcomes) {
        result.report.token_usage.input += o.usage.input;
        result.report.token_usage.output += o.usage.output;
        result.report.provider_calls += o.calls;
        if (o.cache_hit) ++result.report.cache_hits;
        if (o.response) {
            ++result.report.succeeded;
            result.responses.push_back(std::move(*o.response));
        } else if (o.failure) {
            result.report.failed.push_back(std::move(*o.failure));
        }
    }
    return result;
}

EmbeddingBatch embed_texts(Provider& provider, const std::vector<std::string>& texts, const BatchPolicy& policy,
                           std::size_t chunk_size) {
    if (texts.empty()) throw PreconditionError("embed: no texts");
    for (const auto& t : texts) {
        if (t.empty()) throw PreconditionError("embed: empty text");
    }
    if (chunk_size == 0) chunk_size = texts.size();
    EmbeddingBatch out;
    out.vectors.resize(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += chunk_size) {
        const std::size_t end = std::min(texts.size(), start + chunk_size);
        std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                       texts.begin() + static_cast<std::ptrdiff_t>(end));
        std::string error;
        bool done = false;
        for (std::size_t attempt = 0; attempt < std::max<std::size_t>(1, policy.max_attempts) && !done; ++attempt) {
            if (attempt > 0 && policy.backoff_base.count() > 0) {
                std::this_thread::sleep_for(policy.backoff_base * (1LL << std::min<std::size_t>(attempt - 1, 10)));
            }
            try {
                auto vecs = provider.embed(chunk);
                if (vecs.size() != chunk.size()) throw TransportError("provider returned wrong vector count");
                for (std::size_t i = 0; i < vecs.size(); ++i) {
                    if (vecs[i].size() != provider.embedding_dim()) {
                        throw ProviderError("embedding dimension changed within a run");
                    }
                    out.vectors[start + i] = std::move(vecs[i]);
                }
                done = true;
            } catch (const TransportError& e) {
                error = e.what();
            }
        }
        if (!done) {
            for (std::size_t i = start; i < end; ++i) out.failures.emplace_back(i, error);
        }
    }
    return out;
}

} // namespace taskexposure
