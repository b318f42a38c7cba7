#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hoplab/index.hpp"
#include "hoplab/money.hpp"

namespace hoplab {

struct Message {
    std::string role; // "system" | "user" | "assistant"
    std::string content;
};

/// Identifies the purpose of a call so scripted backends can replay it and
/// call logs stay auditable. step is 0 for calls outside the iterative loop.
struct CallTag {
    std::string question_id;
    int step = 0;
    std::string role; // e.g. "no_context", "plan", "compose", "verify:iterative"
};

struct Completion {
    std::string text;
    long long input_tokens = 0;
    long long output_tokens = 0;
    long long reasoning_tokens = 0;
    double latency_ms = 0.0;
    bool truncated = false;
    int retries = 0;
};

struct ModelConfig {
    std::string model_id;
    std::string backend = "scripted"; // scripted | openai | anthropic
    std::string endpoint;
    std::string api_key_env; // name of the environment variable holding the key
    bool reasoning_mode = false;
    long long max_output_tokens = 4096;
    double temperature = 0.0;
    std::string script_path; // scripted backend only
};

enum class BackendErrorKind { auth, rate_limit, transport, protocol };

class BackendError : public std::runtime_error {
public:
    BackendError(BackendErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    BackendErrorKind kind() const { return kind_; }
    bool retryable() const {
        return kind_ == BackendErrorKind::rate_limit || kind_ == BackendErrorKind::transport;
    }

private:
    BackendErrorKind kind_;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual Completion complete(const ModelConfig& cfg, const std::vector<Message>& messages,
                                const CallTag& tag) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    /// One vector per text, order preserved, uniform dimension.
    /// Throws ConfigError on empty input and GatewayError on dimension drift.
    virtual std::vector<EmbeddingVector> embed(const ModelConfig& cfg,
                                               const std::vector<std::string>& texts) = 0;
};

// ----------------------------------------------------------------------------
// Scripted backends: the deterministic offline substrate used by all tests.
// ----------------------------------------------------------------------------

/// One canned reply. Lookups try (question_id, step, role) first, then
/// (question_id, *, role), then (*, *, role). Multiple entries under the
/// same key are consumed in order; the last one repeats. Entries may script
/// an error kind instead of text to exercise the retry path.
struct ScriptEntry {
    std::string question_id; // "*" matches any
    int step = -1;           // -1 matches any
    std::string role;
    std::string text;
    long long input_tokens = -1;  // -1: derive from prompt word count
    long long output_tokens = -1; // -1: derive from reply word count
    long long reasoning_tokens = 0;
    std::string error; // "", "rate_limit", "transport", "auth"
};

class ScriptedChatBackend : public ChatBackend {
public:
    ScriptedChatBackend() = default;
    explicit ScriptedChatBackend(std::vector<ScriptEntry> entries);
    static ScriptedChatBackend from_json_file(const std::string& path);

    void add(ScriptEntry entry);
    Completion complete(const ModelConfig& cfg, const std::vector<Message>& messages,
                        const CallTag& tag) override;

private:
    struct Cursor {
        std::vector<ScriptEntry> entries;
        std::size_t next = 0;
    };
    std::map<std::string, Cursor> exact_;    // qid|step|role
    std::map<std::string, Cursor> by_role_;  // qid|*|role
    std::map<std::string, Cursor> fallback_; // *|*|role
    std::mutex mutex_;

    const ScriptEntry* fetch(const CallTag& tag);
};

/// Embeds by exact text lookup; unknown text is an error. Scripts are
/// {"dim": d, "vectors": {text: [floats]}}.
class ScriptedEmbeddingBackend : public EmbeddingBackend {
public:
    ScriptedEmbeddingBackend(int dim, std::map<std::string, std::vector<float>> vectors);
    static ScriptedEmbeddingBackend from_json_file(const std::string& path);
    std::vector<EmbeddingVector> embed(const ModelConfig& cfg,
                                       const std::vector<std::string>& texts) override;

private:
    int dim_;
    std::map<std::string, std::vector<float>> vectors_;
};

/// Deterministic pseudo-encoder: every text maps to a unit vector seeded by
/// the FNV hash of its normalized form. No network, stable across runs and
/// platforms; used for offline end-to-end pipelines.
class HashEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HashEmbeddingBackend(int dim = 64) : dim_(dim) {}
    std::vector<EmbeddingVector> embed(const ModelConfig& cfg,
                                       const std::vector<std::string>& texts) override;

private:
    int dim_;
};

// ----------------------------------------------------------------------------
// Gateway: retry policy, accounting, auditing.
// ----------------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 5;
    int base_delay_ms = 250;
    int max_delay_ms = 8000;
    std::uint64_t jitter_seed = 0;
    std::function<void(int)> sleep_ms; // injectable; defaults to a real sleep
};

struct CallRecord {
    std::string model_id;
    CallTag tag;
    std::vector<Message> messages;
    Completion completion;
    bool failed = false;
    std::string error;
};

struct UsageTotals {
    long long calls = 0;
    long long input_tokens = 0;
    long long output_tokens = 0;
    long long reasoning_tokens = 0;
};

class PriceTable {
public:
    PriceTable() = default;
    static PriceTable load_json_file(const std::string& path);
    void set(const std::string& model_id, Money input_per_1k, Money output_per_1k);
    bool has(const std::string& model_id) const;
    /// Throws ConfigError when the model has no price entry.
    Money cost(const std::string& model_id, long long input_tokens,
               long long output_tokens) const;

private:
    struct Entry {
        Money input_per_1k;
        Money output_per_1k;
    };
    std::map<std::string, Entry> entries_;
};

struct UsageRow {
    std::string model_id;
    long long input_tokens = 0;
    long long output_tokens = 0;
};

/// Exact total cost of a usage log under the price table.
Money accumulate_cost(const std::vector<UsageRow>& usages, const PriceTable& prices);

class Gateway {
public:
    Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry = {},
            int max_in_flight = 8);

    /// Sends messages (first message must be the system/instruction role),
    /// retrying retryable failures with exponential backoff and jitter.
    /// Truncated completions are returned, not raised. Throws GatewayError
    /// after the retry budget or on non-retryable failures.
    Completion complete(const ModelConfig& cfg, const std::vector<Message>& messages,
                        const CallTag& tag);

    std::map<std::string, UsageTotals> usage() const;
    void enable_recording(bool on);
    std::vector<CallRecord> drain_records();

private:
    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy retry_;
    int max_in_flight_;
    int in_flight_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable slot_free_;
    std::map<std::string, UsageTotals> usage_;
    bool recording_ = false;
    std::vector<CallRecord> records_;
    std::uint64_t rng_state_;
};

/// Wraps an embedding backend with batching and input checks.
std::vector<EmbeddingVector> embed_texts(EmbeddingBackend& backend, const ModelConfig& cfg,
                                         const std::vector<std::string>& texts);

} // namespace hoplab
