#include "hoplab/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "hoplab/errors.hpp"
#include "hoplab/hash.hpp"
#include "hoplab/text.hpp"

namespace hoplab {

using nlohmann::json;

namespace {

long long word_count(std::string_view s) {
    long long n = 0;
    bool in_word = false;
    for (char c : s) {
        const bool ws = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!ws && !in_word) ++n;
        in_word = !ws;
    }
    return n;
}

std::string first_words(std::string_view s, long long n) {
    if (n <= 0) return {};
    long long seen = 0;
    bool in_word = false;
    std::size_t last_word_end = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        const bool ws = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!ws && !in_word) {
            if (seen == n) return std::string(s.substr(0, last_word_end));
            ++seen;
        }
        if (!ws) last_word_end = i + 1;
        in_word = !ws;
    }
    return std::string(s);
}

BackendErrorKind parse_error_kind(const std::string& s) {
    if (s == "rate_limit") return BackendErrorKind::rate_limit;
    if (s == "transport") return BackendErrorKind::transport;
    if (s == "auth") return BackendErrorKind::auth;
    return BackendErrorKind::protocol;
}

std::uint64_t xorshift64(std::uint64_t& state) {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
}

} // namespace

// ---------------------------------------------------------------------------
// ScriptedChatBackend
// ---------------------------------------------------------------------------

ScriptedChatBackend::ScriptedChatBackend(std::vector<ScriptEntry> entries) {
    for (auto& e : entries) add(std::move(e));
}

void ScriptedChatBackend::add(ScriptEntry entry) {
    const std::string step = entry.step < 0 ? "*" : std::to_string(entry.step);
    if (entry.question_id == "*") {
        fallback_["*|*|" + entry.role].entries.push_back(std::move(entry));
    } else if (entry.step < 0) {
        by_role_[entry.question_id + "|*|" + entry.role].entries.push_back(std::move(entry));
    } else {
        exact_[entry.question_id + "|" + step + "|" + entry.role].entries.push_back(
            std::move(entry));
    }
}

ScriptedChatBackend ScriptedChatBackend::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed script " + path + ": " + e.what());
    }
    if (!j.is_array()) throw ValidationError("script must be a JSON array: " + path);

    std::vector<ScriptEntry> entries;
    for (const auto& item : j) {
        ScriptEntry e;
        e.question_id = item.value("question_id", std::string("*"));
        e.step = item.value("step", -1);
        e.role = item.at("role").get<std::string>();
        e.text = item.value("text", std::string());
        e.input_tokens = item.value("input_tokens", -1LL);
        e.output_tokens = item.value("output_tokens", -1LL);
        e.reasoning_tokens = item.value("reasoning_tokens", 0LL);
        e.error = item.value("error", std::string());
        entries.push_back(std::move(e));
    }
    return ScriptedChatBackend(std::move(entries));
}

const ScriptEntry* ScriptedChatBackend::fetch(const CallTag& tag) {
    auto take = [](Cursor& cur) -> const ScriptEntry* {
        if (cur.entries.empty()) return nullptr;
        const std::size_t i = std::min(cur.next, cur.entries.size() - 1);
        ++cur.next;
        return &cur.entries[i];
    };
    if (auto it = exact_.find(tag.question_id + "|" + std::to_string(tag.step) + "|" + tag.role);
        it != exact_.end()) {
        if (auto* e = take(it->second)) return e;
    }
    if (auto it = by_role_.find(tag.question_id + "|*|" + tag.role); it != by_role_.end()) {
        if (auto* e = take(it->second)) return e;
    }
    if (auto it = fallback_.find("*|*|" + tag.role); it != fallback_.end()) {
        if (auto* e = take(it->second)) return e;
    }
    return nullptr;
}

Completion ScriptedChatBackend::complete(const ModelConfig& cfg,
                                         const std::vector<Message>& messages,
                                         const CallTag& tag) {
    const ScriptEntry* entry;
    {
        std::lock_guard lock(mutex_);
        entry = fetch(tag);
    }
    if (entry == nullptr) {
        throw BackendError(BackendErrorKind::protocol,
                           "no scripted reply for question_id=" + tag.question_id +
                               " step=" + std::to_string(tag.step) + " role=" + tag.role);
    }
    if (!entry->error.empty()) {
        throw BackendError(parse_error_kind(entry->error), "scripted failure: " + entry->error);
    }

    Completion c;
    long long prompt_words = 0;
    for (const auto& m : messages) prompt_words += word_count(m.content);
    c.input_tokens = entry->input_tokens >= 0 ? entry->input_tokens : prompt_words;
    const long long scripted_out =
        entry->output_tokens >= 0 ? entry->output_tokens : word_count(entry->text);
    c.reasoning_tokens = entry->reasoning_tokens;

    if (scripted_out + entry->reasoning_tokens > cfg.max_output_tokens) {
        // Reasoning consumes the budget first; whatever is left carries text.
        c.truncated = true;
        c.output_tokens = cfg.max_output_tokens;
        c.text = first_words(entry->text, cfg.max_output_tokens - entry->reasoning_tokens);
    } else {
        c.output_tokens = scripted_out + entry->reasoning_tokens;
        c.text = entry->text;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Embedding backends
// ---------------------------------------------------------------------------

ScriptedEmbeddingBackend::ScriptedEmbeddingBackend(
    int dim, std::map<std::string, std::vector<float>> vectors)
    : dim_(dim), vectors_(std::move(vectors)) {}

ScriptedEmbeddingBackend ScriptedEmbeddingBackend::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding script: " + path);
    json j = json::parse(in);
    std::map<std::string, std::vector<float>> vectors;
    for (const auto& [text, vec] : j.at("vectors").items()) {
        vectors[text] = vec.get<std::vector<float>>();
    }
    return ScriptedEmbeddingBackend(j.at("dim").get<int>(), std::move(vectors));
}

std::vector<EmbeddingVector> ScriptedEmbeddingBackend::embed(
    const ModelConfig&, const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = vectors_.find(t);
        if (it == vectors_.end()) {
            throw GatewayError("no scripted embedding for text: " + t.substr(0, 60));
        }
        if (static_cast<int>(it->second.size()) != dim_) {
            throw GatewayError("scripted embedding has wrong dimension for: " + t.substr(0, 60));
        }
        out.push_back(Eigen::Map<const EmbeddingVector>(it->second.data(), dim_));
    }
    return out;
}

std::vector<EmbeddingVector> HashEmbeddingBackend::embed(const ModelConfig&,
                                                         const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        std::uint64_t state = fnv1a64(t);
        if (state == 0) state = 0x9e3779b97f4a7c15ULL;
        EmbeddingVector v(dim_);
        for (int i = 0; i < dim_; ++i) {
            const std::uint64_t r = xorshift64(state);
            // Map the top 24 bits to [-1, 1); exactly representable in float.
            v[i] = static_cast<float>(static_cast<double>(r >> 40) / 8388608.0 - 1.0);
        }
        const float norm = v.norm();
        if (norm > 0.0f) v /= norm;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingVector> embed_texts(EmbeddingBackend& backend, const ModelConfig& cfg,
                                         const std::vector<std::string>& texts) {
    if (texts.empty()) throw ConfigError("embed requires a non-empty batch");
    for (const auto& t : texts) {
        if (t.empty()) throw ConfigError("embed requires non-empty texts");
    }
    auto vectors = backend.embed(cfg, texts);
    if (vectors.size() != texts.size()) {
        throw GatewayError("embedding backend returned " + std::to_string(vectors.size()) +
                           " vectors for " + std::to_string(texts.size()) + " texts");
    }
    for (const auto& v : vectors) {
        if (v.size() != vectors.front().size()) {
            throw GatewayError("embedding dimension drift within batch");
        }
        if (!v.allFinite()) throw GatewayError("embedding contains non-finite values");
    }
    return vectors;
}

// ---------------------------------------------------------------------------
// PriceTable
// ---------------------------------------------------------------------------

namespace {
Money money_from_json(const json& v) {
    if (v.is_string()) return Money::parse(v.get<std::string>());
    if (v.is_number()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.12f", v.get<double>());
        return Money::parse(buf);
    }
    throw ConfigError("price must be a decimal string or number");
}
} // namespace

PriceTable PriceTable::load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open price table: " + path);
    json j = json::parse(in);
    PriceTable t;
    for (const auto& [model, entry] : j.items()) {
        t.set(model, money_from_json(entry.at("input_per_1k")),
              money_from_json(entry.at("output_per_1k")));
    }
    return t;
}

void PriceTable::set(const std::string& model_id, Money input_per_1k, Money output_per_1k) {
    entries_[model_id] = Entry{input_per_1k, output_per_1k};
}

bool PriceTable::has(const std::string& model_id) const { return entries_.count(model_id) > 0; }

Money PriceTable::cost(const std::string& model_id, long long input_tokens,
                       long long output_tokens) const {
    auto it = entries_.find(model_id);
    if (it == entries_.end()) throw ConfigError("no price entry for model: " + model_id);
    return Money::token_cost(input_tokens, it->second.input_per_1k) +
           Money::token_cost(output_tokens, it->second.output_per_1k);
}

Money accumulate_cost(const std::vector<UsageRow>& usages, const PriceTable& prices) {
    Money total;
    for (const auto& u : usages) total += prices.cost(u.model_id, u.input_tokens, u.output_tokens);
    return total;
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry, int max_in_flight)
    : backend_(std::move(backend)), retry_(std::move(retry)),
      max_in_flight_(std::max(1, max_in_flight)),
      rng_state_(retry_.jitter_seed ? retry_.jitter_seed : 0x2545F4914F6CDD1DULL) {
    if (!retry_.sleep_ms) {
        retry_.sleep_ms = [](int ms) {
            std::this_thread::sleep_for(std::chrono::milliseconds(ms));
        };
    }
}

Completion Gateway::complete(const ModelConfig& cfg, const std::vector<Message>& messages,
                             const CallTag& tag) {
    if (messages.empty()) throw ConfigError("complete requires at least one message");
    if (messages.front().role != "system") {
        throw ConfigError("first message must carry the system/instruction role");
    }

    {
        std::unique_lock lock(mutex_);
        slot_free_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
        ++in_flight_;
    }
    struct SlotRelease {
        Gateway* g;
        ~SlotRelease() {
            std::lock_guard lock(g->mutex_);
            --g->in_flight_;
            g->slot_free_.notify_one();
        }
    } release{this};

    std::string last_error;
    for (int attempt = 1;; ++attempt) {
        try {
            Completion c = backend_->complete(cfg, messages, tag);
            c.retries = attempt - 1;
            std::lock_guard lock(mutex_);
            auto& u = usage_[cfg.model_id];
            ++u.calls;
            u.input_tokens += c.input_tokens;
            u.output_tokens += c.output_tokens;
            u.reasoning_tokens += c.reasoning_tokens;
            if (recording_) records_.push_back(CallRecord{cfg.model_id, tag, messages, c});
            return c;
        } catch (const BackendError& e) {
            last_error = e.what();
            const bool out_of_budget = attempt >= retry_.max_attempts;
            if (!e.retryable() || out_of_budget) {
                std::lock_guard lock(mutex_);
                if (recording_) {
                    CallRecord r{cfg.model_id, tag, messages, Completion{}};
                    r.failed = true;
                    r.error = last_error;
                    records_.push_back(std::move(r));
                }
                throw GatewayError("backend call failed (" + std::to_string(attempt) +
                                   " attempts): " + last_error);
            }
            int delay = retry_.base_delay_ms;
            for (int i = 1; i < attempt; ++i) delay = std::min(delay * 2, retry_.max_delay_ms);
            std::uint64_t jitter;
            {
                std::lock_guard lock(mutex_);
                jitter = xorshift64(rng_state_);
            }
            const int jittered =
                delay / 2 + static_cast<int>(jitter % static_cast<std::uint64_t>(delay / 2 + 1));
            retry_.sleep_ms(jittered);
        }
    }
}

std::map<std::string, UsageTotals> Gateway::usage() const {
    std::lock_guard lock(mutex_);
    return usage_;
}

void Gateway::enable_recording(bool on) {
    std::lock_guard lock(mutex_);
    recording_ = on;
}

std::vector<CallRecord> Gateway::drain_records() {
    std::lock_guard lock(mutex_);
    return std::exchange(records_, {});
}

} // namespace hoplab
