#pragma once

#include <atomic>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hoplab/dataset.hpp"
#include "hoplab/gateway.hpp"
#include "hoplab/index.hpp"
#include "hoplab/money.hpp"

namespace hoplab {

/// One loop step: one retrieval plus the hypothesis generated after
/// observing that step's passages.
struct StepRecord {
    int step = 0; // 1-based
    std::string query;
    std::vector<ScoredChunk> retrieved; // sorted by score descending
    std::string partial_answer;
    long long query_tokens = 0;  // planner output that produced this step's query
    long long answer_tokens = 0; // partial-answer output
};

/// Full trajectory of one iterative run.
struct RunRecord {
    static constexpr int kSchemaVersion = 1;

    std::string question_id;
    std::string model_id;
    std::vector<StepRecord> steps;
    std::string final_answer;
    std::string composer_text;
    std::vector<std::string> citations; // chunk_ids the composer cited
    int finalized_step = 0;
    bool forced_finalize = false;    // budget exhausted vs voluntary FINALIZE
    bool protocol_violation = false; // planner failed to parse twice
    bool unanswered = false;         // composer truncated, no final answer
    bool failed = false;             // gateway failure mid-run
    std::string failure;
    long long total_input_tokens = 0;
    long long total_output_tokens = 0;
    Money cost;
    double duration_ms = 0.0;
};

struct ViewPassage {
    Chunk chunk;
    double score = 0.0;
    int source_step = 0; // earliest step that retrieved it
};

/// Curated evidence view: everything the model sees at one decision point.
struct ContextView {
    std::string question;
    int step = 0;
    std::vector<ViewPassage> passages;        // history top-2s first, then current
    std::vector<std::string> prior_queries;   // index i = step i+1
    std::vector<std::string> prior_partials;  // index i = step i+1 (may be shorter)
    std::size_t passage_count() const { return passages.size(); }
    bool has_chunk(const std::string& chunk_id) const;
};

struct PlannerAction {
    enum class Kind { retrieve, finalize };
    Kind kind = Kind::finalize;
    std::string query; // non-empty iff kind == retrieve
};

/// Text -> scored chunks. The production implementation embeds the query
/// and searches a VectorIndex; tests may script trajectories directly.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<ScoredChunk> retrieve(const std::string& query, int k) = 0;
    virtual long long query_count() const { return 0; }
};

class IndexRetriever : public Retriever {
public:
    IndexRetriever(const VectorIndex& index, EmbeddingBackend& embedder,
                   ModelConfig embedder_cfg);
    std::vector<ScoredChunk> retrieve(const std::string& query, int k) override;
    long long query_count() const override { return queries_.load(); }

private:
    const VectorIndex& index_;
    EmbeddingBackend& embedder_;
    ModelConfig embedder_cfg_;
    std::atomic<long long> queries_{0};
};

/// Builds the evidence view for the latest step: all of current.retrieved,
/// the top-2 passages of every earlier step, prior queries and partial
/// answers, deduplicated by chunk_id (earliest provenance, highest score).
ContextView curate_context(const std::string& question_text,
                           std::span<const StepRecord> history, const StepRecord& current);

/// Parses "RETRIEVE: <query>" / "FINALIZE"; nullopt when malformed.
std::optional<PlannerAction> parse_planner_reply(std::string_view reply);

/// The text after the last "Final Answer:" marker (whole reply when absent),
/// with citation markers removed.
std::string extract_final_answer(std::string_view composer_text);

/// Unique [chunk:<id>] citations in order of first appearance.
std::vector<std::string> extract_citations(std::string_view text);

struct ControllerOptions {
    int budget = 5;
    int top_k = 10;
    const PriceTable* prices = nullptr; // optional; cost stays zero without it
    bool deterministic = false;         // zero wall-clock fields for replay
};

/// One full iterative run: mandatory step-1 retrieval seeded with the
/// question text, then plan/retrieve until FINALIZE or the budget, then the
/// conservative composer. Gateway failures mark the run failed and keep the
/// partial trajectory.
RunRecord run_iterative(const Question& question, Retriever& retriever, Gateway& gateway,
                        const ModelConfig& model, const ControllerOptions& options = {});

/// Exposed for the planner protocol: one reprompt on malformed output, then
/// a forced Finalize flagged as a protocol violation.
struct PlanOutcome {
    PlannerAction action;
    bool protocol_violation = false;
    long long input_tokens = 0;
    long long output_tokens = 0;
};
PlanOutcome plan_step(const ContextView& view, Gateway& gateway, const ModelConfig& model,
                      const std::string& question_id);

/// Message assembly, shared with audits and tests.
std::vector<Message> build_partial_messages(const ContextView& view);
std::vector<Message> build_planner_messages(const ContextView& view);
std::vector<Message> build_composer_messages(const ContextView& view);
std::string render_view(const ContextView& view);

} // namespace hoplab
