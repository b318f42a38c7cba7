#include "hoplab/controller.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <map>
#include <sstream>

#include "hoplab/errors.hpp"
#include "hoplab/prompts.hpp"
#include "hoplab/text.hpp"

namespace hoplab {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool iequals_prefix(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

} // namespace

bool ContextView::has_chunk(const std::string& chunk_id) const {
    return std::any_of(passages.begin(), passages.end(),
                       [&](const ViewPassage& p) { return p.chunk.chunk_id == chunk_id; });
}

IndexRetriever::IndexRetriever(const VectorIndex& index, EmbeddingBackend& embedder,
                               ModelConfig embedder_cfg)
    : index_(index), embedder_(embedder), embedder_cfg_(std::move(embedder_cfg)) {}

std::vector<ScoredChunk> IndexRetriever::retrieve(const std::string& query, int k) {
    queries_.fetch_add(1);
    const std::string normalized = text::normalize_text(query);
    if (normalized.empty()) return {};
    auto vectors = embed_texts(embedder_, embedder_cfg_, {normalized});
    return index_.search(vectors.front(), k);
}

ContextView curate_context(const std::string& question_text, std::span<const StepRecord> history,
                           const StepRecord& current) {
    ContextView view;
    view.question = question_text;
    view.step = current.step;

    for (const auto& h : history) {
        view.prior_queries.push_back(h.query);
        if (!h.partial_answer.empty()) view.prior_partials.push_back(h.partial_answer);
    }
    view.prior_queries.push_back(current.query);
    if (!current.partial_answer.empty()) view.prior_partials.push_back(current.partial_answer);

    // Top-2 per earlier step, then all current passages; first occurrence
    // keeps its provenance, later duplicates only raise the score.
    std::map<std::string, std::size_t> by_id;
    auto add = [&](const ScoredChunk& sc, int source_step) {
        auto it = by_id.find(sc.chunk.chunk_id);
        if (it == by_id.end()) {
            by_id[sc.chunk.chunk_id] = view.passages.size();
            view.passages.push_back(ViewPassage{sc.chunk, sc.score, source_step});
        } else {
            view.passages[it->second].score = std::max(view.passages[it->second].score, sc.score);
        }
    };

    for (const auto& h : history) {
        std::vector<const ScoredChunk*> ranked;
        ranked.reserve(h.retrieved.size());
        for (const auto& sc : h.retrieved) ranked.push_back(&sc);
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
            if (a->score != b->score) return a->score > b->score;
            return a->chunk.chunk_id < b->chunk.chunk_id;
        });
        const std::size_t take = std::min<std::size_t>(2, ranked.size());
        for (std::size_t i = 0; i < take; ++i) add(*ranked[i], h.step);
    }
    for (const auto& sc : current.retrieved) add(sc, current.step);
    return view;
}

std::optional<PlannerAction> parse_planner_reply(std::string_view reply) {
    const std::string body = trim(reply);
    if (body.empty()) return std::nullopt;
    if (iequals_prefix(body, "FINALIZE")) {
        // Trailing punctuation is tolerated; trailing words are not.
        const std::string rest = trim(body.substr(8));
        const bool clean = std::none_of(rest.begin(), rest.end(), [](unsigned char c) {
            return std::isalnum(c);
        });
        if (clean) return PlannerAction{PlannerAction::Kind::finalize, {}};
        return std::nullopt;
    }
    if (iequals_prefix(body, "RETRIEVE:")) {
        // Take the first line only; prompts ask for exactly one line.
        std::string query = body.substr(9);
        if (auto nl = query.find('\n'); nl != std::string::npos) query = query.substr(0, nl);
        query = trim(query);
        if (query.empty()) return std::nullopt;
        return PlannerAction{PlannerAction::Kind::retrieve, query};
    }
    return std::nullopt;
}

std::vector<std::string> extract_citations(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find("[chunk:", pos)) != std::string_view::npos) {
        const std::size_t close = text.find(']', pos);
        if (close == std::string_view::npos) break;
        std::string id(text.substr(pos + 7, close - pos - 7));
        if (!id.empty() && std::find(out.begin(), out.end(), id) == out.end()) {
            out.push_back(std::move(id));
        }
        pos = close + 1;
    }
    return out;
}

std::string extract_final_answer(std::string_view composer_text) {
    constexpr std::string_view kMarker = "Final Answer:";
    std::size_t best = std::string_view::npos;
    for (std::size_t pos = 0;;) {
        pos = composer_text.find(kMarker, pos);
        if (pos == std::string_view::npos) break;
        best = pos;
        pos += kMarker.size();
    }
    std::string answer;
    if (best == std::string_view::npos) {
        answer = std::string(composer_text);
    } else {
        answer = std::string(composer_text.substr(best + kMarker.size()));
        if (auto nl = answer.find('\n'); nl != std::string::npos) answer = answer.substr(0, nl);
    }
    return trim(text::strip_citations(answer));
}

std::string render_view(const ContextView& view) {
    std::ostringstream os;
    os << "Question: " << view.question << "\n";
    os << "Step: " << view.step << "\n";

    if (!view.prior_queries.empty()) {
        os << "\nQueries so far:\n";
        for (std::size_t i = 0; i < view.prior_queries.size(); ++i) {
            os << "Step " << (i + 1) << " query: " << view.prior_queries[i] << "\n";
        }
    }
    if (!view.prior_partials.empty()) {
        os << "\nPartial answers so far:\n";
        for (std::size_t i = 0; i < view.prior_partials.size(); ++i) {
            os << "Step " << (i + 1) << " partial answer: " << view.prior_partials[i] << "\n";
        }
    }

    bool any_history = false;
    for (const auto& p : view.passages) {
        if (p.source_step != view.step) {
            if (!any_history) {
                os << "\nBest passages from earlier steps:\n";
                any_history = true;
            }
            os << "[chunk:" << p.chunk.chunk_id << "] (step " << p.source_step << ") "
               << p.chunk.text << "\n";
        }
    }
    os << "\nPassages retrieved this step:\n";
    for (const auto& p : view.passages) {
        if (p.source_step == view.step) {
            os << "[chunk:" << p.chunk.chunk_id << "] " << p.chunk.text << "\n";
        }
    }
    return os.str();
}

std::vector<Message> build_partial_messages(const ContextView& view) {
    return {{"system", prompts::kPartialAnswerSystem}, {"user", render_view(view)}};
}

std::vector<Message> build_planner_messages(const ContextView& view) {
    return {{"system", prompts::kPlannerSystem}, {"user", render_view(view)}};
}

std::vector<Message> build_composer_messages(const ContextView& view) {
    return {{"system", prompts::kComposerSystem}, {"user", render_view(view)}};
}

PlanOutcome plan_step(const ContextView& view, Gateway& gateway, const ModelConfig& model,
                      const std::string& question_id) {
    PlanOutcome out;
    auto messages = build_planner_messages(view);
    const CallTag tag{question_id, view.step, "plan"};

    Completion first = gateway.complete(model, messages, tag);
    out.input_tokens += first.input_tokens;
    out.output_tokens += first.output_tokens;
    if (auto action = parse_planner_reply(first.text)) {
        out.action = *action;
        return out;
    }

    // One corrective reprompt, then a forced Finalize.
    messages.push_back({"assistant", first.text});
    messages.push_back({"user", "Reply with exactly one line: RETRIEVE: <sub-query> or FINALIZE"});
    Completion second = gateway.complete(model, messages, tag);
    out.input_tokens += second.input_tokens;
    out.output_tokens += second.output_tokens;
    if (auto action = parse_planner_reply(second.text)) {
        out.action = *action;
        return out;
    }
    out.action = PlannerAction{PlannerAction::Kind::finalize, {}};
    out.protocol_violation = true;
    return out;
}

RunRecord run_iterative(const Question& question, Retriever& retriever, Gateway& gateway,
                        const ModelConfig& model, const ControllerOptions& options) {
    if (options.budget < 1) throw ConfigError("controller budget must be >= 1");
    if (options.top_k < 1) throw ConfigError("controller top_k must be >= 1");

    RunRecord run;
    run.question_id = question.question_id;
    run.model_id = model.model_id;
    const auto t0 = std::chrono::steady_clock::now();

    auto account = [&](const Completion& c) {
        run.total_input_tokens += c.input_tokens;
        run.total_output_tokens += c.output_tokens;
    };

    try {
        std::string query = question.text; // mandatory first retrieval, untransformed
        long long pending_query_tokens = 0;
        ContextView final_view;

        for (int step = 1; step <= options.budget; ++step) {
            StepRecord rec;
            rec.step = step;
            rec.query = query;
            rec.query_tokens = pending_query_tokens;
            rec.retrieved = retriever.retrieve(query, options.top_k);

            ContextView pre_view =
                curate_context(question.text, std::span(run.steps), rec);
            Completion partial = gateway.complete(model, build_partial_messages(pre_view),
                                                  CallTag{question.question_id, step, "partial"});
            account(partial);
            rec.partial_answer = partial.text;
            rec.answer_tokens = partial.output_tokens;
            run.steps.push_back(std::move(rec));

            ContextView view = curate_context(
                question.text, std::span(run.steps).first(run.steps.size() - 1),
                run.steps.back());

            if (step == options.budget) {
                run.forced_finalize = true;
                final_view = std::move(view);
                break;
            }
            PlanOutcome plan = plan_step(view, gateway, model, question.question_id);
            run.total_input_tokens += plan.input_tokens;
            run.total_output_tokens += plan.output_tokens;
            if (plan.protocol_violation) run.protocol_violation = true;
            if (plan.action.kind == PlannerAction::Kind::finalize) {
                final_view = std::move(view);
                break;
            }
            query = plan.action.query;
            pending_query_tokens = plan.output_tokens;
        }

        run.finalized_step = static_cast<int>(run.steps.size());

        Completion composed =
            gateway.complete(model, build_composer_messages(final_view),
                             CallTag{question.question_id, run.finalized_step, "compose"});
        account(composed);
        run.composer_text = composed.text;
        run.citations = extract_citations(composed.text);
        if (composed.truncated) {
            run.unanswered = true; // no usable final answer
        } else {
            run.final_answer = extract_final_answer(composed.text);
        }
    } catch (const GatewayError& e) {
        run.failed = true;
        run.failure = e.what();
        run.finalized_step = static_cast<int>(run.steps.size());
    }

    if (!options.deterministic) {
        run.duration_ms = std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
    }
    if (options.prices != nullptr && options.prices->has(model.model_id)) {
        run.cost = options.prices->cost(model.model_id, run.total_input_tokens,
                                        run.total_output_tokens);
    }
    return run;
}

} // namespace hoplab
