#include "hoplab/evaluator.hpp"

#include <algorithm>
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

std::optional<bool> parse_verdict(std::string_view reply) {
    std::string t = text::casefold(trim(reply));
    while (!t.empty() && (t.back() == '.' || t.back() == '!')) t.pop_back();
    if (t == "true") return true;
    if (t == "false") return false;
    // Tolerate a labelled last line ("answer: true").
    auto last_nl = t.find_last_of('\n');
    std::string last = trim(last_nl == std::string::npos ? t : t.substr(last_nl + 1));
    if (last.rfind("answer:", 0) == 0) {
        std::string token = trim(last.substr(7));
        while (!token.empty() && (token.back() == '.' || token.back() == '!')) token.pop_back();
        if (token == "true") return true;
        if (token == "false") return false;
    }
    return std::nullopt;
}

} // namespace

VerifyOutcome verify_answer(const std::string& expected, const std::string& candidate,
                            Gateway& judge, const ModelConfig& judge_cfg,
                            const std::vector<std::string>& aliases, const CallTag& tag) {
    if (expected.empty()) throw ConfigError("verify_answer requires a non-empty expected answer");
    if (trim(candidate).empty()) return {false, false};
    if (text::casefold(trim(candidate)) == text::casefold(trim(expected))) {
        return {true, false}; // exact match needs no judgment
    }

    std::ostringstream user;
    user << "Expected: " << expected << "\n";
    if (!aliases.empty()) {
        user << "Known aliases of Expected: ";
        for (std::size_t i = 0; i < aliases.size(); ++i) {
            if (i > 0) user << "; ";
            user << aliases[i];
        }
        user << "\n";
    }
    user << "Candidate: " << candidate;

    std::vector<Message> messages{{"system", prompts::kVerifierSystem}, {"user", user.str()}};
    Completion first = judge.complete(judge_cfg, messages, tag);
    if (auto verdict = parse_verdict(first.text)) return {*verdict, false};

    messages.push_back({"assistant", first.text});
    messages.push_back({"user", "Answer with exactly: true or false"});
    Completion second = judge.complete(judge_cfg, messages, tag);
    if (auto verdict = parse_verdict(second.text)) return {*verdict, false};
    return {false, true}; // flagged for manual review
}

std::string no_context_user_prompt(const Question& q) { return "Question: " + q.text; }

std::string gold_context_user_prompt(const Question& q) {
    std::ostringstream os;
    os << "Question: " << q.text << "\n\nSupporting paragraphs:\n";
    for (const auto& hop : q.hops) {
        os << "\nHop " << hop.index << ": " << hop.gold_paragraph << "\n";
    }
    return os.str();
}

namespace {

RegimeResult score_static(const Question& q, Gateway& gateway, const ModelConfig& model,
                          Gateway& judge, const ModelConfig& judge_cfg,
                          const EvalOptions& options, Regime regime, const std::string& prompt,
                          const std::string& system_prompt) {
    RegimeResult cell;
    cell.question_id = q.question_id;
    cell.model_id = model.model_id;
    cell.regime = regime;

    const CallTag tag{q.question_id, 0, to_string(regime)};
    Completion c = gateway.complete(model, {{"system", system_prompt}, {"user", prompt}}, tag);
    cell.tokens_in = c.input_tokens;
    cell.tokens_out = c.output_tokens;
    if (options.prices != nullptr && options.prices->has(model.model_id)) {
        cell.cost = options.prices->cost(model.model_id, c.input_tokens, c.output_tokens);
    }

    if (c.truncated) {
        cell.unanswered = true;
        cell.correct = false;
        return cell;
    }
    cell.answer = extract_final_answer(c.text);
    auto verdict = verify_answer(q.gold_answer, cell.answer, judge, judge_cfg, q.aliases,
                                 CallTag{q.question_id, 0, "verify:" + to_string(regime)});
    cell.correct = verdict.correct;
    cell.needs_review = verdict.needs_review;
    return cell;
}

} // namespace

RegimeResult run_no_context(const Question& q, Gateway& gateway, const ModelConfig& model,
                            Gateway& judge, const ModelConfig& judge_cfg,
                            const EvalOptions& options) {
    return score_static(q, gateway, model, judge, judge_cfg, options, Regime::no_context,
                        no_context_user_prompt(q), prompts::kNoContextSystem);
}

RegimeResult run_gold_context(const Question& q, Gateway& gateway, const ModelConfig& model,
                              Gateway& judge, const ModelConfig& judge_cfg,
                              const EvalOptions& options) {
    for (const auto& hop : q.hops) {
        if (hop.gold_paragraph.empty()) {
            throw ValidationError(q.question_id + ": hop " + std::to_string(hop.index) +
                                  " lacks a gold paragraph");
        }
    }
    return score_static(q, gateway, model, judge, judge_cfg, options, Regime::gold_context,
                        gold_context_user_prompt(q), prompts::kGoldContextSystem);
}

RegimeResult run_iterative_regime(const Question& q, Retriever& retriever, Gateway& gateway,
                                  const ModelConfig& model, Gateway& judge,
                                  const ModelConfig& judge_cfg, const EvalOptions& options,
                                  RunRecord* out_run) {
    ControllerOptions copts = options.controller;
    copts.prices = options.prices;
    RunRecord run = run_iterative(q, retriever, gateway, model, copts);
    if (out_run != nullptr) *out_run = run;
    if (run.failed) {
        throw GatewayError("iterative run failed for " + q.question_id + ": " + run.failure);
    }

    RegimeResult cell;
    cell.question_id = q.question_id;
    cell.model_id = model.model_id;
    cell.regime = Regime::iterative;
    cell.answer = run.final_answer;
    cell.unanswered = run.unanswered;
    cell.tokens_in = run.total_input_tokens;
    cell.tokens_out = run.total_output_tokens;
    cell.cost = run.cost;
    cell.run_ref = q.question_id + "#" + model.model_id;
    if (run.unanswered) {
        cell.correct = false;
    } else {
        auto verdict = verify_answer(q.gold_answer, run.final_answer, judge, judge_cfg, q.aliases,
                                     CallTag{q.question_id, 0, "verify:iterative"});
        cell.correct = verdict.correct;
        cell.needs_review = verdict.needs_review;
    }
    return cell;
}

std::string to_string(DifficultyLabel::Band band) {
    switch (band) {
        case DifficultyLabel::Band::easy: return "easy";
        case DifficultyLabel::Band::medium: return "medium";
        case DifficultyLabel::Band::hard: return "hard";
        case DifficultyLabel::Band::unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

DifficultyLabel::Band difficulty_band(int wrong_count) {
    if (wrong_count <= 2) return DifficultyLabel::Band::easy;
    if (wrong_count >= 5 && wrong_count <= 7) return DifficultyLabel::Band::medium;
    if (wrong_count >= 9 && wrong_count <= 11) return DifficultyLabel::Band::hard;
    return DifficultyLabel::Band::unlabeled;
}

std::vector<DifficultyLabel> stratify_difficulty(const ResultMatrix& matrix, Regime regime) {
    matrix.require_complete(regime);
    const auto models = matrix.models();
    std::vector<DifficultyLabel> labels;
    for (const auto& q : matrix.questions()) {
        DifficultyLabel label;
        label.question_id = q;
        for (const auto& m : models) {
            const auto* cell = matrix.find(m, q, regime);
            if (cell != nullptr && !cell->correct) ++label.wrong_count;
        }
        label.label = difficulty_band(label.wrong_count);
        labels.push_back(std::move(label));
    }
    return labels;
}

} // namespace hoplab
