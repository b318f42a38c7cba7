#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hoplab/controller.hpp"
#include "hoplab/dataset.hpp"
#include "hoplab/gateway.hpp"
#include "hoplab/matrix.hpp"

namespace hoplab {

struct VerifyOutcome {
    bool correct = false;
    bool needs_review = false; // judge produced neither token twice
};

/// LLM-judge answer equivalence. Gold goes in the Expected slot, the model
/// reply in Candidate; the judge's strict true/false token is parsed, with
/// one reprompt before scoring false and flagging for manual review.
/// An exact string match (after alias expansion) short-circuits the judge.
VerifyOutcome verify_answer(const std::string& expected, const std::string& candidate,
                            Gateway& judge, const ModelConfig& judge_cfg,
                            const std::vector<std::string>& aliases, const CallTag& tag);

struct EvalOptions {
    const PriceTable* prices = nullptr;
    ControllerOptions controller;
};

/// Question-only prompt, parametric memory alone; no corpus text anywhere.
RegimeResult run_no_context(const Question& q, Gateway& gateway, const ModelConfig& model,
                            Gateway& judge, const ModelConfig& judge_cfg,
                            const EvalOptions& options = {});

/// Question plus every gold paragraph in hop order, one shot, no retrieval.
RegimeResult run_gold_context(const Question& q, Gateway& gateway, const ModelConfig& model,
                              Gateway& judge, const ModelConfig& judge_cfg,
                              const EvalOptions& options = {});

/// Full controller run; the RunRecord trajectory is returned through out_run.
RegimeResult run_iterative_regime(const Question& q, Retriever& retriever, Gateway& gateway,
                                  const ModelConfig& model, Gateway& judge,
                                  const ModelConfig& judge_cfg, const EvalOptions& options,
                                  RunRecord* out_run);

/// Prompt text for the two static regimes, exposed for prompt audits.
std::string no_context_user_prompt(const Question& q);
std::string gold_context_user_prompt(const Question& q);

struct DifficultyLabel {
    enum class Band { easy, medium, hard, unlabeled };
    std::string question_id;
    int wrong_count = 0;
    Band label = Band::unlabeled;
};

std::string to_string(DifficultyLabel::Band band);

/// easy: <= 2 models wrong; medium: 5-7; hard: 9-11; anything else is
/// surfaced as unlabeled rather than forced into a band.
DifficultyLabel::Band difficulty_band(int wrong_count);

/// Requires a filled (model x question) slice for the regime.
std::vector<DifficultyLabel> stratify_difficulty(const ResultMatrix& matrix, Regime regime);

} // namespace hoplab
