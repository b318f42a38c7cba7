#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoplab/controller.hpp"
#include "hoplab/dataset.hpp"
#include "hoplab/gateway.hpp"

namespace hoplab {

enum class AuditorMode { deterministic, judge, both };
AuditorMode parse_auditor_mode(const std::string& s);
std::string to_string(AuditorMode m);

struct HopHit {
    int hop_index = 0;
    std::optional<int> first_hit_step; // absent = missed
    bool late_hit = false;             // first_hit_step > hop_index
};

struct CoverageAudit {
    std::vector<HopHit> hops;
    std::vector<int> missed_hops;
    std::vector<int> late_hits;
    double hop_coverage = 0.0; // covered hops / num_hops
    bool judge_fallback = false;
};

struct StepFlags {
    int step = 0;
    // The four mutually exclusive intent flags.
    bool vague = false;
    bool over_broad = false;
    bool fusion = false;
    bool off_topic = false;
    // Independent flags.
    bool compound = false;
    bool anchored = false;          // forced false at step 1
    bool hallucinated_term = false; // forced false at step 1
    bool carry_drop = false;        // defined for steps > 1 only
    bool contradiction_with_prev = false;
    std::optional<int> predicted_hop;
    bool is_next_logical_hop = false;
};

struct QueryAudit {
    std::vector<StepFlags> steps;
    bool distractor_latch = false;
    bool judge_fallback = false;
};

enum class Calibration { overconfident, underconfident, well_calibrated };
std::string to_string(Calibration c);

struct FinalAudit {
    bool composition_failure = false;
    double sufficiency = 0.0; // supported partial-answer sentences / total
    Calibration calibration = Calibration::well_calibrated;
    bool distractor_latch = false;
    std::optional<int> earliest_sufficient_step;
    bool judge_fallback = false;
};

struct DiagnosticThresholds {
    double coverage = 0.8;    // c-hat cut for overconfidence
    double sufficiency = 0.6; // s-hat cut for overconfidence
};

struct DiagnosticReport {
    static constexpr int kSchemaVersion = 1;
    std::string question_id;
    std::string model_id;
    std::string mode; // "deterministic" | "judge"
    CoverageAudit coverage;
    QueryAudit queries;
    FinalAudit final;
    bool verdict = false; // the verifier's call on the run's final answer
};

// ---------------------------------------------------------------------------
// Deterministic building blocks. The anchor extractor approximates the
// judge-based notion of "salient anchor" with versioned rules: chemical
// formulae (letter+digit or bond punctuation), mixed-case tokens (LiCl),
// acronyms (HAT), and capitalized non-sentence-initial tokens, all filtered
// through a generic-word list.
// ---------------------------------------------------------------------------

std::vector<std::string> extract_anchors(std::string_view text);

/// Surface forms used when matching a hop: entity, hop aliases, and for the
/// final hop also the question's gold answer and aliases.
std::vector<std::string> hop_surface_forms(const Question& q, int hop_index);

/// Deterministic coverage audit: a hop is covered iff any retrieved snippet
/// or any query text of any step contains one of its surface forms
/// (case-folded, word-boundary-aware).
CoverageAudit audit_coverage(const RunRecord& run, const Question& q);

/// carry_drop per step (index 0 = step 1, always false): anchors exist in
/// the previous partial answer and the query carries none of them.
std::vector<bool> audit_anchor_carry(const RunRecord& run);

/// Deterministic per-step query flags plus the run-level distractor latch.
QueryAudit audit_queries(const RunRecord& run, const Question& q);

/// Deterministic final audit. `verdict` comes from the verifier.
FinalAudit audit_final(const RunRecord& run, const Question& q, bool verdict,
                       const CoverageAudit& coverage, const QueryAudit& queries,
                       const DiagnosticThresholds& thresholds = {});

/// Supported-sentence fraction over all partial answers (citations stripped,
/// terminal-punctuation segmentation).
double sufficiency_score(const RunRecord& run);

/// First step whose accumulated snippets contain the answer entity.
std::optional<int> earliest_sufficient_step(const RunRecord& run, const Question& q);

Calibration classify_calibration(int finalized_step, int num_hops, double hop_coverage,
                                 double sufficiency, std::optional<int> earliest_sufficient,
                                 const DiagnosticThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Judge-mode auditors: drive the shipped auditor prompts, parse their JSON,
// and fall back to the deterministic path (flagging the divergence) when the
// reply stays unparseable after one reprompt.
// ---------------------------------------------------------------------------

CoverageAudit audit_coverage_judge(const RunRecord& run, const Question& q, Gateway& judge,
                                   const ModelConfig& judge_cfg);
QueryAudit audit_queries_judge(const RunRecord& run, const Question& q, Gateway& judge,
                               const ModelConfig& judge_cfg);
FinalAudit audit_final_judge(const RunRecord& run, const Question& q, bool verdict,
                             const QueryAudit& queries, Gateway& judge,
                             const ModelConfig& judge_cfg,
                             const DiagnosticThresholds& thresholds = {});

/// Complete report in one mode. judge/judge_cfg may be null in deterministic
/// mode.
DiagnosticReport audit_run(const RunRecord& run, const Question& q, bool verdict,
                           AuditorMode mode, Gateway* judge, const ModelConfig* judge_cfg,
                           const DiagnosticThresholds& thresholds = {});

/// Payload shown to judge auditors; exposed so scripted tests can assert on it.
std::string render_run_payload(const RunRecord& run, const Question& q);

// ---------------------------------------------------------------------------
// Mode agreement harness.
// ---------------------------------------------------------------------------

struct FieldAgreement {
    long long agree = 0;
    long long total = 0;
};

struct Disagreement {
    std::string question_id;
    std::string model_id;
    std::string field;
    std::string deterministic_value;
    std::string judge_value;
};

struct AgreementMatrix {
    std::map<std::string, FieldAgreement> fields;
    std::vector<Disagreement> disagreements;
    double overall() const;
};

/// Field-by-field comparison of paired reports (same run, both modes).
AgreementMatrix compare_reports(const std::vector<DiagnosticReport>& deterministic,
                                const std::vector<DiagnosticReport>& judge);

} // namespace hoplab
