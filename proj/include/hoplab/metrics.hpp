#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hoplab/dataset.hpp"
#include "hoplab/diagnostics.hpp"
#include "hoplab/evaluator.hpp"
#include "hoplab/matrix.hpp"

namespace hoplab::metrics {

// Reported percentages carry two decimals, percentage-point deltas one;
// every ratio also carries its numerator/denominator.

struct AccuracyCell {
    std::string model_id;
    Regime regime = Regime::no_context;
    long long correct = 0;
    long long total = 0;
    double accuracy_pct = 0.0; // rounded to 2 decimals
    double mean_output_tokens = 0.0;
};

std::vector<AccuracyCell> accuracy_by_regime(const ResultMatrix& matrix,
                                             const std::vector<Regime>& regimes);

struct SolvabilityRow {
    std::string model_id;
    long long parametric = 0;          // correct with no context
    long long gold_dependent = 0;      // unlocked by static gold evidence
    long long iterative_exclusive = 0; // solved only by the iterative loop
    long long not_solved = 0;
    long long total = 0;
    double parametric_pct = 0.0;
    double gold_dependent_pct = 0.0;
    double iterative_exclusive_pct = 0.0;
    double not_solved_pct = 0.0;
};

std::vector<SolvabilityRow> solvability_partition(const ResultMatrix& matrix);

struct RecoveryRow {
    std::string model_id;
    long long recoveries = 0;  // gold wrong -> iterative correct
    long long regressions = 0; // gold correct -> iterative wrong
    long long net_gain = 0;
};

std::vector<RecoveryRow> recoveries_regressions(const ResultMatrix& matrix);

struct PsrRow {
    std::string model_id;
    long long known = 0; // correct with no context
    long long suppressed = 0;
    std::optional<double> psr_pct; // absent when known == 0
};

std::vector<PsrRow> psr(const ResultMatrix& matrix);

/// Per-run facts consumed by PCR: finalized step count and whether the
/// coverage audit found a gap.
struct RunDiagInput {
    int steps = 0;
    bool coverage_gap = false;
};

struct PcrRow {
    std::string model_id;
    long long known = 0; // no-context-correct questions with > 1 hop
    long long effective = 0;
    long long ineffective = 0;
    long long non_compliant = 0;
    long long unclassified = 0; // stopped at step 1 with full coverage
    std::optional<double> pcr_pct;          // 2 decimals
    std::optional<double> success_rate_pct; // 1 decimal
};

/// The PCR and success-rate formulas applied to already-tabulated counts;
/// this is the route used to replay published figures.
PcrRow pcr_from_counts(const std::string& model_id, long long known, long long effective,
                       long long ineffective, long long non_compliant);

std::vector<PcrRow> pcr(const ResultMatrix& matrix, const std::vector<Question>& questions,
                        const std::map<std::pair<std::string, std::string>, RunDiagInput>&
                            run_info);

struct ImpactStat {
    std::string flag;
    std::string model_id; // empty = aggregate over all models
    std::string cohort = "no_context_wrong";
    bool defined = false;
    std::string reason; // set when !defined
    long long cohort_size = 0;
    long long n_with = 0;
    long long n_without = 0;
    double prevalence_pct = 0.0;              // 1 decimal
    std::optional<double> accuracy_with_pct;  // 1 decimal
    std::optional<double> accuracy_without_pct;
    std::optional<double> delta_pp; // accuracy(without) - accuracy(with), 1 decimal
    double damage_pp = 0.0;         // prevalence x delta, 1 decimal; 0 when undefined
};

/// true iff the report carries the named failure flag. Flags: coverage_gap,
/// overconfident, underconfident, distractor_latch, composition_failure,
/// carry_drop, vague, over_broad, fusion, off_topic.
bool flag_present(const DiagnosticReport& report, const std::string& flag);

/// Accuracy impact of a failure flag on the knowledge-gap cohort (questions
/// the model answered wrong with no context), measured on iterative cells.
ImpactStat conditional_impact(const ResultMatrix& matrix,
                              const std::vector<DiagnosticReport>& reports,
                              const std::string& flag,
                              const std::optional<std::string>& model_id = std::nullopt);

/// d = p x delta with p given in percent; rounded to 1 decimal.
double damage_index(double prevalence_pct, double delta_pp);

struct TokenScalingRow {
    std::string model_id;
    long long n_easy = 0;
    long long n_hard = 0;
    double mean_tokens_easy = 0.0;
    double mean_tokens_hard = 0.0;
    std::optional<double> factor; // mean hard / mean easy
};

std::vector<TokenScalingRow> token_scaling_factor(const ResultMatrix& matrix,
                                                  const std::vector<DifficultyLabel>& labels,
                                                  Regime regime = Regime::iterative);

struct TokenCvRow {
    std::string model_id;
    std::optional<double> cv_easy_pct;
    std::optional<double> cv_medium_pct;
    std::optional<double> cv_hard_pct;
    std::optional<double> cv_pct; // mean of the three buckets
};

std::vector<TokenCvRow> token_consistency_cv(const ResultMatrix& matrix,
                                             const std::vector<DifficultyLabel>& labels,
                                             Regime regime = Regime::iterative);

struct GridCell {
    long long count = 0;
    std::optional<double> accuracy_pct; // absent when the cell is empty
};

/// 3 sufficiency bands (< 0.4, 0.4-0.6, >= 0.6) x 2 coverage regimes
/// (< 0.8, >= 0.8); cells hold mean iterative accuracy with counts.
struct SufficiencyCoverageGrid {
    GridCell cells[3][2];
    static int sufficiency_band(double s);
    static int coverage_band(double c);
};

SufficiencyCoverageGrid sufficiency_coverage_bins(const std::vector<DiagnosticReport>& reports,
                                                  const ResultMatrix& matrix,
                                                  bool knowledge_gap_cohort = true);

struct UnansweredByHops {
    // regime -> hop count -> number of questions wrong under every model
    std::map<Regime, std::map<int, long long>> counts;
    std::map<Regime, long long> totals;
};

UnansweredByHops unanswered_by_hops(const ResultMatrix& matrix,
                                    const std::vector<Question>& questions);

} // namespace hoplab::metrics
