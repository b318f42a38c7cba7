#include "hoplab/metrics.hpp"

#include <algorithm>

#include "hoplab/errors.hpp"
#include "hoplab/stats.hpp"

namespace hoplab::metrics {

using stats::round_to;

std::vector<AccuracyCell> accuracy_by_regime(const ResultMatrix& matrix,
                                             const std::vector<Regime>& regimes) {
    for (Regime r : regimes) matrix.require_complete(r);
    std::vector<AccuracyCell> out;
    for (const auto& model : matrix.models()) {
        for (Regime regime : regimes) {
            AccuracyCell cell;
            cell.model_id = model;
            cell.regime = regime;
            double token_sum = 0.0;
            for (const auto& q : matrix.questions()) {
                const auto* r = matrix.find(model, q, regime);
                ++cell.total;
                if (r->correct) ++cell.correct;
                token_sum += static_cast<double>(r->tokens_out);
            }
            cell.accuracy_pct = round_to(
                100.0 * static_cast<double>(cell.correct) / static_cast<double>(cell.total), 2);
            cell.mean_output_tokens =
                round_to(token_sum / static_cast<double>(cell.total), 2);
            out.push_back(cell);
        }
    }
    return out;
}

std::vector<SolvabilityRow> solvability_partition(const ResultMatrix& matrix) {
    matrix.require_complete(Regime::no_context);
    matrix.require_complete(Regime::gold_context);
    matrix.require_complete(Regime::iterative);

    std::vector<SolvabilityRow> rows;
    for (const auto& model : matrix.models()) {
        SolvabilityRow row;
        row.model_id = model;
        for (const auto& q : matrix.questions()) {
            const bool nc = matrix.find(model, q, Regime::no_context)->correct;
            const bool gold = matrix.find(model, q, Regime::gold_context)->correct;
            const bool iter = matrix.find(model, q, Regime::iterative)->correct;
            ++row.total;
            if (nc) ++row.parametric;
            else if (gold) ++row.gold_dependent;
            else if (iter) ++row.iterative_exclusive;
            else ++row.not_solved;
        }
        const auto pct = [&](long long n) {
            return round_to(100.0 * static_cast<double>(n) / static_cast<double>(row.total), 2);
        };
        row.parametric_pct = pct(row.parametric);
        row.gold_dependent_pct = pct(row.gold_dependent);
        row.iterative_exclusive_pct = pct(row.iterative_exclusive);
        row.not_solved_pct = pct(row.not_solved);
        rows.push_back(row);
    }
    return rows;
}

std::vector<RecoveryRow> recoveries_regressions(const ResultMatrix& matrix) {
    matrix.require_complete(Regime::gold_context);
    matrix.require_complete(Regime::iterative);

    std::vector<RecoveryRow> rows;
    for (const auto& model : matrix.models()) {
        RecoveryRow row;
        row.model_id = model;
        for (const auto& q : matrix.questions()) {
            const bool gold = matrix.find(model, q, Regime::gold_context)->correct;
            const bool iter = matrix.find(model, q, Regime::iterative)->correct;
            if (!gold && iter) ++row.recoveries;
            if (gold && !iter) ++row.regressions;
        }
        row.net_gain = row.recoveries - row.regressions;
        rows.push_back(row);
    }
    return rows;
}

std::vector<PsrRow> psr(const ResultMatrix& matrix) {
    matrix.require_complete(Regime::no_context);
    matrix.require_complete(Regime::iterative);

    std::vector<PsrRow> rows;
    for (const auto& model : matrix.models()) {
        PsrRow row;
        row.model_id = model;
        for (const auto& q : matrix.questions()) {
            const bool nc = matrix.find(model, q, Regime::no_context)->correct;
            if (!nc) continue;
            ++row.known;
            if (!matrix.find(model, q, Regime::iterative)->correct) ++row.suppressed;
        }
        if (row.known > 0) {
            row.psr_pct = round_to(
                100.0 * static_cast<double>(row.suppressed) / static_cast<double>(row.known), 1);
        }
        rows.push_back(row);
    }
    return rows;
}

PcrRow pcr_from_counts(const std::string& model_id, long long known, long long effective,
                       long long ineffective, long long non_compliant) {
    PcrRow row;
    row.model_id = model_id;
    row.known = known;
    row.effective = effective;
    row.ineffective = ineffective;
    row.non_compliant = non_compliant;
    row.unclassified = known - effective - ineffective - non_compliant;
    if (known > 0) {
        row.pcr_pct = round_to(
            100.0 * static_cast<double>(effective + ineffective) / static_cast<double>(known), 2);
    }
    if (effective + ineffective > 0) {
        row.success_rate_pct =
            round_to(100.0 * static_cast<double>(effective) /
                         static_cast<double>(effective + ineffective),
                     1);
    }
    return row;
}

std::vector<PcrRow> pcr(const ResultMatrix& matrix, const std::vector<Question>& questions,
                        const std::map<std::pair<std::string, std::string>, RunDiagInput>&
                            run_info) {
    matrix.require_complete(Regime::no_context);

    std::map<std::string, int> hops_by_question;
    for (const auto& q : questions) hops_by_question[q.question_id] = q.num_hops;

    std::vector<PcrRow> rows;
    for (const auto& model : matrix.models()) {
        long long known = 0, effective = 0, ineffective = 0, non_compliant = 0;
        for (const auto& qid : matrix.questions()) {
            auto hops_it = hops_by_question.find(qid);
            if (hops_it == hops_by_question.end()) {
                throw ValidationError("question missing from dataset: " + qid);
            }
            if (hops_it->second <= 1) continue; // multi-hop cohort only
            if (!matrix.find(model, qid, Regime::no_context)->correct) continue;
            auto info_it = run_info.find({model, qid});
            if (info_it == run_info.end()) {
                throw ValidationError("missing run diagnostics for " + model + "/" + qid);
            }
            ++known;
            const RunDiagInput& info = info_it->second;
            if (info.steps >= 2 && !info.coverage_gap) ++effective;
            else if (info.steps > 1 && info.coverage_gap) ++ineffective;
            else if (info.steps == 1 && info.coverage_gap) ++non_compliant;
            // steps == 1 without a gap stays unclassified; it still counts
            // in the denominator.
        }
        rows.push_back(pcr_from_counts(model, known, effective, ineffective, non_compliant));
    }
    return rows;
}

bool flag_present(const DiagnosticReport& report, const std::string& flag) {
    if (flag == "coverage_gap") return !report.coverage.missed_hops.empty();
    if (flag == "overconfident") return report.final.calibration == Calibration::overconfident;
    if (flag == "underconfident") return report.final.calibration == Calibration::underconfident;
    if (flag == "distractor_latch") return report.queries.distractor_latch;
    if (flag == "composition_failure") return report.final.composition_failure;
    auto any_step = [&](auto pred) {
        return std::any_of(report.queries.steps.begin(), report.queries.steps.end(), pred);
    };
    if (flag == "carry_drop") return any_step([](const StepFlags& s) { return s.carry_drop; });
    if (flag == "vague") return any_step([](const StepFlags& s) { return s.vague; });
    if (flag == "over_broad") return any_step([](const StepFlags& s) { return s.over_broad; });
    if (flag == "fusion") return any_step([](const StepFlags& s) { return s.fusion; });
    if (flag == "off_topic") return any_step([](const StepFlags& s) { return s.off_topic; });
    throw ConfigError("unknown diagnostic flag: " + flag);
}

ImpactStat conditional_impact(const ResultMatrix& matrix,
                              const std::vector<DiagnosticReport>& reports,
                              const std::string& flag,
                              const std::optional<std::string>& model_id) {
    matrix.require_complete(Regime::no_context);
    matrix.require_complete(Regime::iterative);

    std::map<std::pair<std::string, std::string>, const DiagnosticReport*> by_key;
    for (const auto& r : reports) by_key[{r.model_id, r.question_id}] = &r;

    ImpactStat stat;
    stat.flag = flag;
    stat.model_id = model_id.value_or("");

    long long with_correct = 0, without_correct = 0;
    for (const auto& model : matrix.models()) {
        if (model_id.has_value() && model != *model_id) continue;
        for (const auto& qid : matrix.questions()) {
            if (matrix.find(model, qid, Regime::no_context)->correct) continue; // knowledge gap
            auto it = by_key.find({model, qid});
            if (it == by_key.end()) continue; // unaudited runs fall out of the cohort
            ++stat.cohort_size;
            const bool present = flag_present(*it->second, flag);
            const bool correct = matrix.find(model, qid, Regime::iterative)->correct;
            if (present) {
                ++stat.n_with;
                if (correct) ++with_correct;
            } else {
                ++stat.n_without;
                if (correct) ++without_correct;
            }
        }
    }

    if (stat.cohort_size == 0) {
        stat.reason = "empty knowledge-gap cohort";
        return stat;
    }
    stat.prevalence_pct = round_to(
        100.0 * static_cast<double>(stat.n_with) / static_cast<double>(stat.cohort_size), 1);
    if (stat.n_without > 0) {
        stat.accuracy_without_pct = round_to(100.0 * static_cast<double>(without_correct) /
                                                 static_cast<double>(stat.n_without),
                                             1);
    }
    if (stat.n_with == 0) {
        stat.reason = "flag never present in cohort";
        stat.damage_pp = 0.0;
        return stat;
    }
    stat.accuracy_with_pct = round_to(
        100.0 * static_cast<double>(with_correct) / static_cast<double>(stat.n_with), 1);
    if (stat.n_without == 0) {
        stat.reason = "flag always present in cohort";
        return stat;
    }
    stat.defined = true;
    const double raw_delta = (100.0 * static_cast<double>(without_correct) /
                              static_cast<double>(stat.n_without)) -
                             (100.0 * static_cast<double>(with_correct) /
                              static_cast<double>(stat.n_with));
    stat.delta_pp = round_to(raw_delta, 1);
    const double raw_prevalence =
        static_cast<double>(stat.n_with) / static_cast<double>(stat.cohort_size);
    stat.damage_pp = round_to(raw_prevalence * raw_delta, 1);
    return stat;
}

double damage_index(double prevalence_pct, double delta_pp) {
    return round_to(prevalence_pct / 100.0 * delta_pp, 1);
}

namespace {

std::map<std::string, DifficultyLabel::Band> label_map(
    const std::vector<DifficultyLabel>& labels) {
    std::map<std::string, DifficultyLabel::Band> m;
    for (const auto& l : labels) m[l.question_id] = l.label;
    return m;
}

} // namespace

std::vector<TokenScalingRow> token_scaling_factor(const ResultMatrix& matrix,
                                                  const std::vector<DifficultyLabel>& labels,
                                                  Regime regime) {
    matrix.require_complete(regime);
    const auto bands = label_map(labels);

    std::vector<TokenScalingRow> rows;
    for (const auto& model : matrix.models()) {
        TokenScalingRow row;
        row.model_id = model;
        double sum_easy = 0.0, sum_hard = 0.0;
        for (const auto& qid : matrix.questions()) {
            auto it = bands.find(qid);
            if (it == bands.end()) continue;
            const auto tokens =
                static_cast<double>(matrix.find(model, qid, regime)->tokens_out);
            if (it->second == DifficultyLabel::Band::easy) {
                ++row.n_easy;
                sum_easy += tokens;
            } else if (it->second == DifficultyLabel::Band::hard) {
                ++row.n_hard;
                sum_hard += tokens;
            }
        }
        if (row.n_easy > 0) row.mean_tokens_easy = sum_easy / static_cast<double>(row.n_easy);
        if (row.n_hard > 0) row.mean_tokens_hard = sum_hard / static_cast<double>(row.n_hard);
        if (row.n_easy > 0 && row.n_hard > 0 && row.mean_tokens_easy > 0.0) {
            row.factor = round_to(row.mean_tokens_hard / row.mean_tokens_easy, 2);
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<TokenCvRow> token_consistency_cv(const ResultMatrix& matrix,
                                             const std::vector<DifficultyLabel>& labels,
                                             Regime regime) {
    matrix.require_complete(regime);
    const auto bands = label_map(labels);

    std::vector<TokenCvRow> rows;
    for (const auto& model : matrix.models()) {
        TokenCvRow row;
        row.model_id = model;
        std::vector<double> easy, medium, hard;
        for (const auto& qid : matrix.questions()) {
            auto it = bands.find(qid);
            if (it == bands.end()) continue;
            const auto tokens =
                static_cast<double>(matrix.find(model, qid, regime)->tokens_out);
            switch (it->second) {
                case DifficultyLabel::Band::easy: easy.push_back(tokens); break;
                case DifficultyLabel::Band::medium: medium.push_back(tokens); break;
                case DifficultyLabel::Band::hard: hard.push_back(tokens); break;
                case DifficultyLabel::Band::unlabeled: break;
            }
        }
        auto cv = [](const std::vector<double>& xs) -> std::optional<double> {
            if (xs.empty()) return std::nullopt;
            const double mu = stats::mean(xs);
            if (mu == 0.0) return std::nullopt;
            return stats::stddev_population(xs) / mu * 100.0;
        };
        row.cv_easy_pct = cv(easy);
        row.cv_medium_pct = cv(medium);
        row.cv_hard_pct = cv(hard);
        if (row.cv_easy_pct && row.cv_medium_pct && row.cv_hard_pct) {
            row.cv_pct = round_to((*row.cv_easy_pct + *row.cv_medium_pct + *row.cv_hard_pct) / 3.0,
                                  2);
        }
        if (row.cv_easy_pct) row.cv_easy_pct = round_to(*row.cv_easy_pct, 2);
        if (row.cv_medium_pct) row.cv_medium_pct = round_to(*row.cv_medium_pct, 2);
        if (row.cv_hard_pct) row.cv_hard_pct = round_to(*row.cv_hard_pct, 2);
        rows.push_back(row);
    }
    return rows;
}

int SufficiencyCoverageGrid::sufficiency_band(double s) {
    if (s < 0.4) return 0;
    if (s < 0.6) return 1;
    return 2;
}

int SufficiencyCoverageGrid::coverage_band(double c) { return c < 0.8 ? 0 : 1; }

SufficiencyCoverageGrid sufficiency_coverage_bins(const std::vector<DiagnosticReport>& reports,
                                                  const ResultMatrix& matrix,
                                                  bool knowledge_gap_cohort) {
    matrix.require_complete(Regime::iterative);
    if (knowledge_gap_cohort) matrix.require_complete(Regime::no_context);

    long long correct[3][2] = {};
    long long total[3][2] = {};
    for (const auto& report : reports) {
        const auto* iter = matrix.find(report.model_id, report.question_id, Regime::iterative);
        if (iter == nullptr) continue;
        if (knowledge_gap_cohort &&
            matrix.find(report.model_id, report.question_id, Regime::no_context)->correct) {
            continue;
        }
        const int sb = SufficiencyCoverageGrid::sufficiency_band(report.final.sufficiency);
        const int cb = SufficiencyCoverageGrid::coverage_band(report.coverage.hop_coverage);
        ++total[sb][cb];
        if (iter->correct) ++correct[sb][cb];
    }

    SufficiencyCoverageGrid grid;
    for (int s = 0; s < 3; ++s) {
        for (int c = 0; c < 2; ++c) {
            grid.cells[s][c].count = total[s][c];
            if (total[s][c] > 0) {
                grid.cells[s][c].accuracy_pct = round_to(
                    100.0 * static_cast<double>(correct[s][c]) /
                        static_cast<double>(total[s][c]),
                    1);
            }
        }
    }
    return grid;
}

UnansweredByHops unanswered_by_hops(const ResultMatrix& matrix,
                                    const std::vector<Question>& questions) {
    std::map<std::string, int> hops_by_question;
    for (const auto& q : questions) hops_by_question[q.question_id] = q.num_hops;

    UnansweredByHops out;
    for (Regime regime : {Regime::no_context, Regime::gold_context, Regime::iterative}) {
        matrix.require_complete(regime);
        auto& bucket = out.counts[regime];
        long long total = 0;
        for (const auto& qid : matrix.questions()) {
            bool all_wrong = true;
            for (const auto& model : matrix.models()) {
                if (matrix.find(model, qid, regime)->correct) {
                    all_wrong = false;
                    break;
                }
            }
            if (!all_wrong) continue;
            auto it = hops_by_question.find(qid);
            if (it == hops_by_question.end()) {
                throw ValidationError("question missing from dataset: " + qid);
            }
            ++bucket[it->second];
            ++total;
        }
        out.totals[regime] = total;
    }
    return out;
}

} // namespace hoplab::metrics
