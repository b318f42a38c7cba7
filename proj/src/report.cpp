#include "hoplab/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "hoplab/errors.hpp"
#include "hoplab/evaluator.hpp"
#include "hoplab/stats.hpp"

namespace hoplab::report {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

namespace {

std::string opt_fmt(const std::optional<double>& v, int decimals) {
    return v.has_value() ? fmt(*v, decimals) : std::string("-");
}

void write_file(const std::string& dir, const std::string& name, const std::string& body,
                Bundle& bundle) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report file: " + name);
    out << body;
    bundle.emitted.push_back(name);
}

} // namespace

std::string render_accuracy_md(const std::vector<metrics::AccuracyCell>& cells) {
    std::map<std::string, std::map<Regime, const metrics::AccuracyCell*>> rows;
    for (const auto& c : cells) rows[c.model_id][c.regime] = &c;

    std::ostringstream os;
    os << "| Model | No Ctx Acc (%) | Gold Ctx Acc (%) | Iter. Acc (%) | No Ctx Tokens | Gold "
          "Ctx Tokens | Iter. Tokens |\n";
    os << "|---|---|---|---|---|---|---|\n";
    for (const auto& [model, by_regime] : rows) {
        auto cell = [&](Regime r) -> const metrics::AccuracyCell* {
            auto it = by_regime.find(r);
            return it == by_regime.end() ? nullptr : it->second;
        };
        os << "| " << model;
        for (Regime r : {Regime::no_context, Regime::gold_context, Regime::iterative}) {
            const auto* c = cell(r);
            os << " | " << (c ? fmt(c->accuracy_pct, 2) : "-");
        }
        for (Regime r : {Regime::no_context, Regime::gold_context, Regime::iterative}) {
            const auto* c = cell(r);
            os << " | " << (c ? fmt(c->mean_output_tokens, 2) : "-");
        }
        os << " |\n";
    }
    return os.str();
}

std::string render_pcr_md(const std::vector<metrics::PcrRow>& rows) {
    std::ostringstream os;
    os << "| Model | Known | Effective | Ineffective | Non-Compliant | PCR (%) | Success Rate "
          "(%) |\n";
    os << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        os << "| " << r.model_id << " | " << r.known << " | " << r.effective << " | "
           << r.ineffective << " | " << r.non_compliant << " | " << opt_fmt(r.pcr_pct, 2) << " | "
           << opt_fmt(r.success_rate_pct, 1) << " |\n";
    }
    return os.str();
}

Bundle write_report_bundle(
    const std::string& dir, const ResultMatrix& matrix,
    const std::vector<DiagnosticReport>& reports, const std::vector<Question>& questions,
    const std::map<std::pair<std::string, std::string>, metrics::RunDiagInput>& run_info,
    const RunManifest& manifest) {
    fs::create_directories(dir);
    Bundle bundle;
    json payload;
    payload["manifest"] = manifest.to_json();

    auto attempt = [&](const std::string& name, const std::function<void()>& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            bundle.refused.push_back(name + ": " + e.what());
            payload["refused"][name] = e.what();
        }
    };

    attempt("accuracy_by_regime", [&] {
        std::vector<Regime> regimes;
        for (Regime r : {Regime::no_context, Regime::gold_context, Regime::iterative}) {
            if (matrix.complete_for(r)) regimes.push_back(r);
        }
        if (regimes.empty()) throw ValidationError("no complete regime");
        const auto cells = metrics::accuracy_by_regime(matrix, regimes);
        write_file(dir, "table_accuracy.md", render_accuracy_md(cells), bundle);
        std::ostringstream csv;
        csv << "model_id,regime,correct,total,accuracy_pct,mean_output_tokens\n";
        json rows = json::array();
        for (const auto& c : cells) {
            csv << c.model_id << "," << to_string(c.regime) << "," << c.correct << "," << c.total
                << "," << fmt(c.accuracy_pct, 2) << "," << fmt(c.mean_output_tokens, 2) << "\n";
            rows.push_back({{"model_id", c.model_id},
                            {"regime", to_string(c.regime)},
                            {"correct", c.correct},
                            {"total", c.total},
                            {"accuracy_pct", c.accuracy_pct},
                            {"mean_output_tokens", c.mean_output_tokens}});
        }
        write_file(dir, "accuracy.csv", csv.str(), bundle);
        payload["accuracy_by_regime"] = std::move(rows);

        // Pairwise regime comparison over per-model accuracy samples
        // (unpaired two-sample Welch test).
        std::map<Regime, std::vector<double>> samples;
        for (const auto& c : cells) samples[c.regime].push_back(c.accuracy_pct);
        json tests = json::array();
        const std::pair<Regime, Regime> pairs[] = {
            {Regime::no_context, Regime::gold_context},
            {Regime::gold_context, Regime::iterative},
            {Regime::no_context, Regime::iterative}};
        for (const auto& [a, b] : pairs) {
            if (!samples.count(a) || !samples.count(b)) continue;
            if (auto t = stats::welch_t_test(samples[a], samples[b])) {
                tests.push_back({{"a", to_string(a)},
                                 {"b", to_string(b)},
                                 {"t", t->t},
                                 {"df", t->df},
                                 {"p_value", t->p_value}});
            }
        }
        payload["regime_t_tests"] = std::move(tests);
    });

    attempt("solvability_partition", [&] {
        const auto rows = metrics::solvability_partition(matrix);
        std::ostringstream csv;
        csv << "model_id,parametric_pct,gold_dependent_pct,iterative_exclusive_pct,"
               "not_solved_pct,parametric,gold_dependent,iterative_exclusive,not_solved,total\n";
        json out = json::array();
        for (const auto& r : rows) {
            csv << r.model_id << "," << fmt(r.parametric_pct, 2) << ","
                << fmt(r.gold_dependent_pct, 2) << "," << fmt(r.iterative_exclusive_pct, 2) << ","
                << fmt(r.not_solved_pct, 2) << "," << r.parametric << "," << r.gold_dependent
                << "," << r.iterative_exclusive << "," << r.not_solved << "," << r.total << "\n";
            out.push_back({{"model_id", r.model_id},
                           {"parametric", r.parametric},
                           {"gold_dependent", r.gold_dependent},
                           {"iterative_exclusive", r.iterative_exclusive},
                           {"not_solved", r.not_solved},
                           {"total", r.total},
                           {"parametric_pct", r.parametric_pct},
                           {"gold_dependent_pct", r.gold_dependent_pct},
                           {"iterative_exclusive_pct", r.iterative_exclusive_pct},
                           {"not_solved_pct", r.not_solved_pct}});
        }
        write_file(dir, "solvability_partition.csv", csv.str(), bundle);
        payload["solvability_partition"] = std::move(out);
    });

    attempt("recoveries_regressions", [&] {
        const auto rows = metrics::recoveries_regressions(matrix);
        std::ostringstream csv;
        csv << "model_id,recoveries,regressions,net_gain\n";
        json out = json::array();
        for (const auto& r : rows) {
            csv << r.model_id << "," << r.recoveries << "," << r.regressions << "," << r.net_gain
                << "\n";
            out.push_back({{"model_id", r.model_id},
                           {"recoveries", r.recoveries},
                           {"regressions", r.regressions},
                           {"net_gain", r.net_gain}});
        }
        write_file(dir, "recoveries_regressions.csv", csv.str(), bundle);
        payload["recoveries_regressions"] = std::move(out);
    });

    attempt("psr", [&] {
        const auto rows = metrics::psr(matrix);
        std::ostringstream csv;
        csv << "model_id,known,suppressed,psr_pct\n";
        json out = json::array();
        for (const auto& r : rows) {
            csv << r.model_id << "," << r.known << "," << r.suppressed << ","
                << opt_fmt(r.psr_pct, 1) << "\n";
            json row{{"model_id", r.model_id}, {"known", r.known}, {"suppressed", r.suppressed}};
            if (r.psr_pct) row["psr_pct"] = *r.psr_pct;
            out.push_back(std::move(row));
        }
        write_file(dir, "psr.csv", csv.str(), bundle);
        payload["psr"] = std::move(out);
    });

    attempt("pcr", [&] {
        if (run_info.empty()) throw ValidationError("no audited iterative runs");
        const auto rows = metrics::pcr(matrix, questions, run_info);
        write_file(dir, "table_pcr.md", render_pcr_md(rows), bundle);
        std::ostringstream csv;
        csv << "model_id,known,effective,ineffective,non_compliant,unclassified,pcr_pct,"
               "success_rate_pct\n";
        json out = json::array();
        for (const auto& r : rows) {
            csv << r.model_id << "," << r.known << "," << r.effective << "," << r.ineffective
                << "," << r.non_compliant << "," << r.unclassified << ","
                << opt_fmt(r.pcr_pct, 2) << "," << opt_fmt(r.success_rate_pct, 1) << "\n";
            json row{{"model_id", r.model_id},
                     {"known", r.known},
                     {"effective", r.effective},
                     {"ineffective", r.ineffective},
                     {"non_compliant", r.non_compliant},
                     {"unclassified", r.unclassified}};
            if (r.pcr_pct) row["pcr_pct"] = *r.pcr_pct;
            if (r.success_rate_pct) row["success_rate_pct"] = *r.success_rate_pct;
            out.push_back(std::move(row));
        }
        write_file(dir, "pcr.csv", csv.str(), bundle);
        payload["pcr"] = std::move(out);
    });

    attempt("conditional_impact", [&] {
        if (reports.empty()) throw ValidationError("no diagnostic reports");
        const std::vector<std::string> flags = {"coverage_gap", "overconfident",
                                                "distractor_latch"};
        std::ostringstream prevalence_csv, impact_csv, damage_csv;
        prevalence_csv << "model_id";
        impact_csv << "model_id";
        damage_csv << "model_id";
        for (const auto& f : flags) {
            prevalence_csv << "," << f << "_pct";
            impact_csv << "," << f << "_pp";
            damage_csv << "," << f << "_pp";
        }
        prevalence_csv << "\n";
        impact_csv << "\n";
        damage_csv << "\n";

        json out = json::array();
        std::vector<std::optional<std::string>> scopes{std::nullopt};
        for (const auto& m : matrix.models()) scopes.emplace_back(m);
        for (const auto& scope : scopes) {
            if (scope.has_value()) {
                prevalence_csv << *scope;
                impact_csv << *scope;
                damage_csv << *scope;
            }
            for (const auto& flag : flags) {
                const auto stat = metrics::conditional_impact(matrix, reports, flag, scope);
                if (scope.has_value()) {
                    prevalence_csv << "," << fmt(stat.prevalence_pct, 1);
                    impact_csv << "," << opt_fmt(stat.delta_pp, 1);
                    damage_csv << "," << fmt(stat.damage_pp, 1);
                }
                json row{{"flag", stat.flag},
                         {"model_id", stat.model_id},
                         {"cohort", stat.cohort},
                         {"cohort_size", stat.cohort_size},
                         {"n_with", stat.n_with},
                         {"n_without", stat.n_without},
                         {"prevalence_pct", stat.prevalence_pct},
                         {"defined", stat.defined},
                         {"damage_pp", stat.damage_pp}};
                if (!stat.defined) row["reason"] = stat.reason;
                if (stat.accuracy_with_pct) row["accuracy_with_pct"] = *stat.accuracy_with_pct;
                if (stat.accuracy_without_pct) {
                    row["accuracy_without_pct"] = *stat.accuracy_without_pct;
                }
                if (stat.delta_pp) row["delta_pp"] = *stat.delta_pp;
                out.push_back(std::move(row));
            }
            if (scope.has_value()) {
                prevalence_csv << "\n";
                impact_csv << "\n";
                damage_csv << "\n";
            }
        }
        write_file(dir, "failure_prevalence.csv", prevalence_csv.str(), bundle);
        write_file(dir, "failure_impact.csv", impact_csv.str(), bundle);
        write_file(dir, "damage_index.csv", damage_csv.str(), bundle);
        payload["conditional_impact"] = std::move(out);
    });

    attempt("token_scaling", [&] {
        const auto labels = stratify_difficulty(matrix, Regime::iterative);
        json label_rows = json::array();
        std::map<DifficultyLabel::Band, long long> mass;
        for (const auto& l : labels) {
            ++mass[l.label];
            label_rows.push_back({{"question_id", l.question_id},
                                  {"wrong_count", l.wrong_count},
                                  {"label", to_string(l.label)}});
        }
        payload["difficulty_labels"] = std::move(label_rows);
        payload["difficulty_mass"] = {
            {"easy", mass[DifficultyLabel::Band::easy]},
            {"medium", mass[DifficultyLabel::Band::medium]},
            {"hard", mass[DifficultyLabel::Band::hard]},
            {"unlabeled", mass[DifficultyLabel::Band::unlabeled]}};

        const auto scaling = metrics::token_scaling_factor(matrix, labels, Regime::iterative);
        const auto cv = metrics::token_consistency_cv(matrix, labels, Regime::iterative);
        std::ostringstream csv;
        csv << "model_id,n_easy,n_hard,mean_tokens_easy,mean_tokens_hard,scaling_factor,cv_pct\n";
        json out = json::array();
        for (std::size_t i = 0; i < scaling.size(); ++i) {
            const auto& s = scaling[i];
            const auto& c = cv[i];
            csv << s.model_id << "," << s.n_easy << "," << s.n_hard << ","
                << fmt(s.mean_tokens_easy, 2) << "," << fmt(s.mean_tokens_hard, 2) << ","
                << opt_fmt(s.factor, 2) << "," << opt_fmt(c.cv_pct, 2) << "\n";
            json row{{"model_id", s.model_id},
                     {"n_easy", s.n_easy},
                     {"n_hard", s.n_hard},
                     {"mean_tokens_easy", s.mean_tokens_easy},
                     {"mean_tokens_hard", s.mean_tokens_hard}};
            if (s.factor) row["scaling_factor"] = *s.factor;
            if (c.cv_pct) row["cv_pct"] = *c.cv_pct;
            if (c.cv_easy_pct) row["cv_easy_pct"] = *c.cv_easy_pct;
            if (c.cv_medium_pct) row["cv_medium_pct"] = *c.cv_medium_pct;
            if (c.cv_hard_pct) row["cv_hard_pct"] = *c.cv_hard_pct;
            out.push_back(std::move(row));
        }
        write_file(dir, "token_scaling.csv", csv.str(), bundle);
        payload["token_scaling"] = std::move(out);
    });

    attempt("sufficiency_coverage_bins", [&] {
        if (reports.empty()) throw ValidationError("no diagnostic reports");
        const auto grid = metrics::sufficiency_coverage_bins(reports, matrix);
        const char* s_names[3] = {"s<0.4", "0.4<=s<0.6", "s>=0.6"};
        const char* c_names[2] = {"c<0.8", "c>=0.8"};
        std::ostringstream csv;
        csv << "sufficiency_band,coverage_band,count,accuracy_pct\n";
        json out = json::array();
        for (int s = 0; s < 3; ++s) {
            for (int c = 0; c < 2; ++c) {
                const auto& cell = grid.cells[s][c];
                csv << s_names[s] << "," << c_names[c] << "," << cell.count << ","
                    << opt_fmt(cell.accuracy_pct, 1) << "\n";
                json row{{"sufficiency_band", s_names[s]},
                         {"coverage_band", c_names[c]},
                         {"count", cell.count}};
                if (cell.accuracy_pct) row["accuracy_pct"] = *cell.accuracy_pct;
                out.push_back(std::move(row));
            }
        }
        write_file(dir, "sufficiency_coverage_grid.csv", csv.str(), bundle);
        payload["sufficiency_coverage_bins"] = std::move(out);
    });

    attempt("unanswered_by_hops", [&] {
        const auto u = metrics::unanswered_by_hops(matrix, questions);
        std::ostringstream csv;
        csv << "regime,hops,count\n";
        json out = json::array();
        for (const auto& [regime, buckets] : u.counts) {
            for (const auto& [hops, count] : buckets) {
                csv << to_string(regime) << "," << hops << "," << count << "\n";
                out.push_back(
                    {{"regime", to_string(regime)}, {"hops", hops}, {"count", count}});
            }
            csv << to_string(regime) << ",total," << u.totals.at(regime) << "\n";
        }
        write_file(dir, "unanswered_by_hops.csv", csv.str(), bundle);
        payload["unanswered_by_hops"] = std::move(out);
    });

    attempt("cost_vs_accuracy", [&] {
        matrix.require_complete(Regime::iterative);
        std::ostringstream csv;
        csv << "model_id,total_cost,iterative_accuracy_pct\n";
        for (const auto& model : matrix.models()) {
            Money total;
            long long correct = 0, n = 0;
            for (const auto& qid : matrix.questions()) {
                const auto* cell = matrix.find(model, qid, Regime::iterative);
                total += cell->cost;
                ++n;
                if (cell->correct) ++correct;
            }
            csv << model << "," << total.to_string() << ","
                << fmt(100.0 * static_cast<double>(correct) / static_cast<double>(n), 2) << "\n";
        }
        write_file(dir, "cost_vs_accuracy.csv", csv.str(), bundle);
    });

    write_file(dir, "report.json", payload.dump(2) + "\n", bundle);
    return bundle;
}

} // namespace hoplab::report
