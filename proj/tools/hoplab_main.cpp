#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "hoplab/errors.hpp"
#include "hoplab/pipeline.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 2;
constexpr int kPartialFailure = 3;

struct CommonArgs {
    std::string config_path;
    std::string corpus;
    std::string dataset;
    std::string index_dir;
    std::string out_dir;
    int workers = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--corpus", args.corpus, "override corpus path");
    cmd->add_option("--dataset", args.dataset, "override dataset path");
    cmd->add_option("--index", args.index_dir, "override index directory");
    cmd->add_option("--out", args.out_dir, "override output directory");
    cmd->add_option("--workers", args.workers, "override worker bound");
}

hoplab::ExperimentConfig load_config(const CommonArgs& args) {
    auto cfg = hoplab::ExperimentConfig::load(args.config_path);
    if (!args.corpus.empty()) cfg.corpus_path = args.corpus;
    if (!args.dataset.empty()) cfg.dataset_path = args.dataset;
    if (!args.index_dir.empty()) cfg.index_dir = args.index_dir;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.workers > 0) cfg.workers = args.workers;
    return cfg;
}

std::vector<hoplab::Regime> parse_regimes(const std::string& csv) {
    std::vector<hoplab::Regime> regimes;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const auto comma = csv.find(',', start);
        const std::string token =
            csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!token.empty()) regimes.push_back(hoplab::parse_regime(token));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (regimes.empty()) throw hoplab::ConfigError("no regimes requested");
    return regimes;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-hop QA evaluation harness: three regimes, an iterative "
                 "retrieval-reasoning controller, failure-mode audits, and reports"};
    app.require_subcommand(1);

    CommonArgs ingest_args, run_args, audit_args, report_args, validate_args;

    auto* ingest = app.add_subcommand("ingest", "normalize, chunk, embed, and persist an index");
    add_common(ingest, ingest_args);

    auto* run = app.add_subcommand("run", "evaluate models across regimes (resumable)");
    add_common(run, run_args);
    std::string regimes_csv = "no_context,gold_context,iterative";
    std::vector<std::string> models_filter;
    bool resume = true;
    run->add_option("--regimes", regimes_csv, "comma-separated regime list");
    run->add_option("--models", models_filter, "evaluate only these model ids");
    run->add_flag("--resume,!--fresh", resume, "skip completed cells (default) or start over");

    auto* audit = app.add_subcommand("audit", "run failure-mode diagnostics over stored runs");
    add_common(audit, audit_args);
    std::string auditor_mode;
    audit->add_option("--auditor-mode", auditor_mode, "deterministic | judge | both");

    auto* report = app.add_subcommand("report", "aggregate the matrix and audits into tables");
    add_common(report, report_args);

    auto* validate = app.add_subcommand("validate", "offline schema checks");
    add_common(validate, validate_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            const auto out = hoplab::cmd_ingest(load_config(ingest_args));
            std::printf("ingested %zu documents into %zu chunks at %s\n", out.documents,
                        out.chunks, out.index_dir.c_str());
            return kOk;
        }
        if (run->parsed()) {
            const auto out = hoplab::cmd_run(load_config(run_args), parse_regimes(regimes_csv),
                                             models_filter, resume);
            std::printf("computed %lld cells (%lld skipped, %lld failed)\n", out.computed,
                        out.skipped, out.failed);
            return out.failed > 0 ? kPartialFailure : kOk;
        }
        if (audit->parsed()) {
            std::optional<std::string> mode;
            if (!auditor_mode.empty()) mode = auditor_mode;
            const auto out = hoplab::cmd_audit(load_config(audit_args), mode);
            std::printf("wrote %lld diagnostic reports (%lld runs unscored)", out.reports,
                        out.missing);
            if (out.agreement.has_value()) std::printf(", mode agreement %.1f%%",
                                                       *out.agreement * 100.0);
            std::printf("\n");
            return kOk;
        }
        if (report->parsed()) {
            const auto out = hoplab::cmd_report(load_config(report_args));
            std::printf("emitted %zu report files\n", out.emitted.size());
            for (const auto& r : out.refused) std::printf("refused %s\n", r.c_str());
            return kOk;
        }
        if (validate->parsed()) {
            const auto problems = hoplab::cmd_validate(load_config(validate_args));
            if (problems.empty()) {
                std::printf("all inputs valid\n");
                return kOk;
            }
            for (const auto& p : problems) std::fprintf(stderr, "%s\n", p.c_str());
            return kValidationFailure;
        }
    } catch (const hoplab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kValidationFailure;
    } catch (const hoplab::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kValidationFailure;
    } catch (const hoplab::GatewayError& e) {
        std::fprintf(stderr, "gateway error: %s\n", e.what());
        return kPartialFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kOk;
}
