#include "hoplab/runlog.hpp"

#include <filesystem>

#include "hoplab/errors.hpp"

namespace hoplab {

using nlohmann::json;
namespace fs = std::filesystem;

JsonlWriter::JsonlWriter(const std::string& path, bool append) : path_(path) {
    if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out_) throw IoError("cannot open log for writing: " + path);
}

void JsonlWriter::append(const json& record) {
    out_ << record.dump() << "\n";
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_);
}

std::vector<json> load_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open log: " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::vector<json> records;
    std::size_t start = 0;
    long line_no = 0;
    while (start < content.size()) {
        std::size_t nl = content.find('\n', start);
        const bool has_newline = nl != std::string::npos;
        const std::string line =
            content.substr(start, has_newline ? nl - start : std::string::npos);
        ++line_no;
        if (!line.empty()) {
            try {
                records.push_back(json::parse(line));
            } catch (const json::parse_error& e) {
                if (!has_newline) {
                    // Torn final line from an interrupted append: quarantine it
                    // and truncate the log so the next append starts clean.
                    std::ofstream quarantine(path + ".quarantine",
                                             std::ios::binary | std::ios::app);
                    quarantine << line << "\n";
                    std::ofstream rewrite(path, std::ios::binary | std::ios::trunc);
                    rewrite << content.substr(0, start);
                    return records;
                }
                throw ValidationError(std::string("malformed log line: ") + e.what(), line_no);
            }
        }
        if (!has_newline) break;
        start = nl + 1;
    }
    return records;
}

// ---------------------------------------------------------------------------
// RunRecord
// ---------------------------------------------------------------------------

json run_to_json(const RunRecord& run) {
    json steps = json::array();
    for (const auto& s : run.steps) {
        json retrieved = json::array();
        for (const auto& sc : s.retrieved) {
            retrieved.push_back({{"chunk_id", sc.chunk.chunk_id},
                                 {"doc_id", sc.chunk.doc_id},
                                 {"score", sc.score}});
        }
        steps.push_back({{"step", s.step},
                         {"query", s.query},
                         {"retrieved", std::move(retrieved)},
                         {"partial_answer", s.partial_answer},
                         {"query_tokens", s.query_tokens},
                         {"answer_tokens", s.answer_tokens}});
    }
    return json{{"schema_version", RunRecord::kSchemaVersion},
                {"question_id", run.question_id},
                {"model_id", run.model_id},
                {"steps", std::move(steps)},
                {"final_answer", run.final_answer},
                {"composer_text", run.composer_text},
                {"citations", run.citations},
                {"finalized_step", run.finalized_step},
                {"forced_finalize", run.forced_finalize},
                {"protocol_violation", run.protocol_violation},
                {"unanswered", run.unanswered},
                {"failed", run.failed},
                {"failure", run.failure},
                {"total_input_tokens", run.total_input_tokens},
                {"total_output_tokens", run.total_output_tokens},
                {"cost", run.cost.to_string()},
                {"duration_ms", run.duration_ms}};
}

RunRecord run_from_json(const json& j) {
    const int version = j.at("schema_version").get<int>();
    if (version != RunRecord::kSchemaVersion) {
        throw ValidationError("unsupported run schema version " + std::to_string(version));
    }
    RunRecord run;
    run.question_id = j.at("question_id").get<std::string>();
    run.model_id = j.at("model_id").get<std::string>();
    for (const auto& sj : j.at("steps")) {
        StepRecord s;
        s.step = sj.at("step").get<int>();
        s.query = sj.at("query").get<std::string>();
        for (const auto& rj : sj.at("retrieved")) {
            ScoredChunk sc;
            sc.chunk.chunk_id = rj.at("chunk_id").get<std::string>();
            sc.chunk.doc_id = rj.at("doc_id").get<std::string>();
            sc.score = rj.at("score").get<double>();
            s.retrieved.push_back(std::move(sc));
        }
        s.partial_answer = sj.at("partial_answer").get<std::string>();
        s.query_tokens = sj.at("query_tokens").get<long long>();
        s.answer_tokens = sj.at("answer_tokens").get<long long>();
        run.steps.push_back(std::move(s));
    }
    run.final_answer = j.at("final_answer").get<std::string>();
    run.composer_text = j.value("composer_text", std::string());
    run.citations = j.value("citations", std::vector<std::string>{});
    run.finalized_step = j.at("finalized_step").get<int>();
    run.forced_finalize = j.at("forced_finalize").get<bool>();
    run.protocol_violation = j.value("protocol_violation", false);
    run.unanswered = j.value("unanswered", false);
    run.failed = j.value("failed", false);
    run.failure = j.value("failure", std::string());
    run.total_input_tokens = j.at("total_input_tokens").get<long long>();
    run.total_output_tokens = j.at("total_output_tokens").get<long long>();
    run.cost = Money::parse(j.at("cost").get<std::string>());
    run.duration_ms = j.value("duration_ms", 0.0);
    return run;
}

void attach_chunk_texts(RunRecord& run, const VectorIndex& index) {
    for (auto& step : run.steps) {
        for (auto& sc : step.retrieved) {
            const Chunk* chunk = index.chunk_by_id(sc.chunk.chunk_id);
            if (chunk == nullptr) {
                throw ValidationError("run " + run.question_id + " references chunk " +
                                      sc.chunk.chunk_id + " absent from the index");
            }
            const double score = sc.score;
            sc.chunk = *chunk;
            sc.score = score;
        }
    }
}

// ---------------------------------------------------------------------------
// RegimeResult
// ---------------------------------------------------------------------------

json cell_to_json(const RegimeResult& cell) {
    return json{{"question_id", cell.question_id},
                {"model_id", cell.model_id},
                {"regime", to_string(cell.regime)},
                {"answer", cell.answer},
                {"correct", cell.correct},
                {"unanswered", cell.unanswered},
                {"needs_review", cell.needs_review},
                {"tokens_in", cell.tokens_in},
                {"tokens_out", cell.tokens_out},
                {"cost", cell.cost.to_string()},
                {"run_ref", cell.run_ref}};
}

RegimeResult cell_from_json(const json& j) {
    RegimeResult cell;
    cell.question_id = j.at("question_id").get<std::string>();
    cell.model_id = j.at("model_id").get<std::string>();
    cell.regime = parse_regime(j.at("regime").get<std::string>());
    cell.answer = j.at("answer").get<std::string>();
    cell.correct = j.at("correct").get<bool>();
    cell.unanswered = j.value("unanswered", false);
    cell.needs_review = j.value("needs_review", false);
    cell.tokens_in = j.at("tokens_in").get<long long>();
    cell.tokens_out = j.at("tokens_out").get<long long>();
    cell.cost = Money::parse(j.at("cost").get<std::string>());
    cell.run_ref = j.value("run_ref", std::string());
    return cell;
}

// ---------------------------------------------------------------------------
// DiagnosticReport
// ---------------------------------------------------------------------------

json report_to_json(const DiagnosticReport& report) {
    json hops = json::array();
    for (const auto& h : report.coverage.hops) {
        json hj{{"hop", h.hop_index}, {"late_hit", h.late_hit}};
        if (h.first_hit_step.has_value()) hj["first_hit_step"] = *h.first_hit_step;
        else hj["first_hit_step"] = nullptr;
        hops.push_back(std::move(hj));
    }
    json steps = json::array();
    for (const auto& s : report.queries.steps) {
        json sj{{"step", s.step},
                {"vague", s.vague},
                {"over_broad", s.over_broad},
                {"fusion", s.fusion},
                {"off_topic", s.off_topic},
                {"compound", s.compound},
                {"anchored", s.anchored},
                {"hallucinated_term", s.hallucinated_term},
                {"carry_drop", s.carry_drop},
                {"contradiction_with_prev", s.contradiction_with_prev},
                {"is_next_logical_hop", s.is_next_logical_hop}};
        if (s.predicted_hop.has_value()) sj["predicted_hop"] = *s.predicted_hop;
        else sj["predicted_hop"] = nullptr;
        steps.push_back(std::move(sj));
    }
    json final{{"composition_failure", report.final.composition_failure},
               {"sufficiency", report.final.sufficiency},
               {"calibration", to_string(report.final.calibration)},
               {"distractor_latch", report.final.distractor_latch},
               {"judge_fallback", report.final.judge_fallback}};
    if (report.final.earliest_sufficient_step.has_value()) {
        final["earliest_sufficient_step"] = *report.final.earliest_sufficient_step;
    } else {
        final["earliest_sufficient_step"] = nullptr;
    }
    return json{{"schema_version", DiagnosticReport::kSchemaVersion},
                {"question_id", report.question_id},
                {"model_id", report.model_id},
                {"mode", report.mode},
                {"verdict", report.verdict},
                {"coverage",
                 {{"per_hop", std::move(hops)},
                  {"missed_hops", report.coverage.missed_hops},
                  {"late_hits", report.coverage.late_hits},
                  {"hop_coverage", report.coverage.hop_coverage},
                  {"judge_fallback", report.coverage.judge_fallback}}},
                {"queries",
                 {{"steps", std::move(steps)},
                  {"distractor_latch", report.queries.distractor_latch},
                  {"judge_fallback", report.queries.judge_fallback}}},
                {"final", std::move(final)}};
}

DiagnosticReport report_from_json(const json& j) {
    DiagnosticReport report;
    report.question_id = j.at("question_id").get<std::string>();
    report.model_id = j.at("model_id").get<std::string>();
    report.mode = j.at("mode").get<std::string>();
    report.verdict = j.value("verdict", false);

    const json& cov = j.at("coverage");
    for (const auto& hj : cov.at("per_hop")) {
        HopHit h;
        h.hop_index = hj.at("hop").get<int>();
        if (!hj.at("first_hit_step").is_null()) h.first_hit_step = hj["first_hit_step"].get<int>();
        h.late_hit = hj.at("late_hit").get<bool>();
        report.coverage.hops.push_back(h);
    }
    report.coverage.missed_hops = cov.at("missed_hops").get<std::vector<int>>();
    report.coverage.late_hits = cov.at("late_hits").get<std::vector<int>>();
    report.coverage.hop_coverage = cov.at("hop_coverage").get<double>();
    report.coverage.judge_fallback = cov.value("judge_fallback", false);

    const json& queries = j.at("queries");
    for (const auto& sj : queries.at("steps")) {
        StepFlags s;
        s.step = sj.at("step").get<int>();
        s.vague = sj.at("vague").get<bool>();
        s.over_broad = sj.at("over_broad").get<bool>();
        s.fusion = sj.at("fusion").get<bool>();
        s.off_topic = sj.at("off_topic").get<bool>();
        s.compound = sj.value("compound", false);
        s.anchored = sj.value("anchored", false);
        s.hallucinated_term = sj.value("hallucinated_term", false);
        s.carry_drop = sj.value("carry_drop", false);
        s.contradiction_with_prev = sj.value("contradiction_with_prev", false);
        s.is_next_logical_hop = sj.value("is_next_logical_hop", false);
        if (sj.contains("predicted_hop") && !sj["predicted_hop"].is_null()) {
            s.predicted_hop = sj["predicted_hop"].get<int>();
        }
        report.queries.steps.push_back(s);
    }
    report.queries.distractor_latch = queries.at("distractor_latch").get<bool>();
    report.queries.judge_fallback = queries.value("judge_fallback", false);

    const json& final = j.at("final");
    report.final.composition_failure = final.at("composition_failure").get<bool>();
    report.final.sufficiency = final.at("sufficiency").get<double>();
    const std::string cal = final.at("calibration").get<std::string>();
    report.final.calibration = cal == "overconfident"    ? Calibration::overconfident
                               : cal == "underconfident" ? Calibration::underconfident
                                                         : Calibration::well_calibrated;
    report.final.distractor_latch = final.at("distractor_latch").get<bool>();
    report.final.judge_fallback = final.value("judge_fallback", false);
    if (!final.at("earliest_sufficient_step").is_null()) {
        report.final.earliest_sufficient_step = final["earliest_sufficient_step"].get<int>();
    }
    return report;
}

} // namespace hoplab
