#include "hoplab/pipeline.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "hoplab/controller.hpp"
#include "hoplab/corpus.hpp"
#include "hoplab/diagnostics.hpp"
#include "hoplab/errors.hpp"
#include "hoplab/evaluator.hpp"
#include "hoplab/http_backends.hpp"
#include "hoplab/report.hpp"
#include "hoplab/runlog.hpp"

namespace hoplab {

namespace fs = std::filesystem;
using nlohmann::json;

std::shared_ptr<ChatBackend> make_chat_backend(const ModelConfig& cfg) {
    if (cfg.backend == "scripted") {
        return std::make_shared<ScriptedChatBackend>(
            ScriptedChatBackend::from_json_file(cfg.script_path));
    }
    if (cfg.backend == "openai") return std::make_shared<OpenAiChatBackend>();
    if (cfg.backend == "anthropic") return std::make_shared<AnthropicChatBackend>();
    throw ConfigError("unknown chat backend: " + cfg.backend);
}

std::shared_ptr<EmbeddingBackend> make_embedding_backend(const ModelConfig& cfg, int hash_dim) {
    if (cfg.backend == "hash") return std::make_shared<HashEmbeddingBackend>(hash_dim);
    if (cfg.backend == "scripted") {
        return std::make_shared<ScriptedEmbeddingBackend>(
            ScriptedEmbeddingBackend::from_json_file(cfg.script_path));
    }
    if (cfg.backend == "openai") return std::make_shared<OpenAiEmbeddingBackend>();
    throw ConfigError("unknown embedding backend: " + cfg.backend);
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

IngestOutcome cmd_ingest(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.corpus_path.empty()) throw ConfigError("ingest requires a corpus path");
    if (cfg.index_dir.empty()) throw ConfigError("ingest requires an index_dir");

    const auto documents = load_corpus_jsonl(cfg.corpus_path);
    std::vector<Chunk> chunks;
    const ChunkingConfig chunking{cfg.window, cfg.overlap};
    for (const auto& doc : documents) {
        auto doc_chunks = chunk_document(doc, chunking);
        chunks.insert(chunks.end(), doc_chunks.begin(), doc_chunks.end());
    }

    auto embedder = make_embedding_backend(cfg.embedder, cfg.hash_embed_dim);
    EmbedFn embed = [&](const std::vector<std::string>& texts) {
        return embed_texts(*embedder, cfg.embedder, texts);
    };
    IndexBuildOptions options;
    options.encoder_id =
        cfg.embedder.backend == "hash" ? "hash-" + std::to_string(cfg.hash_embed_dim)
                                       : cfg.embedder.model_id;
    options.window = cfg.window;
    options.overlap = cfg.overlap;
    options.parallelism = static_cast<std::size_t>(cfg.workers);
    VectorIndex index = VectorIndex::build(std::move(chunks), embed, options);
    index.save(cfg.index_dir);

    build_manifest(cfg).write((fs::path(cfg.index_dir) / "run_manifest.json").string());

    IngestOutcome out;
    out.documents = documents.size();
    out.chunks = index.size();
    out.index_dir = cfg.index_dir;
    return out;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

namespace {

struct CellTask {
    std::size_t index = 0;
    const ModelConfig* model = nullptr;
    const Question* question = nullptr;
    Regime regime = Regime::no_context;
};

struct CellResult {
    bool failed = false;
    std::string error;
    RegimeResult cell;
    std::optional<RunRecord> run;
};

/// Writes task results strictly in task order regardless of completion
/// order, so concurrent workers cannot perturb log bytes. The test hook
/// HOPLAB_TEST_ABORT_AFTER_CELLS hard-kills the process after N appends to
/// exercise crash recovery.
class OrderedSerializer {
public:
    OrderedSerializer(JsonlWriter& results, JsonlWriter& runs)
        : results_(results), runs_(runs) {
        if (const char* hook = std::getenv("HOPLAB_TEST_ABORT_AFTER_CELLS")) {
            abort_after_ = std::atoll(hook);
        }
    }

    void submit(std::size_t index, CellResult result) {
        std::unique_lock lock(mutex_);
        pending_.emplace(index, std::move(result));
        while (true) {
            auto it = pending_.find(next_);
            if (it == pending_.end()) break;
            write(it->second);
            pending_.erase(it);
            ++next_;
        }
    }

    long long written() const { return written_; }
    long long failed() const { return failed_; }

private:
    void write(const CellResult& r) {
        if (r.run.has_value()) runs_.append(run_to_json(*r.run));
        if (!r.failed) {
            results_.append(cell_to_json(r.cell));
            ++written_;
            if (abort_after_ > 0 && written_ >= abort_after_) {
                std::_Exit(3); // simulated crash, nothing flushed beyond this line
            }
        } else {
            ++failed_;
        }
    }

    JsonlWriter& results_;
    JsonlWriter& runs_;
    std::mutex mutex_;
    std::map<std::size_t, CellResult> pending_;
    std::size_t next_ = 0;
    long long written_ = 0;
    long long failed_ = 0;
    long long abort_after_ = 0;
};

} // namespace

RunOutcome cmd_run(const ExperimentConfig& cfg, const std::vector<Regime>& regimes,
                   const std::vector<std::string>& model_filter, bool resume) {
    cfg.validate();
    if (cfg.dataset_path.empty()) throw ConfigError("run requires a dataset path");
    if (cfg.models.empty()) throw ConfigError("run requires at least one model");
    const bool needs_index =
        std::find(regimes.begin(), regimes.end(), Regime::iterative) != regimes.end();
    if (needs_index && cfg.index_dir.empty()) {
        throw ConfigError("iterative regime requires an index_dir");
    }

    const auto questions = load_dataset_jsonl(cfg.dataset_path);
    fs::create_directories(cfg.out_dir);
    const std::string results_path = (fs::path(cfg.out_dir) / "results.jsonl").string();
    const std::string runs_path = (fs::path(cfg.out_dir) / "runs.jsonl").string();

    // Resume: completed cells are keyed by (model, question, regime).
    std::set<std::tuple<std::string, std::string, int>> done;
    ResultMatrix matrix;
    if (resume && fs::exists(results_path)) {
        for (const auto& j : load_jsonl(results_path)) {
            RegimeResult cell = cell_from_json(j);
            done.insert({cell.model_id, cell.question_id, static_cast<int>(cell.regime)});
            matrix.add(std::move(cell));
        }
    } else if (!resume) {
        fs::remove(results_path);
        fs::remove(runs_path);
    }

    // Index + retriever are shared by all workers (immutable after load).
    std::optional<VectorIndex> index;
    std::shared_ptr<EmbeddingBackend> embedder;
    if (needs_index) {
        index = VectorIndex::load(cfg.index_dir);
        embedder = make_embedding_backend(cfg.embedder, cfg.hash_embed_dim);
        const auto& im = index->manifest();
        if (im.window != cfg.window || im.overlap != cfg.overlap) {
            throw ConfigError("index was built with window/overlap " +
                              std::to_string(im.window) + "/" + std::to_string(im.overlap) +
                              " but config says " + std::to_string(cfg.window) + "/" +
                              std::to_string(cfg.overlap));
        }
    }

    PriceTable prices;
    const bool have_prices = !cfg.prices_path.empty();
    if (have_prices) prices = PriceTable::load_json_file(cfg.prices_path);

    RetryPolicy policy;
    if (cfg.deterministic) policy.sleep_ms = [](int) {};
    Gateway judge_gateway(make_chat_backend(cfg.judge), policy, cfg.workers);

    std::map<std::string, std::unique_ptr<Gateway>> gateways;
    for (const auto& model : cfg.models) {
        gateways[model.model_id] =
            std::make_unique<Gateway>(make_chat_backend(model), policy, cfg.workers);
    }

    std::vector<CellTask> tasks;
    for (const auto& model : cfg.models) {
        if (!model_filter.empty() &&
            std::find(model_filter.begin(), model_filter.end(), model.model_id) ==
                model_filter.end()) {
            continue;
        }
        for (const auto& question : questions) {
            for (Regime regime : regimes) {
                if (done.count({model.model_id, question.question_id,
                                static_cast<int>(regime)}) > 0) {
                    continue;
                }
                tasks.push_back(CellTask{tasks.size(), &model, &question, regime});
            }
        }
    }

    JsonlWriter results_log(results_path);
    JsonlWriter runs_log(runs_path);
    OrderedSerializer serializer(results_log, runs_log);

    EvalOptions eval_options;
    eval_options.prices = have_prices ? &prices : nullptr;
    eval_options.controller.budget = cfg.budget;
    eval_options.controller.top_k = cfg.top_k;
    eval_options.controller.deterministic = cfg.deterministic;

    std::atomic<std::size_t> cursor{0};
    std::mutex matrix_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= tasks.size()) return;
            const CellTask& task = tasks[i];
            CellResult result;
            try {
                Gateway& gateway = *gateways.at(task.model->model_id);
                switch (task.regime) {
                    case Regime::no_context:
                        result.cell = run_no_context(*task.question, gateway, *task.model,
                                                     judge_gateway, cfg.judge, eval_options);
                        break;
                    case Regime::gold_context:
                        result.cell = run_gold_context(*task.question, gateway, *task.model,
                                                       judge_gateway, cfg.judge, eval_options);
                        break;
                    case Regime::iterative: {
                        IndexRetriever retriever(*index, *embedder, cfg.embedder);
                        RunRecord run;
                        result.cell = run_iterative_regime(*task.question, retriever, gateway,
                                                           *task.model, judge_gateway, cfg.judge,
                                                           eval_options, &run);
                        result.run = std::move(run);
                        break;
                    }
                }
            } catch (const std::exception& e) {
                result.failed = true;
                result.error = e.what();
            }
            if (!result.failed) {
                std::lock_guard lock(matrix_mutex);
                matrix.add(result.cell);
            }
            serializer.submit(task.index, std::move(result));
        }
    };

    const int n_workers = std::max(1, std::min<int>(cfg.workers,
                                                    static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    matrix.save_csv((fs::path(cfg.out_dir) / "matrix.csv").string());
    build_manifest(cfg).write((fs::path(cfg.out_dir) / "run_manifest.json").string());

    RunOutcome out;
    out.computed = serializer.written();
    out.failed = serializer.failed();
    out.skipped = static_cast<long long>(done.size());
    return out;
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

AuditOutcome cmd_audit(const ExperimentConfig& cfg,
                       const std::optional<std::string>& mode_override) {
    cfg.validate();
    const AuditorMode mode = parse_auditor_mode(mode_override.value_or(cfg.auditor_mode));
    const std::string runs_path = (fs::path(cfg.out_dir) / "runs.jsonl").string();
    const std::string results_path = (fs::path(cfg.out_dir) / "results.jsonl").string();
    if (!fs::exists(runs_path)) throw IoError("no run log at " + runs_path);
    if (cfg.index_dir.empty()) throw ConfigError("audit requires index_dir to resolve chunks");
    if (cfg.dataset_path.empty()) throw ConfigError("audit requires the dataset");

    const VectorIndex index = VectorIndex::load(cfg.index_dir);
    const auto questions = load_dataset_jsonl(cfg.dataset_path);
    std::map<std::string, const Question*> by_id;
    for (const auto& q : questions) by_id[q.question_id] = &q;

    // Verdicts come from the iterative result cells.
    std::map<std::pair<std::string, std::string>, bool> verdicts;
    if (fs::exists(results_path)) {
        for (const auto& j : load_jsonl(results_path)) {
            RegimeResult cell = cell_from_json(j);
            if (cell.regime == Regime::iterative) {
                verdicts[{cell.model_id, cell.question_id}] = cell.correct;
            }
        }
    }

    RetryPolicy policy;
    if (cfg.deterministic) policy.sleep_ms = [](int) {};
    std::optional<Gateway> judge_gateway;
    const bool needs_judge = mode != AuditorMode::deterministic;
    if (needs_judge) judge_gateway.emplace(make_chat_backend(cfg.judge), policy, cfg.workers);

    std::optional<JsonlWriter> det_log, judge_log;
    std::vector<DiagnosticReport> det_reports, judge_reports;
    if (mode != AuditorMode::judge) {
        det_log.emplace((fs::path(cfg.out_dir) / "reports_deterministic.jsonl").string(),
                        /*append=*/false);
    }
    if (mode != AuditorMode::deterministic) {
        judge_log.emplace((fs::path(cfg.out_dir) / "reports_judge.jsonl").string(),
                          /*append=*/false);
    }

    AuditOutcome out;
    for (const auto& j : load_jsonl(runs_path)) {
        RunRecord run = run_from_json(j);
        if (run.failed) continue;
        auto q_it = by_id.find(run.question_id);
        if (q_it == by_id.end()) {
            ++out.missing;
            continue;
        }
        auto v_it = verdicts.find({run.model_id, run.question_id});
        if (v_it == verdicts.end()) {
            ++out.missing; // run without a scored cell: listed, not fatal
            continue;
        }
        attach_chunk_texts(run, index);

        if (mode != AuditorMode::judge) {
            DiagnosticReport report =
                audit_run(run, *q_it->second, v_it->second, AuditorMode::deterministic, nullptr,
                          nullptr, cfg.thresholds);
            det_log->append(report_to_json(report));
            det_reports.push_back(std::move(report));
            ++out.reports;
        }
        if (mode != AuditorMode::deterministic) {
            DiagnosticReport report =
                audit_run(run, *q_it->second, v_it->second, AuditorMode::judge, &*judge_gateway,
                          &cfg.judge, cfg.thresholds);
            judge_log->append(report_to_json(report));
            judge_reports.push_back(std::move(report));
            ++out.reports;
        }
    }

    if (mode == AuditorMode::both) {
        const AgreementMatrix agreement = compare_reports(det_reports, judge_reports);
        out.agreement = agreement.overall();
        json fields = json::object();
        for (const auto& [name, f] : agreement.fields) {
            fields[name] = {{"agree", f.agree}, {"total", f.total}};
        }
        json disagreements = json::array();
        for (const auto& d : agreement.disagreements) {
            disagreements.push_back({{"question_id", d.question_id},
                                     {"model_id", d.model_id},
                                     {"field", d.field},
                                     {"deterministic", d.deterministic_value},
                                     {"judge", d.judge_value}});
        }
        json doc{{"overall", agreement.overall()},
                 {"threshold", cfg.agreement_threshold},
                 {"passes", agreement.overall() >= cfg.agreement_threshold},
                 {"fields", std::move(fields)},
                 {"disagreements", std::move(disagreements)}};
        std::ofstream f(fs::path(cfg.out_dir) / "agreement.json",
                        std::ios::binary | std::ios::trunc);
        f << doc.dump(2) << "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

ReportOutcome cmd_report(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string results_path = (fs::path(cfg.out_dir) / "results.jsonl").string();
    if (!fs::exists(results_path)) throw IoError("no results log at " + results_path);
    if (cfg.dataset_path.empty()) throw ConfigError("report requires the dataset");

    ResultMatrix matrix;
    for (const auto& j : load_jsonl(results_path)) matrix.add(cell_from_json(j));
    const auto questions = load_dataset_jsonl(cfg.dataset_path);

    std::vector<DiagnosticReport> reports;
    const std::string det_path =
        (fs::path(cfg.out_dir) / "reports_deterministic.jsonl").string();
    const std::string judge_path = (fs::path(cfg.out_dir) / "reports_judge.jsonl").string();
    const std::string report_source = fs::exists(det_path) ? det_path
                                      : fs::exists(judge_path) ? judge_path
                                                               : std::string();
    if (!report_source.empty()) {
        for (const auto& j : load_jsonl(report_source)) reports.push_back(report_from_json(j));
    }

    std::map<std::pair<std::string, std::string>, metrics::RunDiagInput> run_info;
    const std::string runs_path = (fs::path(cfg.out_dir) / "runs.jsonl").string();
    std::map<std::pair<std::string, std::string>, bool> gap_by_key;
    for (const auto& r : reports) {
        gap_by_key[{r.model_id, r.question_id}] = !r.coverage.missed_hops.empty();
    }
    if (fs::exists(runs_path)) {
        for (const auto& j : load_jsonl(runs_path)) {
            RunRecord run = run_from_json(j);
            if (run.failed) continue;
            auto it = gap_by_key.find({run.model_id, run.question_id});
            if (it == gap_by_key.end()) continue;
            run_info[{run.model_id, run.question_id}] =
                metrics::RunDiagInput{run.finalized_step, it->second};
        }
    }

    const RunManifest manifest = build_manifest(cfg);
    const auto bundle =
        report::write_report_bundle((fs::path(cfg.out_dir) / "report").string(), matrix, reports,
                                    questions, run_info, manifest);
    ReportOutcome out;
    out.emitted = bundle.emitted;
    out.refused = bundle.refused;
    return out;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

std::vector<std::string> cmd_validate(const ExperimentConfig& cfg) {
    std::vector<std::string> problems;
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        problems.push_back(std::string("config: ") + e.what());
    }
    if (!cfg.corpus_path.empty()) {
        try {
            load_corpus_jsonl(cfg.corpus_path);
        } catch (const std::exception& e) {
            problems.push_back(std::string("corpus: ") + e.what());
        }
    }
    if (!cfg.dataset_path.empty()) {
        try {
            load_dataset_jsonl(cfg.dataset_path);
        } catch (const std::exception& e) {
            problems.push_back(std::string("dataset: ") + e.what());
        }
    }
    if (!cfg.prices_path.empty()) {
        try {
            PriceTable::load_json_file(cfg.prices_path);
        } catch (const std::exception& e) {
            problems.push_back(std::string("prices: ") + e.what());
        }
    }
    return problems;
}

} // namespace hoplab
