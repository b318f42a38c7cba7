#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hoplab/config.hpp"
#include "hoplab/gateway.hpp"
#include "hoplab/matrix.hpp"

namespace hoplab {

std::shared_ptr<ChatBackend> make_chat_backend(const ModelConfig& cfg);
std::shared_ptr<EmbeddingBackend> make_embedding_backend(const ModelConfig& cfg, int hash_dim);

struct IngestOutcome {
    std::size_t documents = 0;
    std::size_t chunks = 0;
    std::string index_dir;
};

/// Normalize, chunk, embed, persist; writes the index plus a run manifest.
IngestOutcome cmd_ingest(const ExperimentConfig& cfg);

struct RunOutcome {
    long long computed = 0;
    long long skipped = 0; // already present in the log
    long long failed = 0;  // gateway failures; rerun recomputes them
};

/// Evaluates models x questions x regimes with resumable JSONL logging.
/// Completed cells are skipped when resume is true. Results land in
/// out_dir/results.jsonl (+ runs.jsonl for trajectories, matrix.csv,
/// run_manifest.json).
RunOutcome cmd_run(const ExperimentConfig& cfg, const std::vector<Regime>& regimes,
                   const std::vector<std::string>& model_filter, bool resume);

struct AuditOutcome {
    long long reports = 0;
    long long missing = 0; // iterative cells without a stored run
    std::optional<double> agreement;
};

/// Audits every stored iterative run in the configured mode(s).
AuditOutcome cmd_audit(const ExperimentConfig& cfg,
                       const std::optional<std::string>& mode_override = std::nullopt);

struct ReportOutcome {
    std::vector<std::string> emitted;
    std::vector<std::string> refused;
};

ReportOutcome cmd_report(const ExperimentConfig& cfg);

/// Offline schema checks for config, corpus, and dataset. Returns the list
/// of problems (empty = valid).
std::vector<std::string> cmd_validate(const ExperimentConfig& cfg);

} // namespace hoplab
