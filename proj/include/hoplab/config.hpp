#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoplab/diagnostics.hpp"
#include "hoplab/gateway.hpp"

namespace hoplab {

inline constexpr const char* kToolVersion = "hoplab 0.1.0";

/// Declarative experiment configuration. CLI flags override file values;
/// the run manifest records the merged result. Defaults are the protocol
/// constants (220/50 windows, top-10 retrieval, 5-step budget).
struct ExperimentConfig {
    std::string config_path; // source file, when loaded from disk

    std::string corpus_path;
    std::string dataset_path;
    std::string index_dir;
    std::string out_dir = "out";

    std::size_t window = 220;
    std::size_t overlap = 50;
    int top_k = 10;
    int budget = 5;
    int workers = 1;
    bool deterministic = false; // zero wall-clock fields, omit timestamps

    DiagnosticThresholds thresholds;
    std::string auditor_mode = "deterministic"; // deterministic | judge | both
    double agreement_threshold = 0.9;

    std::vector<ModelConfig> models;
    ModelConfig judge;    // defaults to the documented judge model
    ModelConfig embedder; // backend: openai | scripted | hash
    int hash_embed_dim = 64;

    std::string prices_path;

    static ExperimentConfig load(const std::string& path);
    void validate() const; // throws ConfigError / ValidationError

    /// Canonical JSON with secrets reduced to environment-variable names.
    nlohmann::json to_json() const;
};

/// Reproducibility envelope for one run; immutable once written.
struct RunManifest {
    std::string config_hash;
    std::string dataset_hash;
    std::string corpus_hash;
    std::map<std::string, std::string> prompt_hashes;
    double coverage_threshold = 0.8;
    double sufficiency_threshold = 0.6;
    std::vector<std::string> model_ids;
    std::string judge_id;
    std::string auditor_mode;
    std::string tool_version = kToolVersion;
    std::string timestamp; // RFC3339; empty in deterministic mode

    nlohmann::json to_json() const;
    void write(const std::string& path) const;
};

RunManifest build_manifest(const ExperimentConfig& cfg);

} // namespace hoplab
