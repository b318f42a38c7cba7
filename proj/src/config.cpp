#include "hoplab/config.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "hoplab/errors.hpp"
#include "hoplab/hash.hpp"
#include "hoplab/prompts.hpp"

namespace hoplab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ModelConfig model_from_json(const json& j) {
    ModelConfig m;
    m.model_id = j.at("model_id").get<std::string>();
    m.backend = j.value("backend", std::string("scripted"));
    m.endpoint = j.value("endpoint", std::string());
    m.api_key_env = j.value("api_key_env", std::string());
    m.reasoning_mode = j.value("reasoning", false);
    m.max_output_tokens = j.value("max_output_tokens", 4096LL);
    m.temperature = j.value("temperature", 0.0);
    m.script_path = j.value("script", std::string());
    return m;
}

json model_to_json(const ModelConfig& m) {
    return json{{"model_id", m.model_id},
                {"backend", m.backend},
                {"endpoint", m.endpoint},
                {"api_key_env", m.api_key_env}, // name only, never the secret
                {"reasoning", m.reasoning_mode},
                {"max_output_tokens", m.max_output_tokens},
                {"temperature", m.temperature},
                {"script", m.script_path}};
}

void validate_model(const ModelConfig& m, const std::string& what) {
    if (m.model_id.empty()) throw ConfigError(what + ": model_id must be non-empty");
    if (m.backend != "scripted" && m.backend != "openai" && m.backend != "anthropic" &&
        m.backend != "hash") {
        throw ConfigError(what + " (" + m.model_id + "): unknown backend '" + m.backend + "'");
    }
    if (m.backend == "scripted" && m.script_path.empty()) {
        throw ConfigError(what + " (" + m.model_id + "): scripted backend requires a script");
    }
    if ((m.backend == "openai" || m.backend == "anthropic") && m.endpoint.empty()) {
        throw ConfigError(what + " (" + m.model_id + "): HTTP backend requires an endpoint");
    }
    if (m.max_output_tokens < 1) {
        throw ConfigError(what + " (" + m.model_id + "): max_output_tokens must be >= 1");
    }
    if (m.temperature < 0.0) {
        throw ConfigError(what + " (" + m.model_id + "): temperature must be >= 0");
    }
}

std::string resolve_relative(const std::string& base_dir, const std::string& path) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / p).lexically_normal().string();
}

} // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed config " + path + ": " + e.what());
    }

    ExperimentConfig cfg;
    cfg.config_path = path;
    const std::string base = fs::path(path).parent_path().string();

    cfg.corpus_path = resolve_relative(base, j.value("corpus", std::string()));
    cfg.dataset_path = resolve_relative(base, j.value("dataset", std::string()));
    cfg.index_dir = resolve_relative(base, j.value("index_dir", std::string()));
    cfg.out_dir = resolve_relative(base, j.value("out_dir", std::string("out")));
    cfg.window = j.value("window", std::size_t{220});
    cfg.overlap = j.value("overlap", std::size_t{50});
    cfg.top_k = j.value("top_k", 10);
    cfg.budget = j.value("budget", 5);
    cfg.workers = j.value("workers", 1);
    cfg.deterministic = j.value("deterministic", false);
    if (j.contains("thresholds")) {
        cfg.thresholds.coverage = j["thresholds"].value("coverage", 0.8);
        cfg.thresholds.sufficiency = j["thresholds"].value("sufficiency", 0.6);
    }
    cfg.auditor_mode = j.value("auditor_mode", std::string("deterministic"));
    cfg.agreement_threshold = j.value("agreement_threshold", 0.9);

    for (const auto& mj : j.value("models", json::array())) {
        ModelConfig m = model_from_json(mj);
        m.script_path = resolve_relative(base, m.script_path);
        cfg.models.push_back(std::move(m));
    }
    if (j.contains("judge")) {
        cfg.judge = model_from_json(j["judge"]);
        cfg.judge.script_path = resolve_relative(base, cfg.judge.script_path);
    } else {
        cfg.judge.model_id = "gpt-5-mini"; // documented default judge
        cfg.judge.backend = "openai";
        cfg.judge.endpoint = "https://api.openai.com/v1";
        cfg.judge.api_key_env = "OPENAI_API_KEY";
    }
    if (j.contains("embedder")) {
        cfg.embedder = model_from_json(j["embedder"]);
        cfg.embedder.script_path = resolve_relative(base, cfg.embedder.script_path);
        cfg.hash_embed_dim = j["embedder"].value("dim", 64);
    } else {
        cfg.embedder.model_id = "hash-64";
        cfg.embedder.backend = "hash";
    }
    cfg.prices_path = resolve_relative(base, j.value("prices", std::string()));
    return cfg;
}

void ExperimentConfig::validate() const {
    if (window <= overlap) {
        throw ConfigError("window (" + std::to_string(window) + ") must exceed overlap (" +
                          std::to_string(overlap) + ")");
    }
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    if (budget < 1) throw ConfigError("budget must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (agreement_threshold < 0.0 || agreement_threshold > 1.0) {
        throw ConfigError("agreement_threshold must be in [0,1]");
    }
    if (thresholds.coverage < 0.0 || thresholds.coverage > 1.0 || thresholds.sufficiency < 0.0 ||
        thresholds.sufficiency > 1.0) {
        throw ConfigError("diagnostic thresholds must be in [0,1]");
    }
    parse_auditor_mode(auditor_mode);
    for (const auto& m : models) validate_model(m, "model");
    if (!models.empty()) validate_model(judge, "judge");
    if (embedder.backend != "hash") validate_model(embedder, "embedder");
    if (hash_embed_dim < 1) throw ConfigError("embedder dim must be >= 1");
}

json ExperimentConfig::to_json() const {
    json models_json = json::array();
    for (const auto& m : models) models_json.push_back(model_to_json(m));
    return json{{"corpus", corpus_path},
                {"dataset", dataset_path},
                {"index_dir", index_dir},
                {"out_dir", out_dir},
                {"window", window},
                {"overlap", overlap},
                {"top_k", top_k},
                {"budget", budget},
                {"workers", workers},
                {"deterministic", deterministic},
                {"thresholds",
                 {{"coverage", thresholds.coverage}, {"sufficiency", thresholds.sufficiency}}},
                {"auditor_mode", auditor_mode},
                {"agreement_threshold", agreement_threshold},
                {"models", std::move(models_json)},
                {"judge", model_to_json(judge)},
                {"embedder", model_to_json(embedder)},
                {"hash_embed_dim", hash_embed_dim},
                {"prices", prices_path}};
}

json RunManifest::to_json() const {
    return json{{"config_hash", config_hash},
                {"dataset_hash", dataset_hash},
                {"corpus_hash", corpus_hash},
                {"prompt_hashes", prompt_hashes},
                {"thresholds",
                 {{"coverage", coverage_threshold}, {"sufficiency", sufficiency_threshold}}},
                {"model_ids", model_ids},
                {"judge_id", judge_id},
                {"auditor_mode", auditor_mode},
                {"tool_version", tool_version},
                {"timestamp", timestamp}};
}

void RunManifest::write(const std::string& path) const {
    if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << to_json().dump(2) << "\n";
}

RunManifest build_manifest(const ExperimentConfig& cfg) {
    RunManifest m;
    m.config_hash = sha256_hex(cfg.to_json().dump());
    if (!cfg.dataset_path.empty() && fs::exists(cfg.dataset_path)) {
        m.dataset_hash = sha256_file_hex(cfg.dataset_path);
    }
    if (!cfg.corpus_path.empty() && fs::exists(cfg.corpus_path)) {
        m.corpus_hash = sha256_file_hex(cfg.corpus_path);
    }
    m.prompt_hashes = prompts::hashes();
    m.coverage_threshold = cfg.thresholds.coverage;
    m.sufficiency_threshold = cfg.thresholds.sufficiency;
    for (const auto& model : cfg.models) m.model_ids.push_back(model.model_id);
    m.judge_id = cfg.judge.model_id;
    m.auditor_mode = cfg.auditor_mode;
    if (!cfg.deterministic) {
        const auto now = std::chrono::system_clock::now();
        const auto t = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        m.timestamp = buf;
    }
    return m;
}

} // namespace hoplab
