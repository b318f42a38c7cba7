#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoplab/controller.hpp"
#include "hoplab/diagnostics.hpp"
#include "hoplab/matrix.hpp"

namespace hoplab {

/// Append-only JSONL writer: one flushed line per record, single writer.
class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path, bool append = true);
    void append(const nlohmann::json& record);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
};

/// Reads a JSONL file. A torn final line (no trailing newline, unparseable)
/// is quarantined to <path>.quarantine and removed from the log; a malformed
/// interior line raises ValidationError with its line number.
std::vector<nlohmann::json> load_jsonl(const std::string& path);

// RunRecord serialization stores chunk references only (chunk_id, doc_id,
// score); attach_chunk_texts rehydrates text from the index for audits.
nlohmann::json run_to_json(const RunRecord& run);
RunRecord run_from_json(const nlohmann::json& j);
void attach_chunk_texts(RunRecord& run, const VectorIndex& index);

nlohmann::json cell_to_json(const RegimeResult& cell);
RegimeResult cell_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const DiagnosticReport& report);
DiagnosticReport report_from_json(const nlohmann::json& j);

} // namespace hoplab
