#pragma once

#include <map>
#include <string>
#include <vector>

#include "hoplab/config.hpp"
#include "hoplab/dataset.hpp"
#include "hoplab/diagnostics.hpp"
#include "hoplab/matrix.hpp"
#include "hoplab/metrics.hpp"

namespace hoplab::report {

struct Bundle {
    std::vector<std::string> emitted; // file names relative to the bundle dir
    std::vector<std::string> refused; // "metric: reason"
};

/// Fixed-decimal rendering used by every table ("81.96", "3.6").
std::string fmt(double value, int decimals);

std::string render_accuracy_md(const std::vector<metrics::AccuracyCell>& cells);
std::string render_pcr_md(const std::vector<metrics::PcrRow>& rows);

/// Renders every metric the inputs allow into `dir`: one machine-readable
/// report.json (manifest embedded) plus Markdown/CSV tables and plot-ready
/// CSVs. Metrics whose required regimes or cohorts are missing are refused
/// individually with a reason; everything else is still emitted.
Bundle write_report_bundle(
    const std::string& dir, const ResultMatrix& matrix,
    const std::vector<DiagnosticReport>& reports, const std::vector<Question>& questions,
    const std::map<std::pair<std::string, std::string>, metrics::RunDiagInput>& run_info,
    const RunManifest& manifest);

} // namespace hoplab::report
