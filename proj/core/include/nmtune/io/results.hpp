#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nmtune/harness.hpp"

namespace nmtune::io {

/// JSON for one cell. Doubles use the shortest round-tripping decimal form.
std::string result_to_json(const EvalResult& r);
EvalResult result_from_json(const std::string& text);

/// Writes <dir>/<cell-id>.json per result, plus <dir>/features/<cell-id>.<variant>.fmat
/// when features were kept.
void write_results(const std::filesystem::path& dir, const std::vector<EvalResult>& results);

/// Every <cell-id>.json under `dir`, in cell-id order.
std::vector<EvalResult> read_results(const std::filesystem::path& dir);

std::string summary_to_json(const std::vector<SummaryRow>& rows);
/// One row per (mode, task, eta, fraction, gamma): plot-ready series of the
/// four metrics against gamma.
std::string summary_to_csv(const std::vector<SummaryRow>& rows);
/// Fixed-width human-readable table.
std::string summary_to_table(const std::vector<SummaryRow>& rows);

std::string spectrum_to_json(const SpectrumReport& report);

/// Trained head: mode plus every parameter matrix in parameters() order.
std::string head_to_json(const nn::TuneHead& head);

}  // namespace nmtune::io
