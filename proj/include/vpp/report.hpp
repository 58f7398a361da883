#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vpp/eval_harness.hpp"
#include "vpp/sweep.hpp"

namespace vpp {

enum class ReportFormat { Markdown, Csv };

struct SummaryRow {
  std::string value;
  double mean_pct = 0.0;
  double std_pct = 0.0;  // sample standard deviation, 0 for one run
  int runs = 0;
  int failures = 0;
};

struct SweepSummary {
  SweepParam param = SweepParam::Components;
  std::vector<SummaryRow> rows;
  std::optional<double> delta_pct;  // last row minus first row
  std::string fingerprint;
};

SweepSummary summarize(const SweepTable& table);

// Numbers are percentages with two decimals; markdown and csv share the
// exact numeral strings.
std::string render(const SweepSummary& s, ReportFormat f);
std::string render(const EvalReport& r, ReportFormat f);
std::string format_pct(double pct, bool signed_ = false);

// Throws std::runtime_error when the file cannot be written.
void emit_report(const std::filesystem::path& path, const std::string& content);

// Rows of a csv written by render(); comment lines starting with '#' are skipped.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace vpp
