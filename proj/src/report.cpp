#include "vpp/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vpp {

std::string format_pct(double pct, bool signed_) {
  char buf[32];
  std::snprintf(buf, sizeof buf, signed_ ? "%+.2f" : "%.2f", pct);
  std::string s = buf;
  if (s == "-0.00" || s == "+0.00") s = signed_ ? "+0.00" : "0.00";
  return s;
}

SweepSummary summarize(const SweepTable& table) {
  SweepSummary s;
  s.param = table.param;
  s.fingerprint = table.fingerprint;
  for (const std::string& v : table.values) {
    SummaryRow row;
    row.value = v;
    std::vector<double> acc;
    for (const CellResult& c : table.cells) {
      if (c.value != v) continue;
      if (c.ok) acc.push_back(100.0 * c.accuracy);
      else ++row.failures;
    }
    row.runs = int(acc.size());
    if (!acc.empty()) {
      double sum = 0.0;
      for (double a : acc) sum += a;
      row.mean_pct = sum / double(acc.size());
      if (acc.size() > 1) {
        double ss = 0.0;
        for (double a : acc) ss += (a - row.mean_pct) * (a - row.mean_pct);
        row.std_pct = std::sqrt(ss / double(acc.size() - 1));
      }
    }
    s.rows.push_back(row);
  }
  if (s.rows.size() >= 2) {
    // Difference of the printed (rounded) means, so the row is reproducible
    // from the table itself.
    const double first = std::stod(format_pct(s.rows.front().mean_pct));
    const double last = std::stod(format_pct(s.rows.back().mean_pct));
    s.delta_pct = last - first;
  }
  return s;
}

std::string render(const SweepSummary& s, ReportFormat f) {
  std::ostringstream out;
  const std::string name = to_string(s.param);
  if (f == ReportFormat::Markdown) {
    out << "<!-- sweep " << name << " fingerprint " << s.fingerprint << " -->\n";
    out << "| " << name << " | Acc@0.5 mean (%) | std (%) | runs | failures |\n";
    out << "|---|---:|---:|---:|---:|\n";
    for (const SummaryRow& r : s.rows) {
      out << "| " << r.value << " | " << format_pct(r.mean_pct) << " | " << format_pct(r.std_pct)
          << " | " << r.runs << " | " << r.failures << " |\n";
    }
    if (s.delta_pct) {
      out << "| delta (" << s.rows.back().value << " - " << s.rows.front().value << ") | "
          << format_pct(*s.delta_pct, true) << " |  |  |  |\n";
    }
  } else {
    out << "# sweep " << name << " fingerprint " << s.fingerprint << "\n";
    out << "parameter,value,mean_acc_pct,std_acc_pct,runs,failures\n";
    for (const SummaryRow& r : s.rows) {
      out << name << ',' << r.value << ',' << format_pct(r.mean_pct) << ','
          << format_pct(r.std_pct) << ',' << r.runs << ',' << r.failures << '\n';
    }
    if (s.delta_pct) {
      out << name << ",delta (" << s.rows.back().value << " - " << s.rows.front().value << "),"
          << format_pct(*s.delta_pct, true) << ",,,\n";
    }
  }
  return out.str();
}

std::string render(const EvalReport& r, ReportFormat f) {
  std::ostringstream out;
  char thr[16];
  std::snprintf(thr, sizeof thr, "%.2f", r.threshold);
  if (f == ReportFormat::Markdown) {
    out << "<!-- eval fingerprint " << r.fingerprint << " iou " << thr << " -->\n";
    out << "| split | n | Acc@" << thr << " (%) | parse failures |\n|---|---:|---:|---:|\n";
    for (const EvalRow& row : r.rows) {
      out << "| " << row.split << " | " << row.n << " | " << format_pct(100.0 * row.accuracy)
          << " | " << row.parse_failures << " |\n";
    }
  } else {
    out << "# eval fingerprint " << r.fingerprint << " iou " << thr << "\n";
    out << "split,n,acc_pct,parse_failures\n";
    for (const EvalRow& row : r.rows) {
      out << row.split << ',' << row.n << ',' << format_pct(100.0 * row.accuracy) << ','
          << row.parse_failures << '\n';
    }
  }
  return out.str();
}

void emit_report(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing report " + path.string());
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace vpp
