#include "climdown/metrics/report_io.hpp"

#include <charconv>
#include <sstream>

#include "climdown/error.hpp"

namespace climdown::metrics {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ValidationError("report csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

void write_reports_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "model,zone,season,n";
  for (auto id : kAllMetrics) out << ',' << metric_name(id);
  for (auto id : kAllMetrics) out << ',' << metric_name(id) << "_valid";
  out << '\n';
  for (const auto& row : rows) {
    out << row.model << ',' << row.zone << ',' << row.season << ',' << row.report.n;
    for (auto id : kAllMetrics) {
      out << ',';
      if (row.report.is_valid(id)) out << format_double(row.report.raw(id));
    }
    for (auto id : kAllMetrics) out << ',' << (row.report.is_valid(id) ? 1 : 0);
    out << '\n';
  }
}

std::vector<ReportRow> read_reports_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("report csv: empty input");
  const auto header = split_csv(line);
  constexpr std::size_t kCols = 4 + 2 * kMetricCount;
  if (header.size() != kCols || header[0] != "model") {
    throw ValidationError("report csv: unexpected header");
  }
  std::vector<ReportRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != kCols) {
      throw ValidationError("report csv line " + std::to_string(lineno) + ": expected " +
                            std::to_string(kCols) + " fields");
    }
    ReportRow row{f[0], f[1], f[2], {}};
    row.report.n = static_cast<std::size_t>(parse_double(f[3], lineno));
    for (std::size_t k = 0; k < kMetricCount; ++k) {
      row.report.valid[k] = f[4 + kMetricCount + k] == "1";
      if (row.report.valid[k]) row.report.values[k] = parse_double(f[4 + k], lineno);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["n"] = r.n;
  nlohmann::json flags = nlohmann::json::array();
  for (auto id : kAllMetrics) {
    const std::string name(metric_name(id));
    if (r.is_valid(id)) {
      j[name] = r.raw(id);
    } else {
      j[name] = nullptr;
      flags.push_back(name + "_undefined");
    }
  }
  j["flags"] = flags;
  return j;
}

nlohmann::json to_json(const std::vector<ReportRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    auto j = to_json(row.report);
    j["model"] = row.model;
    j["zone"] = row.zone;
    j["season"] = row.season;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace climdown::metrics
