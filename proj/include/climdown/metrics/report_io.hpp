#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "climdown/metrics/metrics.hpp"

namespace climdown::metrics {

/// One evaluated (model, zone, season) cell.
struct ReportRow {
  std::string model;
  std::string zone;
  std::string season;
  MetricReport report;
};

/// Columns: model,zone,season,n,<metric>...,<metric>_valid...
void write_reports_csv(std::ostream& out, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_reports_csv(std::istream& in);

nlohmann::json to_json(const MetricReport& r);
nlohmann::json to_json(const std::vector<ReportRow>& rows);

/// Shortest round-trip decimal for a double.
std::string format_double(double v);

}  // namespace climdown::metrics
