#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ddil/harness/experiments.hpp"

namespace ddil::harness {

// Mean and sample standard deviation of each metric over the seeds of one
// (dataset, method, steps) group.
struct SummaryRow {
  std::string dataset;
  std::string method;
  int steps = 0;
  std::size_t seeds = 0;
  double w2_mean = 0.0, w2_sd = 0.0;
  double precision_mean = 0.0, recall_mean = 0.0, density_mean = 0.0;
  double coverage_mean = 0.0, coverage_sd = 0.0;
  double diversity_mean = 0.0;
};

// Groups are ordered by dataset, method, steps.
std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows);

// Every metrics_*.csv below root, in sorted path order.
std::vector<MetricRow> collect_metrics(const std::filesystem::path& root);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace ddil::harness
