#include "ddil/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <tuple>

#include "ddil/error.hpp"

namespace ddil::harness {

namespace {

struct Moments {
  double sum = 0.0, sum_sq = 0.0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
  }
  double mean(std::size_t n) const { return sum / static_cast<double>(n); }
  double sd(std::size_t n) const {
    if (n < 2) return 0.0;
    const double m = mean(n);
    return std::sqrt(std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1)));
  }
};

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows) {
  using Key = std::tuple<std::string, std::string, int>;
  struct Acc {
    std::size_t n = 0;
    Moments w2, precision, recall, density, coverage, diversity;
  };
  std::map<Key, Acc> groups;
  for (const MetricRow& r : rows) {
    Acc& a = groups[{r.dataset, r.method, r.steps}];
    ++a.n;
    a.w2.add(r.score.w2);
    a.precision.add(r.score.prdc.precision);
    a.recall.add(r.score.prdc.recall);
    a.density.add(r.score.prdc.density);
    a.coverage.add(r.score.prdc.coverage);
    a.diversity.add(r.diversity);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, a] : groups) {
    SummaryRow s;
    std::tie(s.dataset, s.method, s.steps) = key;
    s.seeds = a.n;
    s.w2_mean = a.w2.mean(a.n);
    s.w2_sd = a.w2.sd(a.n);
    s.precision_mean = a.precision.mean(a.n);
    s.recall_mean = a.recall.mean(a.n);
    s.density_mean = a.density.mean(a.n);
    s.coverage_mean = a.coverage.mean(a.n);
    s.coverage_sd = a.coverage.sd(a.n);
    s.diversity_mean = a.diversity.mean(a.n);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<MetricRow> collect_metrics(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw DataError("not a directory: " + root.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("metrics_") && name.ends_with(".csv")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<MetricRow> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    auto part = read_metrics_csv(in);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "dataset,method,steps,seeds,w2_mean,w2_sd,precision_mean,recall_mean,density_mean,coverage_mean,"
         "coverage_sd,diversity_mean\n";
  out << std::setprecision(10);
  for (const SummaryRow& r : rows) {
    out << r.dataset << ',' << r.method << ',' << r.steps << ',' << r.seeds << ',' << r.w2_mean << ',' << r.w2_sd
        << ',' << r.precision_mean << ',' << r.recall_mean << ',' << r.density_mean << ',' << r.coverage_mean << ','
        << r.coverage_sd << ',' << r.diversity_mean << '\n';
  }
}

}  // namespace ddil::harness
