#include "ddil/harness/dataset.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "ddil/error.hpp"

namespace ddil::harness {

namespace {

constexpr double kRingRadius = 0.7;

bool in_box(double x, double y) { return x >= -1.0 && x <= 1.0 && y >= -1.0 && y <= 1.0; }

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::gauss8: return "gauss8";
    case DatasetKind::checkerboard: return "checkerboard";
    case DatasetKind::moons: return "moons";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "gauss8") return DatasetKind::gauss8;
  if (name == "checkerboard") return DatasetKind::checkerboard;
  if (name == "moons") return DatasetKind::moons;
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

int class_count(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::gauss8: return 8;
    case DatasetKind::checkerboard: return 8;
    case DatasetKind::moons: return 2;
  }
  return 0;
}

std::array<std::array<double, 2>, 8> gauss8_centers() {
  std::array<std::array<double, 2>, 8> centers{};
  for (int k = 0; k < 8; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / 8.0;
    centers[static_cast<std::size_t>(k)] = {kRingRadius * std::cos(angle), kRingRadius * std::sin(angle)};
  }
  return centers;
}

SyntheticDataset generate_dataset(const DatasetSpec& spec, Rng& rng) {
  if (spec.n_points == 0) throw ConfigError("dataset needs at least one point");
  if (spec.noise < 0.0) throw ConfigError("dataset noise must be non-negative");
  SyntheticDataset ds{spec, class_count(spec.kind), {}};
  ds.points.dim = 2;
  ds.points.coords.reserve(2 * spec.n_points);
  ds.points.labels.reserve(spec.n_points);
  const auto centers = gauss8_centers();

  while (ds.points.size() < spec.n_points) {
    const int label = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(ds.classes)));
    double x = 0.0, y = 0.0;
    switch (spec.kind) {
      case DatasetKind::gauss8: {
        const auto& c = centers[static_cast<std::size_t>(label)];
        x = c[0] + spec.noise * standard_normal(rng);
        y = c[1] + spec.noise * standard_normal(rng);
        break;
      }
      case DatasetKind::checkerboard: {
        // 4 x 4 cells of width 0.5; the dark cells have even row + column.
        const int row = label / 2;
        const int col = 2 * (label % 2) + (row % 2);
        x = -1.0 + 0.5 * col + 0.5 * uniform01(rng);
        y = -1.0 + 0.5 * row + 0.5 * uniform01(rng);
        break;
      }
      case DatasetKind::moons: {
        // Two interleaved half circles, shifted and scaled by 0.6 into the box.
        const double angle = std::numbers::pi * uniform01(rng);
        double mx = label == 0 ? std::cos(angle) : 1.0 - std::cos(angle);
        double my = label == 0 ? std::sin(angle) : 0.5 - std::sin(angle);
        mx += spec.noise / 0.6 * standard_normal(rng);
        my += spec.noise / 0.6 * standard_normal(rng);
        x = 0.6 * (mx - 0.5);
        y = 0.6 * (my - 0.25);
        break;
      }
    }
    if (!in_box(x, y)) continue;
    const double p[2] = {x, y};
    ds.points.push(p, label);
  }
  return ds;
}

std::array<std::size_t, 8> gauss8_mode_counts(const LabeledPoints& points) {
  const auto centers = gauss8_centers();
  std::array<std::size_t, 8> counts{};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points.point(i);
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < 8; ++k) {
      const double dx = p[0] - centers[k][0];
      const double dy = p[1] - centers[k][1];
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    ++counts[best];
  }
  return counts;
}

int gauss8_covered_modes(const LabeledPoints& points) {
  const auto counts = gauss8_mode_counts(points);
  const double threshold = static_cast<double>(points.size()) / 32.0;
  int covered = 0;
  for (const std::size_t c : counts) {
    if (static_cast<double>(c) >= threshold) ++covered;
  }
  return covered;
}

void write_points_csv(std::ostream& out, const LabeledPoints& points) {
  out << "x,y,label\n";
  out.precision(17);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points.point(i);
    out << p[0] << ',' << p[1] << ',' << points.label(i) << '\n';
  }
}

}  // namespace ddil::harness
