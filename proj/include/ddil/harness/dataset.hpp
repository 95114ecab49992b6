#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "ddil/points.hpp"
#include "ddil/rng.hpp"

namespace ddil::harness {

enum class DatasetKind { gauss8, checkerboard, moons };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::gauss8;
  std::size_t n_points = 8192;
  double noise = 0.05;
  bool operator==(const DatasetSpec&) const = default;
};

// Every point lies in [-1, 1]^2; labels are the mixture component
// (gauss8: ring position, checkerboard: dark cell, moons: which moon).
struct SyntheticDataset {
  DatasetSpec spec;
  int classes = 0;
  LabeledPoints points;
};

int class_count(DatasetKind kind);

SyntheticDataset generate_dataset(const DatasetSpec& spec, Rng& rng);

// Ring of eight centres at radius 0.7.
std::array<std::array<double, 2>, 8> gauss8_centers();

// Number of points nearest to each gauss8 centre.
std::array<std::size_t, 8> gauss8_mode_counts(const LabeledPoints& points);

// Modes holding at least n / (4 * 8) of the points.
int gauss8_covered_modes(const LabeledPoints& points);

// CSV with header x,y,label.
void write_points_csv(std::ostream& out, const LabeledPoints& points);

}  // namespace ddil::harness
