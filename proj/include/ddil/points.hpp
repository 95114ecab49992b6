#pragma once

#include <span>
#include <vector>

#include "ddil/denoiser.hpp"

namespace ddil {

// Row-major point cloud with optional class labels (empty = unlabeled).
struct LabeledPoints {
  int dim = 2;
  std::vector<double> coords;
  std::vector<int> labels;

  std::size_t size() const { return dim > 0 ? coords.size() / static_cast<std::size_t>(dim) : 0; }
  bool empty() const { return coords.empty(); }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(coords).subspan(i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
  }
  int label(std::size_t i) const { return labels.empty() ? kNullClass : labels[i]; }
  void push(std::span<const double> p, int label) {
    coords.insert(coords.end(), p.begin(), p.end());
    if (label != kNullClass) labels.push_back(label);
  }
};

}  // namespace ddil
