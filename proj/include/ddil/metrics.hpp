#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ddil/denoiser.hpp"
#include "ddil/points.hpp"
#include "ddil/schedule.hpp"
#include "ddil/solver.hpp"

namespace ddil {

// Metric inputs are plain point clouds; labels are ignored.
using SampleSet = LabeledPoints;

struct PrdcReport {
  double precision = 0.0;
  double recall = 0.0;
  double density = 0.0;
  double coverage = 0.0;
  int k = 0;
};

// Squared distance from each point to its k-th nearest neighbour within the
// set, excluding itself. Zero distances (exact duplicates) are skipped; with
// fewer than k distinct neighbours the farthest distinct one is used, and a
// set of identical points gets radius 0.
std::vector<double> knn_sq_radii(const SampleSet& points, int k);

// k-NN manifold precision, recall, density and coverage (Naeem et al. style)
// on raw coordinates. Ball membership is d <= radius. Needs more than k
// points in each set; throws DomainError otherwise.
PrdcReport prdc(const SampleSet& real, const SampleSet& fake, int k = 5);

enum class W2Mode { exact, sliced };

std::string_view to_string(W2Mode mode);

struct W2Result {
  double distance = 0.0;
  W2Mode mode = W2Mode::exact;
  // Exact mode with unequal sizes: the larger set was subsampled to the smaller size.
  bool resampled = false;
};

// sqrt(min over perfect matchings of mean squared distance); sizes must match.
double exact_w2(const SampleSet& a, const SampleSet& b);

// Monte-Carlo sliced W2 over random unit directions drawn from `seed`.
double sliced_w2(const SampleSet& a, const SampleSet& b, int projections, std::uint64_t seed);

// Exact matching when both sets have at most exact_limit points, sliced
// (128 projections) otherwise. Unequal sizes in exact mode are subsampled
// to the smaller size with a warning on stderr.
W2Result wasserstein2(const SampleSet& a, const SampleSet& b, std::uint64_t seed = 0, std::size_t exact_limit = 1024,
                      int projections = 128);

// Mean Euclidean distance over all unordered pairs; needs at least 2 points.
double mean_pairwise_distance(const SampleSet& points);

// Generates n_seeds samples for one condition (noise seeds derived from
// `seed`) and returns their mean pairwise distance.
double pairwise_diversity(const Denoiser& model, int cond, int n_seeds, const Discretization& grid,
                          const SolverConfig& config, std::uint64_t seed);

}  // namespace ddil
