#include "ddil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>

#include "ddil/error.hpp"
#include "ddil/kernels.hpp"
#include "ddil/rng.hpp"

namespace ddil {

namespace {

// Column-major copy: coordinate d of point j at [d * n + j].
std::vector<double> to_columns(const SampleSet& s) {
  const std::size_t n = s.size();
  const std::size_t dim = static_cast<std::size_t>(s.dim);
  std::vector<double> cols(n * dim);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t d = 0; d < dim; ++d) cols[d * n + j] = s.coords[j * dim + d];
  }
  return cols;
}

void check_dims(const SampleSet& a, const SampleSet& b) {
  if (a.dim != b.dim) throw ShapeError("sample sets differ in dimension");
}

SampleSet subsample(const SampleSet& s, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates with explicit draws keeps the result library independent.
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  SampleSet out;
  out.dim = s.dim;
  for (std::size_t i = 0; i < count; ++i) out.push(s.point(idx[i]), kNullClass);
  return out;
}

}  // namespace

std::vector<double> knn_sq_radii(const SampleSet& points, int k) {
  const std::size_t n = points.size();
  if (k <= 0) throw DomainError("k must be positive");
  const std::vector<double> cols = to_columns(points);
  const auto& kern = kernels::active();
  std::vector<double> radii(n, 0.0), dists(n), distinct;
  distinct.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    kern.sq_dists(points.point(i).data(), cols.data(), static_cast<std::size_t>(points.dim), n, n, dists.data());
    distinct.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && dists[j] > 0.0) distinct.push_back(dists[j]);
    }
    if (distinct.empty()) continue;
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), distinct.size()) - 1;
    std::nth_element(distinct.begin(), distinct.begin() + static_cast<std::ptrdiff_t>(kk), distinct.end());
    radii[i] = distinct[kk];
  }
  return radii;
}

PrdcReport prdc(const SampleSet& real, const SampleSet& fake, int k) {
  check_dims(real, fake);
  const std::size_t n_real = real.size();
  const std::size_t n_fake = fake.size();
  if (k <= 0 || n_real <= static_cast<std::size_t>(k) || n_fake <= static_cast<std::size_t>(k)) {
    throw DomainError("PRDC needs more than k points in both sets");
  }
  const std::vector<double> real_r = knn_sq_radii(real, k);
  const std::vector<double> fake_r = knn_sq_radii(fake, k);
  const std::vector<double> real_cols = to_columns(real);
  const auto& kern = kernels::active();

  std::vector<double> dists(n_real);
  std::vector<double> nearest_fake(n_real, std::numeric_limits<double>::infinity());
  std::vector<char> recalled(n_real, 0);
  std::size_t precise = 0;
  std::size_t covering_balls = 0;
  for (std::size_t j = 0; j < n_fake; ++j) {
    kern.sq_dists(fake.point(j).data(), real_cols.data(), static_cast<std::size_t>(real.dim), n_real, n_real,
                  dists.data());
    std::size_t inside = 0;
    for (std::size_t i = 0; i < n_real; ++i) {
      const double d = dists[i];
      if (d <= real_r[i]) ++inside;
      if (d < nearest_fake[i]) nearest_fake[i] = d;
      if (d <= fake_r[j]) recalled[i] = 1;
    }
    if (inside > 0) ++precise;
    covering_balls += inside;
  }
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n_real; ++i) {
    if (nearest_fake[i] <= real_r[i]) ++covered;
  }
  const auto recalled_count = static_cast<std::size_t>(std::count(recalled.begin(), recalled.end(), 1));

  PrdcReport report;
  report.k = k;
  report.precision = static_cast<double>(precise) / static_cast<double>(n_fake);
  report.recall = static_cast<double>(recalled_count) / static_cast<double>(n_real);
  report.density = static_cast<double>(covering_balls) / (static_cast<double>(k) * static_cast<double>(n_fake));
  report.coverage = static_cast<double>(covered) / static_cast<double>(n_real);
  return report;
}

std::string_view to_string(W2Mode mode) { return mode == W2Mode::exact ? "exact" : "sliced"; }

double exact_w2(const SampleSet& a, const SampleSet& b) {
  check_dims(a, b);
  const std::size_t n = a.size();
  if (n != b.size()) throw ShapeError("exact W2 needs equal-size sets");
  if (n == 0) throw DomainError("W2 of empty sets");

  // cost[i][j] = |a_i - b_j|^2, rows 1-based to match the potentials below.
  const std::vector<double> b_cols = to_columns(b);
  const auto& kern = kernels::active();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    kern.sq_dists(a.point(i).data(), b_cols.data(), static_cast<std::size_t>(a.dim), n, n, cost.data() + i * n);
  }

  // Hungarian algorithm with row/column potentials, O(n^3).
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      const double* row = cost.data() + (i0 - 1) * n;
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost[(match[j] - 1) * n + (j - 1)];
  return std::sqrt(std::max(0.0, total) / static_cast<double>(n));
}

double sliced_w2(const SampleSet& a, const SampleSet& b, int projections, std::uint64_t seed) {
  check_dims(a, b);
  if (a.empty() || b.empty()) throw DomainError("W2 of empty sets");
  if (projections <= 0) throw DomainError("sliced W2 needs at least one projection");
  const std::size_t dim = static_cast<std::size_t>(a.dim);
  const std::size_t na = a.size(), nb = b.size(), m = std::max(na, nb);
  Rng rng(seed);
  std::vector<double> dir(dim), pa(na), pb(nb);
  double total = 0.0;
  for (int p = 0; p < projections; ++p) {
    double norm = 0.0;
    do {
      for (double& x : dir) x = standard_normal(rng);
      norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
    } while (norm == 0.0);
    for (double& x : dir) x /= norm;
    for (std::size_t i = 0; i < na; ++i) pa[i] = kernels::dot(a.point(i).data(), dir.data(), dim);
    for (std::size_t i = 0; i < nb; ++i) pb[i] = kernels::dot(b.point(i).data(), dir.data(), dim);
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double sq = 0.0;
    for (std::size_t q = 0; q < m; ++q) {
      // Quantile level (q + 1/2) / m on both empirical distributions.
      const double level = (static_cast<double>(q) + 0.5) / static_cast<double>(m);
      const double x = pa[std::min(na - 1, static_cast<std::size_t>(level * static_cast<double>(na)))];
      const double y = pb[std::min(nb - 1, static_cast<std::size_t>(level * static_cast<double>(nb)))];
      sq += (x - y) * (x - y);
    }
    total += sq / static_cast<double>(m);
  }
  return std::sqrt(total / projections);
}

W2Result wasserstein2(const SampleSet& a, const SampleSet& b, std::uint64_t seed, std::size_t exact_limit,
                      int projections) {
  check_dims(a, b);
  const std::size_t n = std::min(a.size(), b.size());
  if (std::max(a.size(), b.size()) > exact_limit) {
    return {sliced_w2(a, b, projections, seed), W2Mode::sliced, false};
  }
  if (a.size() == b.size()) return {exact_w2(a, b), W2Mode::exact, false};
  std::clog << "warning: W2 sets differ in size (" << a.size() << " vs " << b.size() << "); subsampling to " << n
            << '\n';
  Rng rng(seed);
  const SampleSet aa = a.size() > n ? subsample(a, n, rng) : a;
  const SampleSet bb = b.size() > n ? subsample(b, n, rng) : b;
  return {exact_w2(aa, bb), W2Mode::exact, true};
}

double mean_pairwise_distance(const SampleSet& points) {
  const std::size_t n = points.size();
  if (n < 2) throw DomainError("pairwise distance needs at least two points");
  const std::vector<double> cols = to_columns(points);
  const auto& kern = kernels::active();
  std::vector<double> dists(n);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t rest = n - i - 1;
    // Columns start at point i + 1; the stride stays n.
    kern.sq_dists(points.point(i).data(), cols.data() + i + 1, static_cast<std::size_t>(points.dim), n, rest,
                  dists.data());
    for (std::size_t j = 0; j < rest; ++j) total += std::sqrt(dists[j]);
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

double pairwise_diversity(const Denoiser& model, int cond, int n_seeds, const Discretization& grid,
                          const SolverConfig& config, std::uint64_t seed) {
  if (n_seeds < 2) throw DomainError("diversity needs at least two seeds");
  const RngStreams streams(seed);
  SampleSet samples;
  samples.dim = model.data_dim();
  for (int s = 0; s < n_seeds; ++s) {
    Rng rng = streams.stream("diversity/" + std::to_string(s));
    std::vector<double> z(static_cast<std::size_t>(model.data_dim()));
    for (double& x : z) x = standard_normal(rng);
    samples.push(ddil::sample(model, std::move(z), cond, grid, config), kNullClass);
  }
  return mean_pairwise_distance(samples);
}

}  // namespace ddil
