#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ddil/net.hpp"
#include "ddil/rng.hpp"

namespace ddil::testing {

inline TrainingBatch random_batch(Rng& rng, std::size_t n, int classes) {
  TrainingBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.z.push_back(standard_normal(rng));
    b.z.push_back(standard_normal(rng));
    b.t.push_back(1 + static_cast<int>(uniform_index(rng, 999)));
    b.cond.push_back(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(classes) + 1)) - 1);
    b.target.push_back(standard_normal(rng));
    b.target.push_back(standard_normal(rng));
  }
  return b;
}

struct ParamRange {
  std::string name;
  std::vector<std::size_t> indices;
};

// Parameter groups derived from the documented layout: per layer, the
// out x in weight matrix followed by the bias.
inline std::vector<ParamRange> layer_types(const MlpSpec& spec) {
  std::vector<std::size_t> widths{static_cast<std::size_t>(spec.input_dim())};
  for (int w : spec.hidden) widths.push_back(static_cast<std::size_t>(w));
  widths.push_back(static_cast<std::size_t>(spec.data_dim));
  ParamRange first{"input weights", {}}, hidden{"hidden weights", {}}, output{"output weights", {}}, bias{"biases", {}};
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    ParamRange& w = l == 0 ? first : (l + 2 == widths.size() ? output : hidden);
    const std::size_t n_w = widths[l] * widths[l + 1];
    for (std::size_t i = 0; i < n_w; ++i) w.indices.push_back(offset + i);
    for (std::size_t i = 0; i < widths[l + 1]; ++i) bias.indices.push_back(offset + n_w + i);
    offset += n_w + widths[l + 1];
  }
  return {first, hidden, output, bias};
}

struct GradCheck {
  std::size_t checked = 0;
  double worst = 0.0;
};

// Worst relative error between the analytic gradient and central finite
// differences over up to `count` random parameters of one range.
inline GradCheck finite_difference_check(Mlp& model, const TrainingBatch& batch, std::span<const double> weights,
                                         const ParamRange& range, Rng& rng, std::size_t count = 64,
                                         double h = 1e-5) {
  const LossAndGradient lg = weighted_mse_gradient(model, batch, weights);
  std::vector<std::size_t> picks = range.indices;
  const std::size_t n = std::min(count, picks.size());
  for (std::size_t i = 0; i < n; ++i) std::swap(picks[i], picks[i + uniform_index(rng, picks.size() - i)]);
  picks.resize(n);
  GradCheck out{n, 0.0};
  for (const std::size_t p : picks) {
    const double saved = model.params()[p];
    model.params()[p] = saved + h;
    const double up = weighted_mse_gradient(model, batch, weights).loss;
    model.params()[p] = saved - h;
    const double down = weighted_mse_gradient(model, batch, weights).loss;
    model.params()[p] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = lg.grad[p];
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
    out.worst = std::max(out.worst, std::abs(numeric - analytic) / scale);
  }
  return out;
}

}  // namespace ddil::testing
