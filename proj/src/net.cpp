#include "ddil/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddil/error.hpp"
#include "ddil/kernels.hpp"
#include "ddil/rng.hpp"

namespace ddil {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double silu(double x) { return x * sigmoid(x); }

double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace

std::string_view to_string(ModelRole role) {
  switch (role) {
    case ModelRole::teacher: return "teacher";
    case ModelRole::student: return "student";
    case ModelRole::ema: return "ema";
  }
  return "unknown";
}

void time_embedding(double t, int t_max, std::span<double> out) {
  const std::size_t half = out.size() / 2;
  if (half == 0) return;
  const double log_span = std::log(static_cast<double>(t_max));
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = half == 1 ? 1.0 : std::exp(-log_span * static_cast<double>(i) / static_cast<double>(half - 1));
    out[i] = std::sin(t * freq);
    out[half + i] = std::cos(t * freq);
  }
}

Mlp::Mlp(MlpSpec spec, ModelRole role, std::uint64_t init_seed) : spec_(std::move(spec)), role_(role) {
  if (spec_.data_dim <= 0) throw ConfigError("data_dim must be positive");
  if (spec_.time_embed_dim < 0 || spec_.time_embed_dim % 2 != 0) {
    throw ConfigError("time_embed_dim must be a non-negative even number");
  }
  if (spec_.cond_classes < 0) throw ConfigError("cond_classes must be non-negative");
  if (spec_.t_max <= 1) throw ConfigError("t_max must be > 1");

  std::vector<std::size_t> widths{static_cast<std::size_t>(spec_.input_dim())};
  for (const int w : spec_.hidden) {
    if (w <= 0) throw ConfigError("hidden widths must be positive");
    widths.push_back(static_cast<std::size_t>(w));
  }
  widths.push_back(static_cast<std::size_t>(spec_.data_dim));

  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer{widths[l], widths[l + 1], offset, offset + widths[l] * widths[l + 1]};
    offset = layer.bias_offset + layer.out;
    layers_.push_back(layer);
  }
  params_.assign(offset, 0.0);

  Rng rng(init_seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (spec_.zero_init_output && l + 1 == layers_.size()) break;
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    std::uniform_real_distribution<double> init(-bound, bound);
    for (std::size_t i = layer.weight_offset; i < layer.bias_offset + layer.out; ++i) params_[i] = init(rng);
  }
}

void Mlp::build_input(std::span<const double> z, int t, int cond, std::vector<double>& input) const {
  if (z.size() != static_cast<std::size_t>(spec_.data_dim)) {
    throw ShapeError("latent has " + std::to_string(z.size()) + " entries, model expects " + std::to_string(spec_.data_dim));
  }
  if (t < 0 || t > spec_.t_max) throw DomainError("timestep " + std::to_string(t) + " outside model range");
  input.assign(static_cast<std::size_t>(spec_.input_dim()), 0.0);
  std::copy(z.begin(), z.end(), input.begin());
  time_embedding(static_cast<double>(t), spec_.t_max,
                 std::span<double>(input).subspan(static_cast<std::size_t>(spec_.data_dim),
                                                  static_cast<std::size_t>(spec_.time_embed_dim)));
  if (spec_.cond_classes > 0) {
    int slot = cond;
    if (cond == kNullClass) {
      slot = spec_.cond_classes;
    } else if (cond < 0 || cond >= spec_.cond_classes) {
      throw ShapeError("condition " + std::to_string(cond) + " outside [0, " + std::to_string(spec_.cond_classes) + ")");
    }
    input[static_cast<std::size_t>(spec_.data_dim + spec_.time_embed_dim + slot)] = 1.0;
  }
}

void Mlp::forward(std::span<const double> z, int t, int cond, Trace& trace, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(spec_.data_dim)) throw ShapeError("output buffer has wrong size");
  trace.inputs.resize(layers_.size());
  trace.pre.resize(layers_.size() - 1);
  build_input(z, t, cond, trace.inputs[0]);

  const auto& k = kernels::active();
  std::vector<double> y;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const double* w = params_.data() + layer.weight_offset;
    const double* b = params_.data() + layer.bias_offset;
    const std::vector<double>& a = trace.inputs[l];
    y.resize(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) y[o] = k.dot(w + o * layer.in, a.data(), layer.in) + b[o];
    if (l + 1 == layers_.size()) {
      std::copy(y.begin(), y.end(), out.begin());
    } else {
      trace.pre[l] = y;
      std::vector<double>& next = trace.inputs[l + 1];
      next.resize(layer.out);
      for (std::size_t o = 0; o < layer.out; ++o) next[o] = silu(y[o]);
    }
  }
}

void Mlp::predict(std::span<const double> z, int t, int cond, std::span<double> v_out) const {
  Trace trace;
  forward(z, t, cond, trace, v_out);
}

void Mlp::backward(const Trace& trace, std::span<const double> d_out, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ShapeError("gradient buffer has wrong size");
  if (d_out.size() != static_cast<std::size_t>(spec_.data_dim)) throw ShapeError("output gradient has wrong size");
  const auto& k = kernels::active();
  std::vector<double> delta(d_out.begin(), d_out.end());
  std::vector<double> d_input;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const std::vector<double>& a = trace.inputs[l];
    double* gw = grad.data() + layer.weight_offset;
    double* gb = grad.data() + layer.bias_offset;
    for (std::size_t o = 0; o < layer.out; ++o) {
      k.axpy(delta[o], a.data(), gw + o * layer.in, layer.in);
      gb[o] += delta[o];
    }
    if (l == 0) break;
    const double* w = params_.data() + layer.weight_offset;
    d_input.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) k.axpy(delta[o], w + o * layer.in, d_input.data(), layer.in);
    const std::vector<double>& pre = trace.pre[l - 1];
    delta.resize(layer.in);
    for (std::size_t i = 0; i < layer.in; ++i) delta[i] = d_input[i] * silu_grad(pre[i]);
  }
}

double batch_gradient(const Mlp& model, const BatchInputs& batch, const SampleLoss& loss, std::span<double> grad) {
  const std::size_t n = batch.size();
  if (n == 0) throw ShapeError("empty batch");
  const std::size_t dim = static_cast<std::size_t>(model.data_dim());
  if (batch.z.size() != n * dim || batch.cond.size() != n) throw ShapeError("batch arrays disagree in length");
  if (grad.size() != model.param_count()) throw ShapeError("gradient buffer has wrong size");

  std::fill(grad.begin(), grad.end(), 0.0);
  Mlp::Trace trace;
  std::vector<double> out(dim), d_out(dim);
  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    model.forward(batch.z.subspan(i * dim, dim), batch.t[i], batch.cond[i], trace, out);
    for (const double v : out) {
      if (!std::isfinite(v)) throw NumericError("non-finite model output at batch index " + std::to_string(i));
    }
    std::fill(d_out.begin(), d_out.end(), 0.0);
    const double li = loss(i, out, d_out);
    if (!std::isfinite(li)) throw NumericError("non-finite loss at batch index " + std::to_string(i));
    total += li;
    for (double& d : d_out) d *= scale;
    model.backward(trace, d_out, grad);
  }
  return total * scale;
}

LossAndGradient weighted_mse_gradient(const Mlp& model, const TrainingBatch& batch, std::span<const double> weights) {
  const std::size_t dim = static_cast<std::size_t>(model.data_dim());
  if (batch.target.size() != batch.size() * dim) throw ShapeError("target array has wrong length");
  if (!weights.empty() && weights.size() != batch.size()) throw ShapeError("weights array has wrong length");
  LossAndGradient result;
  result.grad.assign(model.param_count(), 0.0);
  result.loss = batch_gradient(
      model, batch.inputs(),
      [&](std::size_t i, std::span<const double> out, std::span<double> d_out) {
        const double w = weights.empty() ? 1.0 : weights[i];
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double r = out[d] - batch.target[i * dim + d];
          sq += r * r;
          d_out[d] = 2.0 * w * r;
        }
        return w * sq;
      },
      result.grad);
  return result;
}

double l2_norm(std::span<const double> v) {
  double sq = 0.0;
  for (const double x : v) sq += x * x;
  return std::sqrt(sq);
}

AdamW::AdamW(AdamWConfig config, std::size_t n_params) : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {
  if (config_.lr < 0.0) throw ConfigError("learning rate must be non-negative");
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 || config_.beta2 >= 1.0) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
}

double AdamW::lr_at(std::uint64_t step) const {
  if (step < config_.warmup_steps) {
    return config_.lr * static_cast<double>(step) / static_cast<double>(config_.warmup_steps);
  }
  if (config_.total_steps == 0 || config_.total_steps <= config_.warmup_steps) return config_.lr;
  if (step >= config_.total_steps) return 0.0;
  const double remaining = static_cast<double>(config_.total_steps - step);
  return config_.lr * remaining / static_cast<double>(config_.total_steps - config_.warmup_steps);
}

void AdamW::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("AdamW parameter/gradient size mismatch");
  const double lr = lr_at(step_);
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * params[i]);
  }
}

void AdamW::restore(std::uint64_t step, std::vector<double> m, std::vector<double> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ShapeError("optimizer moments have wrong size");
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

void ema_update(Mlp& ema, const Mlp& online, double decay) {
  if (!ema.same_architecture(online)) throw ShapeError("EMA and online model architectures differ");
  if (!(decay >= 0.0 && decay < 1.0)) throw DomainError("EMA decay must lie in [0, 1)");
  auto target = ema.params();
  const auto source = online.params();
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = decay * target[i] + (1.0 - decay) * source[i];
}

}  // namespace ddil
