#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "ddil/denoiser.hpp"

namespace ddil {

enum class ModelRole { teacher, student, ema };

std::string_view to_string(ModelRole role);

struct MlpSpec {
  int data_dim = 2;
  int time_embed_dim = 32;
  // 0 = unconditional. Otherwise the one-hot input has cond_classes + 1
  // entries; the last one is the null class.
  int cond_classes = 0;
  std::vector<int> hidden{128, 128, 128};
  int t_max = 1000;
  // Start the output layer at zero so the untrained model predicts v = 0.
  bool zero_init_output = false;

  int input_dim() const { return data_dim + time_embed_dim + (cond_classes > 0 ? cond_classes + 1 : 0); }
  bool operator==(const MlpSpec&) const = default;
};

// Sinusoidal embedding [sin(t f_i), cos(t f_i)] with frequencies f_i
// log-spaced from 1 down to 1 / t_max.
void time_embedding(double t, int t_max, std::span<double> out);

// Fully connected v-prediction network with SiLU hidden activations.
// Parameters are one flat vector; layer l stores its weight matrix
// (out x in, row-major) followed by its bias.
class Mlp final : public Denoiser {
 public:
  // Cached activations of one forward pass, consumed by backward().
  struct Trace {
    std::vector<std::vector<double>> inputs;  // input to each layer
    std::vector<std::vector<double>> pre;     // pre-activation of each hidden layer
  };

  Mlp(MlpSpec spec, ModelRole role, std::uint64_t init_seed);

  const MlpSpec& spec() const { return spec_; }
  ModelRole role() const { return role_; }
  void set_role(ModelRole role) { role_ = role; }

  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  int data_dim() const override { return spec_.data_dim; }
  bool has_null_class() const override { return spec_.cond_classes > 0; }
  void predict(std::span<const double> z, int t, int cond, std::span<double> v_out) const override;

  // Forward pass that records what backward() needs.
  void forward(std::span<const double> z, int t, int cond, Trace& trace, std::span<double> out) const;
  // Adds d(loss)/d(params) to grad given d(loss)/d(output).
  void backward(const Trace& trace, std::span<const double> d_out, std::span<double> grad) const;

  bool same_architecture(const Mlp& other) const { return spec_ == other.spec_; }

 private:
  struct Layer {
    std::size_t in, out, weight_offset, bias_offset;
  };

  void build_input(std::span<const double> z, int t, int cond, std::vector<double>& input) const;

  MlpSpec spec_;
  ModelRole role_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

// Inputs of a training batch; z holds batch_size * data_dim values.
struct BatchInputs {
  std::span<const double> z;
  std::span<const int> t;
  std::span<const int> cond;
  std::size_t size() const { return t.size(); }
};

// Per-sample loss: writes d(loss_i)/d(output) into d_out and returns loss_i.
using SampleLoss = std::function<double(std::size_t i, std::span<const double> out, std::span<double> d_out)>;

// Mean loss over the batch; grad is overwritten with the mean gradient.
// Samples are reduced in index order, so the result is deterministic.
// Throws NumericError naming the first sample whose output or loss is not finite.
double batch_gradient(const Mlp& model, const BatchInputs& batch, const SampleLoss& loss, std::span<double> grad);

struct TrainingBatch {
  std::vector<double> z;
  std::vector<int> t;
  std::vector<int> cond;
  std::vector<double> target;
  std::size_t size() const { return t.size(); }
  BatchInputs inputs() const { return {z, t, cond}; }
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

// Gradient of mean_i w_i * ||f(z_i, t_i, c_i) - target_i||^2.
// An empty weights span means unit weights.
LossAndGradient weighted_mse_gradient(const Mlp& model, const TrainingBatch& batch, std::span<const double> weights = {});

double l2_norm(std::span<const double> v);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t warmup_steps = 0;
  // Linear decay to zero at total_steps; 0 keeps lr constant after warmup.
  std::uint64_t total_steps = 0;
};

// AdamW with decoupled weight decay and a warmup-then-linear learning rate.
class AdamW {
 public:
  AdamW(AdamWConfig config, std::size_t n_params);

  const AdamWConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_; }
  double lr_at(std::uint64_t step) const;

  // Applies one update; throws ShapeError when sizes disagree.
  void step(std::span<double> params, std::span<const double> grads);

  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }
  // Restores state read from a checkpoint.
  void restore(std::uint64_t step, std::vector<double> m, std::vector<double> v);

 private:
  AdamWConfig config_;
  std::uint64_t step_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

// ema <- decay * ema + (1 - decay) * online, elementwise.
void ema_update(Mlp& ema, const Mlp& online, double decay);

}  // namespace ddil
