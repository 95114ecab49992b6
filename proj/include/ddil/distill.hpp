#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "ddil/buffer.hpp"
#include "ddil/diffusion.hpp"
#include "ddil/error.hpp"
#include "ddil/net.hpp"
#include "ddil/points.hpp"
#include "ddil/rng.hpp"
#include "ddil/solver.hpp"

namespace ddil {

enum class DistillMethod { pd, lcm };

std::string_view to_string(DistillMethod method);

// One halving stage of progressive distillation (for consistency
// distillation only the iteration count, optimizer and priors apply).
struct DistillStage {
  int teacher_steps = 8;
  std::uint64_t iterations = 3000;
  AdamWConfig optimizer;
  PriorSchedule priors = PriorSchedule::constant(priors::kForwardOnly, 1);
  std::size_t batch_size = 128;
  // Guidance applied when querying the teacher.
  double teacher_guidance = 2.0;

  int student_steps() const { return teacher_steps / 2; }
  // Throws ConfigError for an odd or non-positive teacher step count.
  void validate() const;
};

struct DistillOptions {
  NoiseSchedule schedule;
  SupportBox support = SupportBox::symmetric(2);
  bool teacher_thresholding = true;
  bool student_thresholding = true;
  // Replay buffer refresh: every refresh_period steps, collect this many
  // mixed rollouts. min_fill 0 means one batch.
  std::size_t refresh_period = 50;
  std::size_t rollouts_per_refresh = 32;
  std::size_t min_fill = 0;
  // Consistency distillation.
  int lcm_grid_steps = 20;
  double ema_decay = 0.95;
  std::vector<int> lcm_inference_steps{3, 4, 5};
};

struct LossReport {
  double loss = 0.0;
  double weight = 1.0;
  Provenance mode = Provenance::forward;
  double grad_norm = 0.0;
};

// max(1, snr): the truncated SNR weighting of the distillation loss.
double truncated_snr_weight(double snr);

// Two teacher DDIM steps t -> t1 -> t2 along the teacher grid, then the clean
// estimate that makes one student step from (z_t, t) land on z_t2:
//   x = (z_t2 - (sigma_t2 / sigma_t) z_t) / (alpha_t2 - (sigma_t2 / sigma_t) alpha_t).
// Throws GridError when t has fewer than two steps left and NumericError
// when the denominator is below 1e-8.
std::vector<double> pd_target(const Denoiser& teacher, const SolverConfig& teacher_config,
                              const Discretization& teacher_grid, const LatentState& state);

// max(1, alpha_t^2 / sigma_t^2) * ||x_s - x_target||^2 with
// x_s = alpha_t z_t - sigma_t v_student (thresholded when enabled).
LossReport pd_loss(const Denoiser& student, const SolverConfig& student_config, const LatentState& state,
                   std::span<const double> x_target);

// Consistency function: thresholded x_hat from the v-prediction, and z itself at t = 0.
std::vector<double> consistency_fn(const Denoiser& model, const SolverConfig& config, std::span<const double> z, int t,
                                   int cond);

struct ConsistencyTarget {
  int t_prev;
  std::vector<double> z_prev;
  std::vector<double> target;
};

// Teacher step z_t -> z_t' to the next grid point below t, and the EMA
// model's consistency output there (z_t' itself when t' = 0).
ConsistencyTarget consistency_target(const Denoiser& ema, const Denoiser& teacher, const SolverConfig& teacher_config,
                                     const SolverConfig& student_config, const LatentState& state,
                                     const Discretization& grid);

// ||f_student(z_t, t) - f_ema(z_t', t')||^2.
LossReport consistency_loss(const Denoiser& student, const Denoiser& ema, const Denoiser& teacher,
                            const SolverConfig& teacher_config, const SolverConfig& student_config,
                            const LatentState& state, const Discretization& grid);

// Unrolls the student on a grid with a uniformly chosen step count and stops
// at a uniformly chosen point of that grid. Tagged student_backward.
LatentState lcm_backward_latent(const Denoiser& student, const SolverConfig& student_config,
                                std::span<const int> step_choices, int t_max, int cond, Rng& rng,
                                int* steps_used = nullptr);

struct StepLog {
  std::uint64_t step;
  Provenance mode;
  double loss;       // mean loss over the samples of this mode
  double grad_norm;  // norm of the whole-batch gradient
  std::size_t count;
};

struct DistillResult {
  std::vector<StepLog> log;
  std::uint64_t fresh_unrolls = 0;
  std::uint64_t collected_rollouts = 0;
  double collection_seconds = 0.0;
  double total_seconds = 0.0;
};

// Training divergence; the student holds the last finite parameters.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::uint64_t step) : NumericError(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

struct DistillRngs {
  Rng mode;     // sampling-mode draws
  Rng latent;   // data, noise and timesteps of training latents
  Rng collect;  // initial noise and conditions of buffer rollouts
  Rng coin;     // teacher/student choices inside rollouts

  static DistillRngs from(const RngStreams& streams, std::string_view prefix);
};

// DDIL training of one stage. Each step draws a sampling mode per batch
// element from the priors, builds the latent, evaluates the method loss and
// applies one AdamW step. With PD and backward priors the replay buffer is
// refreshed every refresh_period steps from mixed rollouts whose teacher
// probability is b_t / (b_t + b_s). The student starts from its current weights.
DistillResult ddil_train(const DistillStage& stage, DistillMethod method, const DistillOptions& options,
                         const LabeledPoints& dataset, const Mlp& teacher, Mlp& student, ReplayBuffer* buffer,
                         DistillRngs& rngs);

struct ProgressiveResult {
  Mlp student;
  std::vector<DistillResult> stages;
  // The model that taught the last stage.
  Mlp final_teacher;
};

// Optional callbacks around each stage. The buffer pointer is null when
// the replay buffer is disabled.
struct ProgressiveHooks {
  std::function<void(std::size_t stage, ReplayBuffer* buffer)> before_stage;
  std::function<void(std::size_t stage, ReplayBuffer* buffer, const DistillResult& result)> after_stage;
  // Called with the last finite student before a DivergenceError propagates.
  std::function<void(std::size_t stage, const Mlp& student)> on_divergence;
};

// Repeated halving: each stage initializes the student from the teacher,
// trains it, then makes it the next teacher. Stages must halve the step count.
// buffer_capacity 0 disables the replay buffer.
ProgressiveResult progressive_loop(std::span<const DistillStage> stages, const DistillOptions& options,
                                   const LabeledPoints& dataset, const Mlp& initial_teacher,
                                   std::size_t buffer_capacity, const RngStreams& streams,
                                   const ProgressiveHooks& hooks = {});

}  // namespace ddil
