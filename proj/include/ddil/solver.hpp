#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ddil/denoiser.hpp"
#include "ddil/diffusion.hpp"
#include "ddil/rng.hpp"
#include "ddil/schedule.hpp"

namespace ddil {

struct SolverConfig {
  NoiseSchedule schedule;
  // Classifier-free guidance scale; 1 evaluates the conditional branch only.
  double guidance = 1.0;
  // Clamp x_hat into the support after every model evaluation.
  bool thresholding = true;
  SupportBox support = SupportBox::symmetric(2);
};

// v_null + omega (v_cond - v_null). omega = 1 returns v_cond without
// evaluating the null branch. Throws ConfigError for omega < 1, for
// guidance on a model without a null class, or for cond = null with omega != 1.
std::vector<double> cfg_predict(const Denoiser& model, std::span<const double> z, int t, int cond, double omega);

// Receives every x_hat the solver uses, after thresholding.
using XHatObserver = std::function<void(int t, std::span<const double> x_hat)>;

// Guided, optionally thresholded prediction at (z, t). Clamped coordinates
// of x_hat get eps_hat = (z - alpha x_hat) / sigma so the step stays on the
// reconstruction identity; v_hat is the raw guided prediction.
Prediction solver_prediction(const Denoiser& model, std::span<const double> z, int t, int cond,
                             const SolverConfig& config);

// One deterministic DDIM step z_t -> z_{t_next} = alpha' x_hat + sigma' eps_hat.
// t_next == t returns the state unchanged; t_next > t throws OrderingError.
LatentState ddim_step(const Denoiser& model, const LatentState& state, int t_next, const SolverConfig& config,
                      const XHatObserver* observer = nullptr);

// Runs ddim_step along the grid from its first point down to stop_at (a grid
// point or 0) and tags the result with the given provenance.
LatentState unroll_backward(const Denoiser& model, std::vector<double> z_init, int cond, const Discretization& grid,
                            int stop_at, const SolverConfig& config, Provenance provenance,
                            const XHatObserver* observer = nullptr);

// Full sample at t = 0.
std::vector<double> sample(const Denoiser& model, std::vector<double> z_init, int cond, const Discretization& grid,
                           const SolverConfig& config);

enum class SwitchOrder { teacher_then_student, student_then_teacher };

// Exactly one of p_teacher / switch_t governs a rollout.
struct MixedRolloutConfig {
  // Probability of letting the teacher take a student-sized block.
  std::optional<double> p_teacher;
  // Deterministic switch: blocks starting above switch_t use the first model
  // of `order`, the remaining blocks use the second.
  std::optional<int> switch_t;
  SwitchOrder order = SwitchOrder::teacher_then_student;

  static MixedRolloutConfig with_probability(double p) { return {p, std::nullopt, SwitchOrder::teacher_then_student}; }
  static MixedRolloutConfig with_switch(int t, SwitchOrder order) { return {std::nullopt, t, order}; }
  void validate() const;
};

enum class BlockModel { teacher, student };

struct Trajectory {
  // Initial latent followed by the latent after every block; all tagged mixed.
  std::vector<LatentState> states;
  // Model used for each block.
  std::vector<BlockModel> choices;
};

struct RolloutPair {
  const Denoiser& teacher;
  const SolverConfig& teacher_config;
  const Discretization& teacher_grid;
  const Denoiser& student;
  const SolverConfig& student_config;
  const Discretization& student_grid;
};

// Throws ConfigError unless the teacher grid has exactly two points per
// student point and every student point is an even-indexed teacher point.
void check_alignment(const Discretization& teacher_grid, const Discretization& student_grid);

// One generation that interleaves the models block by block: a block is one
// student step or two teacher steps over the same interval. With p_teacher
// set, one uniform draw is consumed per block whatever the probability.
Trajectory mixed_rollout(const RolloutPair& models, const MixedRolloutConfig& config, std::vector<double> z_init,
                         int cond, Rng& coin_rng, const XHatObserver* observer = nullptr);

// Newline-delimited JSON records {"t", "provenance", "cond", "z"}.
void write_trajectory_records(std::ostream& out, std::span<const LatentState> states);
std::vector<LatentState> read_trajectory_records(std::istream& in);

}  // namespace ddil
