#include "ddil/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>

#include "ddil/error.hpp"

namespace ddil {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> gaussian(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = standard_normal(rng);
  return v;
}

// Loss sum_d w (clamp(alpha z_d - sigma v_d) - target_d)^2 and its gradient
// with respect to v. Clamped coordinates contribute no gradient.
double x_space_loss(std::span<const double> v, std::span<const double> z, double alpha, double sigma,
                    std::span<const double> target, double weight, const SolverConfig& config,
                    std::span<double> d_v) {
  double sq = 0.0;
  for (std::size_t d = 0; d < v.size(); ++d) {
    double x = alpha * z[d] - sigma * v[d];
    bool active = true;
    if (config.thresholding) {
      const double lo = config.support.lo[d];
      const double hi = config.support.hi[d];
      if (x < lo || x > hi) {
        active = false;
        x = std::clamp(x, lo, hi);
      }
    }
    const double r = x - target[d];
    sq += r * r;
    if (!d_v.empty()) d_v[d] = active ? -2.0 * weight * sigma * r : 0.0;
  }
  return weight * sq;
}

SolverConfig student_solver(const DistillOptions& options) {
  return {options.schedule, 1.0, options.student_thresholding, options.support};
}

SolverConfig teacher_solver(const DistillOptions& options, double guidance) {
  return {options.schedule, guidance, options.teacher_thresholding, options.support};
}

}  // namespace

std::string_view to_string(DistillMethod method) {
  switch (method) {
    case DistillMethod::pd: return "pd";
    case DistillMethod::lcm: return "lcm";
  }
  return "unknown";
}

void DistillStage::validate() const {
  if (teacher_steps <= 0 || teacher_steps % 2 != 0) {
    throw ConfigError("distillation stage needs an even teacher step count, got " + std::to_string(teacher_steps));
  }
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (teacher_guidance < 1.0) throw ConfigError("teacher guidance must be >= 1");
}

double truncated_snr_weight(double snr) { return std::max(1.0, snr); }

std::vector<double> pd_target(const Denoiser& teacher, const SolverConfig& teacher_config,
                              const Discretization& teacher_grid, const LatentState& state) {
  const int t = state.t;
  const int t1 = teacher_grid.next(t);
  if (t1 == 0) throw GridError("timestep " + std::to_string(t) + " has fewer than two teacher steps left");
  const int t2 = teacher_grid.next(t1);
  const LatentState mid = ddim_step(teacher, state, t1, teacher_config);
  const LatentState end = ddim_step(teacher, mid, t2, teacher_config);

  const auto [alpha_t, sigma_t] = teacher_config.schedule.alpha_sigma(t);
  const auto [alpha_2, sigma_2] = teacher_config.schedule.alpha_sigma(t2);
  const double ratio = sigma_2 / std::max(sigma_t, kSigmaFloor);
  const double denom = alpha_2 - ratio * alpha_t;
  if (std::abs(denom) < 1e-8) throw NumericError("degenerate distillation step at t = " + std::to_string(t));
  std::vector<double> x(state.z.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (end.z[i] - ratio * state.z[i]) / denom;
  return x;
}

LossReport pd_loss(const Denoiser& student, const SolverConfig& student_config, const LatentState& state,
                   std::span<const double> x_target) {
  std::vector<double> v(state.z.size());
  student.predict(state.z, state.t, state.cond, v);
  const auto [alpha, sigma] = student_config.schedule.alpha_sigma(state.t);
  LossReport report;
  report.weight = truncated_snr_weight(student_config.schedule.snr(state.t));
  report.mode = state.provenance();
  report.loss = x_space_loss(v, state.z, alpha, sigma, x_target, report.weight, student_config, {});
  return report;
}

std::vector<double> consistency_fn(const Denoiser& model, const SolverConfig& config, std::span<const double> z, int t,
                                   int cond) {
  if (t == 0) return std::vector<double>(z.begin(), z.end());
  std::vector<double> v(z.size());
  model.predict(z, t, cond, v);
  Prediction p = to_prediction(v, z, t, config.schedule);
  if (config.thresholding) threshold(p.x_hat, config.support);
  return p.x_hat;
}

ConsistencyTarget consistency_target(const Denoiser& ema, const Denoiser& teacher, const SolverConfig& teacher_config,
                                     const SolverConfig& student_config, const LatentState& state,
                                     const Discretization& grid) {
  const int t_prev = grid.previous_below(state.t);
  LatentState prev = ddim_step(teacher, state, t_prev, teacher_config);
  std::vector<double> target = consistency_fn(ema, student_config, prev.z, t_prev, state.cond);
  return {t_prev, std::move(prev.z), std::move(target)};
}

LossReport consistency_loss(const Denoiser& student, const Denoiser& ema, const Denoiser& teacher,
                            const SolverConfig& teacher_config, const SolverConfig& student_config,
                            const LatentState& state, const Discretization& grid) {
  const ConsistencyTarget target = consistency_target(ema, teacher, teacher_config, student_config, state, grid);
  const std::vector<double> online = consistency_fn(student, student_config, state.z, state.t, state.cond);
  LossReport report;
  report.mode = state.provenance();
  for (std::size_t i = 0; i < online.size(); ++i) {
    const double r = online[i] - target.target[i];
    report.loss += r * r;
  }
  return report;
}

LatentState lcm_backward_latent(const Denoiser& student, const SolverConfig& student_config,
                                std::span<const int> step_choices, int t_max, int cond, Rng& rng, int* steps_used) {
  if (step_choices.empty()) throw ConfigError("no inference step choices for consistency rollouts");
  const int n = step_choices[uniform_index(rng, step_choices.size())];
  const Discretization grid = make_grid(n, t_max, GridPolicy::rounded);
  const int stop = grid.timesteps[uniform_index(rng, grid.timesteps.size())];
  if (steps_used) *steps_used = n;
  return unroll_backward(student, gaussian(rng, student.data_dim()), cond, grid, stop, student_config,
                         Provenance::student_backward);
}

DistillRngs DistillRngs::from(const RngStreams& streams, std::string_view prefix) {
  const std::string p(prefix);
  return {streams.stream(p + "/mode"), streams.stream(p + "/latent"), streams.stream(p + "/collect"),
          streams.stream(p + "/coin")};
}

namespace {

struct PreparedSample {
  LatentState state;
  std::vector<double> target;
  double weight;
};

// Fills the replay buffer with mixed rollouts for one refresh.
void collect_rollouts(ReplayBuffer& buffer, const RolloutPair& models, const SamplingPriors& priors,
                      const LabeledPoints& dataset, std::size_t count, DistillRngs& rngs) {
  const double p_teacher = priors.teacher_backward / priors.backward_mass();
  const auto config = MixedRolloutConfig::with_probability(p_teacher);
  const int first = models.student_grid.timesteps.front();
  for (std::size_t r = 0; r < count; ++r) {
    const int cond = dataset.label(uniform_index(rngs.collect, dataset.size()));
    Trajectory traj = mixed_rollout(models, config, gaussian(rngs.collect, dataset.dim), cond, rngs.coin);
    std::vector<LatentState> keep;
    for (LatentState& s : traj.states) {
      if (s.t != first && s.t != 0) keep.push_back(std::move(s));
    }
    buffer.push_trajectory(keep);
  }
}

}  // namespace

DistillResult ddil_train(const DistillStage& stage, DistillMethod method, const DistillOptions& options,
                         const LabeledPoints& dataset, const Mlp& teacher, Mlp& student, ReplayBuffer* buffer,
                         DistillRngs& rngs) {
  const auto start = Clock::now();
  if (dataset.empty()) throw DataError("distillation dataset is empty");
  if (!teacher.same_architecture(student)) throw ShapeError("teacher and student architectures differ");
  const int t_max = options.schedule.t_max();

  const SolverConfig teacher_config = teacher_solver(options, stage.teacher_guidance);
  const SolverConfig student_config = student_solver(options);

  Discretization teacher_grid, student_grid;
  if (method == DistillMethod::pd) {
    stage.validate();
    teacher_grid = make_grid(stage.teacher_steps, t_max, GridPolicy::exact);
    student_grid = make_grid(stage.student_steps(), t_max, GridPolicy::exact);
    check_alignment(teacher_grid, student_grid);
  } else {
    if (stage.batch_size == 0) throw ConfigError("batch size must be positive");
    teacher_grid = make_grid(options.lcm_grid_steps, t_max, GridPolicy::exact);
    student_grid = teacher_grid;
  }

  AdamWConfig opt_config = stage.optimizer;
  if (opt_config.total_steps == 0) opt_config.total_steps = stage.iterations;
  AdamW optimizer(opt_config, student.param_count());

  std::unique_ptr<Mlp> ema;
  if (method == DistillMethod::lcm) {
    ema = std::make_unique<Mlp>(student);
    ema->set_role(ModelRole::ema);
  }

  const bool use_buffer = method == DistillMethod::pd && buffer != nullptr && stage.priors.uses_backward();
  const std::size_t min_fill = options.min_fill == 0 ? stage.batch_size : options.min_fill;
  const LatentSources sources{options.schedule, dataset,       teacher,       teacher_config, teacher_grid,
                              student,          student_config, student_grid, use_buffer ? buffer : nullptr,
                              min_fill};
  const RolloutPair rollout_models{teacher, teacher_config, teacher_grid, student, student_config, student_grid};

  DistillResult result;
  const std::size_t dim = static_cast<std::size_t>(dataset.dim);
  std::vector<double> grad(student.param_count());
  std::vector<double> last_good(student.params().begin(), student.params().end());
  const auto& grid_points = student_grid.timesteps;

  for (std::uint64_t step = 0; step < stage.iterations; ++step) {
    const SamplingPriors& priors = stage.priors.at(step);
    if (use_buffer && priors.backward_mass() > 0.0 && step % options.refresh_period == 0) {
      const auto t0 = Clock::now();
      collect_rollouts(*buffer, rollout_models, priors, dataset, options.rollouts_per_refresh, rngs);
      result.collected_rollouts += options.rollouts_per_refresh;
      result.collection_seconds += seconds_since(t0);
    }

    std::vector<PreparedSample> batch;
    batch.reserve(stage.batch_size);
    for (std::size_t i = 0; i < stage.batch_size; ++i) {
      Provenance mode = sample_mode(priors, uniform01(rngs.mode));
      // A backward latent at the first grid point is just initial noise.
      if (mode != Provenance::forward && grid_points.size() < 2) mode = Provenance::forward;

      std::optional<LatentState> latent;
      if (method == DistillMethod::lcm && mode == Provenance::student_backward) {
        const int cond = dataset.label(uniform_index(rngs.latent, dataset.size()));
        const auto t0 = Clock::now();
        latent = lcm_backward_latent(student, student_config, options.lcm_inference_steps, t_max, cond, rngs.latent);
        result.collection_seconds += seconds_since(t0);
        ++result.fresh_unrolls;
      } else {
        const std::size_t lo = mode == Provenance::forward ? 0 : 1;
        const int t = grid_points[lo + uniform_index(rngs.latent, grid_points.size() - lo)];
        const bool buffered = sources.buffer && sources.buffer->size() >= min_fill;
        const auto t0 = Clock::now();
        latent = next_training_latent(mode, sources, t, rngs.latent);
        if (mode != Provenance::forward && !buffered) {
          result.collection_seconds += seconds_since(t0);
          ++result.fresh_unrolls;
        }
      }

      PreparedSample sample{*std::move(latent), {}, 1.0};
      if (method == DistillMethod::pd) {
        sample.target = pd_target(teacher, teacher_config, teacher_grid, sample.state);
        sample.weight = truncated_snr_weight(options.schedule.snr(sample.state.t));
      } else {
        sample.target = consistency_target(*ema, teacher, teacher_config, student_config, sample.state, teacher_grid).target;
      }
      batch.push_back(std::move(sample));
    }

    std::vector<double> z;
    std::vector<int> ts, conds;
    for (const PreparedSample& s : batch) {
      z.insert(z.end(), s.state.z.begin(), s.state.z.end());
      ts.push_back(s.state.t);
      conds.push_back(s.state.cond);
    }
    std::vector<double> sample_losses(batch.size());
    double loss = 0.0;
    try {
      loss = batch_gradient(
          student, BatchInputs{z, ts, conds},
          [&](std::size_t i, std::span<const double> out, std::span<double> d_out) {
            const PreparedSample& s = batch[i];
            const auto [alpha, sigma] = options.schedule.alpha_sigma(s.state.t);
            const double li = x_space_loss(out, std::span<const double>(z).subspan(i * dim, dim), alpha, sigma,
                                           s.target, s.weight, student_config, d_out);
            sample_losses[i] = li;
            return li;
          },
          grad);
    } catch (const NumericError& e) {
      std::copy(last_good.begin(), last_good.end(), student.params().begin());
      throw DivergenceError("distillation diverged at step " + std::to_string(step) + ": " + e.what(), step);
    }
    const double grad_norm = l2_norm(grad);
    if (!std::isfinite(loss) || !std::isfinite(grad_norm)) {
      std::copy(last_good.begin(), last_good.end(), student.params().begin());
      throw DivergenceError("distillation diverged at step " + std::to_string(step), step);
    }
    std::copy(student.params().begin(), student.params().end(), last_good.begin());
    optimizer.step(student.params(), grad);
    if (ema) ema_update(*ema, student, options.ema_decay);

    for (const Provenance mode : {Provenance::forward, Provenance::teacher_backward, Provenance::student_backward,
                                  Provenance::mixed}) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].state.provenance() == mode) {
          sum += sample_losses[i];
          ++count;
        }
      }
      if (count > 0) result.log.push_back({step, mode, sum / static_cast<double>(count), grad_norm, count});
    }
  }
  result.total_seconds = seconds_since(start);
  return result;
}

ProgressiveResult progressive_loop(std::span<const DistillStage> stages, const DistillOptions& options,
                                   const LabeledPoints& dataset, const Mlp& initial_teacher,
                                   std::size_t buffer_capacity, const RngStreams& streams,
                                   const ProgressiveHooks& hooks) {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].validate();
    if (i > 0 && stages[i].teacher_steps * 2 != stages[i - 1].teacher_steps) {
      throw ConfigError("progressive stages must halve the step count (" + std::to_string(stages[i - 1].teacher_steps) +
                        " -> " + std::to_string(stages[i].teacher_steps) + ")");
    }
  }
  Mlp teacher = initial_teacher;
  teacher.set_role(ModelRole::teacher);
  ProgressiveResult result{teacher, {}, teacher};
  for (std::size_t i = 0; i < stages.size(); ++i) {
    Mlp student = teacher;
    student.set_role(ModelRole::student);
    std::unique_ptr<ReplayBuffer> buffer;
    if (buffer_capacity > 0) buffer = std::make_unique<ReplayBuffer>(buffer_capacity);
    DistillRngs rngs = DistillRngs::from(streams, "stage" + std::to_string(i));
    if (hooks.before_stage) hooks.before_stage(i, buffer.get());
    try {
      result.stages.push_back(
          ddil_train(stages[i], DistillMethod::pd, options, dataset, teacher, student, buffer.get(), rngs));
    } catch (const DivergenceError&) {
      if (hooks.on_divergence) hooks.on_divergence(i, student);
      throw;
    }
    if (hooks.after_stage) hooks.after_stage(i, buffer.get(), result.stages.back());
    result.final_teacher = teacher;
    teacher = student;
    teacher.set_role(ModelRole::teacher);
  }
  result.student = teacher;
  result.student.set_role(ModelRole::student);
  return result;
}

}  // namespace ddil
