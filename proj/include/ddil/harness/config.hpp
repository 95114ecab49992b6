#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddil/buffer.hpp"
#include "ddil/distill.hpp"
#include "ddil/harness/dataset.hpp"
#include "ddil/net.hpp"
#include "ddil/schedule.hpp"

namespace ddil::harness {

struct TeacherConfig {
  std::uint64_t steps = 20000;
  std::size_t batch = 128;
  AdamWConfig optimizer{1e-3, 0.9, 0.999, 1e-8, 0.0, 500, 0};
  // Probability of replacing the label by the null class during training.
  double p_uncond = 0.1;
  int sample_steps = 32;
  double guidance = 2.0;
  bool thresholding = true;
  std::uint64_t log_every = 100;
};

// Distillation method names as written in configs.
enum class MethodVariant { pd, pd_ddil, lcm, lcm_ddil };

std::string_view to_string(MethodVariant variant);
MethodVariant parse_method(std::string_view name);
DistillMethod base_method(MethodVariant variant);

struct DistillConfig {
  MethodVariant method = MethodVariant::pd_ddil;
  int teacher_steps = 8;
  int final_steps = 2;
  // One entry per progressive stage (teacher_steps -> ... -> final_steps).
  std::vector<std::uint64_t> iterations{3000, 4000};
  std::uint64_t lcm_iterations = 4000;
  double lr = 2e-4;
  std::uint64_t warmup = 100;
  double weight_decay = 0.0;
  std::size_t batch = 128;
  // Explicit priors; empty selects the method preset.
  std::vector<SamplingPriors> priors;
  // Fraction of a stage spent on the first of two prior phases.
  double priors_split = 0.6;
  std::size_t buffer_capacity = 4096;
  std::size_t refresh_period = 50;
  std::size_t rollouts_per_refresh = 32;
  std::size_t min_fill = 0;
  bool teacher_thresholding = true;
  bool student_thresholding = true;
  int lcm_grid_steps = 20;
  double ema_decay = 0.95;
  std::vector<int> lcm_inference_steps{3, 4, 5};
  // Teacher guidance during distillation; unset uses teacher.guidance.
  std::optional<double> guidance;
};

struct EvalConfig {
  std::size_t n_samples = 2048;
  int k = 5;
  std::size_t w2_subsample = 1024;
  int w2_repeats = 3;
  int diversity_seeds = 10;
};

struct CovariateConfig {
  std::vector<double> p_teacher{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<int> switch_t{749, 500, 250};
};

// Fully determines a run together with the seed.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "runs/default";
  DatasetSpec data;
  MlpSpec model;
  ScheduleKind schedule = ScheduleKind::cosine;
  TeacherConfig teacher;
  DistillConfig distill;
  EvalConfig eval;
  CovariateConfig covariate;

  // One "section.key = value" line per setting, sorted; seed and out excluded.
  std::string canonical() const;
  // 16 hex digits of FNV-1a over canonical().
  std::string hash() const;
  NoiseSchedule noise_schedule() const { return NoiseSchedule(schedule, model.t_max); }
};

// INI document with sections [run], [data], [model], [teacher], [distill],
// [eval], [covariate]. Unknown sections or keys are rejected with ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Stages and priors implied by the distill section.
std::vector<DistillStage> make_stages(const ExperimentConfig& config);
DistillOptions make_distill_options(const ExperimentConfig& config);

std::string version_string();

}  // namespace ddil::harness
