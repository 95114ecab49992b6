#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ddil/checkpoint.hpp"
#include "ddil/distill.hpp"
#include "ddil/harness/config.hpp"
#include "ddil/harness/dataset.hpp"
#include "ddil/metrics.hpp"
#include "ddil/net.hpp"
#include "ddil/solver.hpp"

namespace ddil::harness {

// Training points, drawn from the run seed.
SyntheticDataset training_set(const ExperimentConfig& config);
// Held-out real points for evaluation (eval.n_samples of them, labelled).
LabeledPoints held_out_set(const ExperimentConfig& config);
// Model architecture with the conditioning width of the dataset.
MlpSpec model_spec(const ExperimentConfig& config);

struct TeacherLogRow {
  std::uint64_t step;
  double loss;
  double grad_norm;
  double lr;
};

struct TeacherRun {
  Mlp model;
  AdamW optimizer;
  std::vector<TeacherLogRow> log;

  // Freshly initialized teacher for the config.
  static TeacherRun init(const ExperimentConfig& config);
};

// Runs the remaining teacher steps. On a non-finite loss or gradient the
// model keeps its last finite parameters and DivergenceError is thrown.
void train_teacher(const ExperimentConfig& config, const SyntheticDataset& data, TeacherRun& run);

// Maps initial noise and a condition to a generated point.
using Sampler = std::function<std::vector<double>(std::vector<double> z_init, int cond)>;

Sampler grid_sampler(const Denoiser& model, Discretization grid, SolverConfig config);

// Solver settings used to sample the teacher and distilled students.
SolverConfig teacher_solver_config(const ExperimentConfig& config);
SolverConfig student_solver_config(const ExperimentConfig& config);
Discretization teacher_sample_grid(const ExperimentConfig& config);
Discretization student_sample_grid(const ExperimentConfig& config);

// One generated point per held-out point, with the same label. Initial
// noise comes from a stream that depends only on the seed, so every model
// evaluated under one seed sees the same noise.
LabeledPoints generate_paired(const ExperimentConfig& config, const Sampler& sampler, const LabeledPoints& real,
                              std::string_view noise_stream = "eval/noise");

struct SampleScore {
  double w2 = 0.0;
  PrdcReport prdc;
  // gauss8 modes holding at least n / 32 samples; -1 for other datasets.
  int modes_covered = -1;
};

// W2 averaged over eval.w2_repeats paired subsamples of eval.w2_subsample
// points, plus PRDC on the full sets.
SampleScore score_samples(const ExperimentConfig& config, const LabeledPoints& real, const LabeledPoints& fake);

// Mean pairwise distance of eval.diversity_seeds samples per class,
// averaged over classes.
double sampler_diversity(const ExperimentConfig& config, const Sampler& sampler, int classes);

struct EvalResult {
  SampleScore score;
  double diversity = 0.0;
  LabeledPoints samples;
};

EvalResult evaluate(const ExperimentConfig& config, const Sampler& sampler, const LabeledPoints& real, int classes);

struct MetricRow {
  std::string dataset;
  std::string method;
  int steps = 0;
  std::uint64_t seed = 0;
  SampleScore score;
  double diversity = 0.0;
};

MetricRow metric_row(const ExperimentConfig& config, std::string method, int steps, const EvalResult& result);

// CSV with columns dataset,method,steps,seed,w2,precision,recall,density,
// coverage,diversity,modes_covered,config_hash,version.
void write_metrics_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(std::istream& in);

// Per-step distillation log: stage,step,mode,loss,grad_norm,count.
void write_distill_log(std::ostream& out, const std::vector<DistillResult>& stages);
void write_teacher_log(std::ostream& out, const std::vector<TeacherLogRow>& log);

struct DistillHooks {
  // Restores the first PD stage's replay buffer from a dump.
  std::optional<std::filesystem::path> buffer_restore;
  // Dumps the last PD stage's replay buffer.
  std::optional<std::filesystem::path> buffer_dump;
  // Receives the last finite student when training diverges.
  std::function<void(const Mlp& student)> on_divergence;
};

struct DistillRun {
  Mlp student;
  std::vector<DistillResult> stages;
  // Teacher of the last progressive stage; unset for consistency distillation.
  std::optional<Mlp> final_teacher;
};

// Progressive distillation down to distill.final_steps, or one consistency
// distillation run, according to distill.method.
DistillRun run_distillation(const ExperimentConfig& config, const SyntheticDataset& data, const Mlp& teacher,
                            const DistillHooks& hooks = {});

struct CovariateRow {
  std::string experiment;  // "p_teacher" or "switch"
  double p_teacher = 0.0;
  int switch_t = 0;
  std::string order;  // "teacher_then_student", "student_then_teacher" or empty
  SampleScore score;
};

// Mixed rollouts of the teacher (on a grid twice as fine) and the student
// with paired initial noise and paired coins: the p_teacher sweep followed
// by both switch orders at every switch timestep.
std::vector<CovariateRow> covariate_shift(const ExperimentConfig& config, const Mlp& teacher, const Mlp& student,
                                          const LabeledPoints& real);

void write_covariate_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<CovariateRow>& rows);

// Every state of one deterministic unroll along the grid, starting at z_init.
std::vector<LatentState> sample_trajectory(const Denoiser& model, std::vector<double> z_init, int cond,
                                           const Discretization& grid, const SolverConfig& config,
                                           Provenance provenance);

// Writes text to a file, replacing it.
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ddil::harness
