#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ddil/checkpoint.hpp"
#include "ddil/error.hpp"
#include "ddil/harness/config.hpp"
#include "ddil/harness/dataset.hpp"
#include "ddil/harness/experiments.hpp"
#include "ddil/harness/report.hpp"
#include "ddil/kernels.hpp"

namespace fs = std::filesystem;
using namespace ddil;
using namespace ddil::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args.config, "INI experiment config");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "Override run.seed");
  cmd->add_option("--out", args.out, "Override run.out (output directory)");
}

ExperimentConfig resolve(const CommonArgs& args) {
  ExperimentConfig config = args.config.empty() ? ExperimentConfig{} : load_config(args.config);
  if (args.seed) config.seed = *args.seed;
  if (args.out) config.out = *args.out;
  return config;
}

std::string csv_text(const ExperimentConfig& config, const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  write_metrics_csv(out, config, rows);
  return out.str();
}

void save_model(const fs::path& path, const ExperimentConfig& config, const Mlp& model,
                std::optional<OptimizerSnapshot> optimizer = std::nullopt) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_checkpoint(path, Checkpoint{config.noise_schedule(), model, std::move(optimizer), std::nullopt});
}

Checkpoint require_checkpoint(const fs::path& path, const ExperimentConfig& config) {
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.schedule == config.noise_schedule())) throw ConfigError("checkpoint schedule differs from the config");
  if (!(ck.model.spec() == model_spec(config))) throw ConfigError("checkpoint architecture differs from the config");
  return ck;
}

int gen_data(const CommonArgs& args) {
  const ExperimentConfig config = resolve(args);
  std::ostringstream train, held_out;
  write_points_csv(train, training_set(config).points);
  write_points_csv(held_out, held_out_set(config));
  write_file(config.out / "train.csv", train.str());
  write_file(config.out / "heldout.csv", held_out.str());
  std::cout << "wrote " << (config.out / "train.csv").string() << " and heldout.csv\n";
  return 0;
}

int train_teacher_cmd(const CommonArgs& args, bool skip_eval) {
  const ExperimentConfig config = resolve(args);
  const SyntheticDataset data = training_set(config);
  TeacherRun run = TeacherRun::init(config);
  try {
    train_teacher(config, data, run);
  } catch (const DivergenceError& e) {
    const fs::path path = config.out / "teacher.diverged.ckpt";
    save_model(path, config, run.model, snapshot(run.optimizer));
    std::cerr << "error: " << e.what() << " at step " << e.step() << "; last finite weights in " << path.string()
              << '\n';
    return kExitDivergence;
  }
  save_model(config.out / "teacher.ckpt", config, run.model, snapshot(run.optimizer));
  std::ostringstream log;
  write_teacher_log(log, run.log);
  write_file(config.out / "teacher_log.csv", log.str());
  if (!skip_eval) {
    const LabeledPoints real = held_out_set(config);
    const EvalResult result = evaluate(
        config, grid_sampler(run.model, teacher_sample_grid(config), teacher_solver_config(config)), real, data.classes);
    const MetricRow row = metric_row(config, "teacher", config.teacher.sample_steps, result);
    write_file(config.out / "metrics_teacher.csv", csv_text(config, {row}));
    std::cout << "teacher W2 " << row.score.w2 << " coverage " << row.score.prdc.coverage << '\n';
  }
  return 0;
}

struct DistillArgs {
  std::string teacher;
  std::optional<std::string> method;
  std::optional<std::size_t> buffer_capacity;
  std::optional<std::size_t> refresh_period;
  std::optional<std::string> buffer_restore;
  std::optional<std::string> buffer_dump;
};

int distill_cmd(const CommonArgs& args, const DistillArgs& d) {
  ExperimentConfig config = resolve(args);
  if (d.method) config.distill.method = parse_method(*d.method);
  if (d.buffer_capacity) config.distill.buffer_capacity = *d.buffer_capacity;
  if (d.refresh_period) config.distill.refresh_period = *d.refresh_period;
  const std::string method(to_string(config.distill.method));
  const fs::path teacher_path = d.teacher.empty() ? config.out / "teacher.ckpt" : fs::path(d.teacher);
  const Checkpoint teacher = require_checkpoint(teacher_path, config);
  const SyntheticDataset data = training_set(config);

  DistillHooks hooks;
  if (d.buffer_restore) hooks.buffer_restore = *d.buffer_restore;
  if (d.buffer_dump) hooks.buffer_dump = *d.buffer_dump;
  const fs::path diverged = config.out / ("student_" + method + ".diverged.ckpt");
  hooks.on_divergence = [&](const Mlp& student) { save_model(diverged, config, student); };
  std::optional<DistillRun> run;
  try {
    run.emplace(run_distillation(config, data, teacher.model, hooks));
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << " at step " << e.step() << "; last finite weights in "
              << diverged.string() << '\n';
    return kExitDivergence;
  }
  save_model(config.out / ("student_" + method + ".ckpt"), config, run->student);
  if (run->final_teacher) {
    const std::string steps = std::to_string(2 * config.distill.final_steps);
    save_model(config.out / ("teacher_" + method + "_" + steps + ".ckpt"), config, *run->final_teacher);
  }
  std::ostringstream log;
  write_distill_log(log, run->stages);
  write_file(config.out / ("distill_log_" + method + ".csv"), log.str());

  const LabeledPoints real = held_out_set(config);
  const EvalResult result = evaluate(
      config, grid_sampler(run->student, student_sample_grid(config), student_solver_config(config)), real,
      data.classes);
  const MetricRow row = metric_row(config, method, config.distill.final_steps, result);
  write_file(config.out / ("metrics_" + method + ".csv"), csv_text(config, {row}));
  std::cout << method << " W2 " << row.score.w2 << " coverage " << row.score.prdc.coverage << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string label;
  std::optional<std::string> dump_trajectories;
  std::size_t dump_count = 64;
};

int eval_cmd(const CommonArgs& args, const EvalArgs& e) {
  const ExperimentConfig config = resolve(args);
  const Checkpoint ck = require_checkpoint(e.checkpoint, config);
  const bool is_teacher = ck.model.role() == ModelRole::teacher;
  const Discretization grid = is_teacher ? teacher_sample_grid(config) : student_sample_grid(config);
  const SolverConfig solver = is_teacher ? teacher_solver_config(config) : student_solver_config(config);
  const std::string label = e.label.empty() ? fs::path(e.checkpoint).stem().string() : e.label;
  const LabeledPoints real = held_out_set(config);
  const EvalResult result =
      evaluate(config, grid_sampler(ck.model, grid, solver), real, class_count(config.data.kind));
  const MetricRow row = metric_row(config, label, grid.n_steps, result);
  write_file(config.out / ("metrics_" + label + ".csv"), csv_text(config, {row}));
  std::ostringstream samples;
  write_points_csv(samples, result.samples);
  write_file(config.out / ("samples_" + label + ".csv"), samples.str());

  if (e.dump_trajectories) {
    // Replays the first dump_count evaluation noises along the sampling grid.
    Rng rng = RngStreams(config.seed).stream("eval/noise");
    const Provenance tag = is_teacher ? Provenance::teacher_backward : Provenance::student_backward;
    std::vector<LatentState> records;
    for (std::size_t i = 0; i < std::min(e.dump_count, real.size()); ++i) {
      std::vector<double> z(static_cast<std::size_t>(real.dim));
      for (double& x : z) x = standard_normal(rng);
      auto states = sample_trajectory(ck.model, std::move(z), real.label(i), grid, solver, tag);
      records.insert(records.end(), states.begin(), states.end());
    }
    std::ostringstream out;
    write_trajectory_records(out, records);
    write_file(*e.dump_trajectories, out.str());
  }
  std::cout << label << " W2 " << row.score.w2 << " coverage " << row.score.prdc.coverage << '\n';
  return 0;
}

int covariate_cmd(const CommonArgs& args, const std::string& teacher_path, const std::string& student_path) {
  const ExperimentConfig config = resolve(args);
  const Checkpoint teacher = require_checkpoint(teacher_path.empty() ? config.out / "teacher.ckpt" : fs::path(teacher_path),
                                                config);
  const fs::path sp = student_path.empty()
                          ? config.out / ("student_" + std::string(to_string(config.distill.method)) + ".ckpt")
                          : fs::path(student_path);
  const Checkpoint student = require_checkpoint(sp, config);
  const auto rows = covariate_shift(config, teacher.model, student.model, held_out_set(config));
  std::ostringstream out;
  write_covariate_csv(out, config, rows);
  write_file(config.out / "covariate.csv", out.str());
  for (const auto& r : rows) {
    std::cout << r.experiment << ' ' << (r.experiment == "p_teacher" ? std::to_string(r.p_teacher)
                                                                        : std::to_string(r.switch_t) + ' ' + r.order)
              << " W2 " << r.score.w2 << '\n';
  }
  return 0;
}

int report_cmd(const CommonArgs& args, const std::string& runs) {
  const ExperimentConfig config = resolve(args);
  const fs::path root = runs.empty() ? config.out : fs::path(runs);
  const auto summary = summarize(collect_metrics(root));
  std::ostringstream out;
  write_summary_csv(out, summary);
  write_file(config.out / "summary.csv", out.str());
  std::cout << out.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale diffusion distillation with dataset aggregation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  CommonArgs common;
  auto* gen = app.add_subcommand("gen-data", "Write the training and held-out point sets");
  add_common(gen, common);

  bool skip_eval = false;
  auto* teach = app.add_subcommand("train-teacher", "Train the teacher and evaluate its samples");
  add_common(teach, common);
  teach->add_flag("--skip-eval", skip_eval, "Do not evaluate after training");

  DistillArgs dargs;
  auto* dist = app.add_subcommand("distill", "Distill a few-step student from a teacher checkpoint");
  add_common(dist, common);
  dist->add_option("--teacher", dargs.teacher, "Teacher checkpoint (default <out>/teacher.ckpt)");
  dist->add_option("--method", dargs.method, "Override distill.method (pd, pd-ddil, lcm, lcm-ddil)");
  dist->add_option("--buffer-capacity", dargs.buffer_capacity, "Override distill.buffer_capacity");
  dist->add_option("--refresh-period", dargs.refresh_period, "Override distill.refresh_period");
  dist->add_option("--buffer-restore", dargs.buffer_restore, "Seed the first stage's replay buffer from a dump");
  dist->add_option("--buffer-dump", dargs.buffer_dump, "Dump the last stage's replay buffer");

  EvalArgs eargs;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint against held-out data");
  add_common(ev, common);
  ev->add_option("--checkpoint", eargs.checkpoint, "Checkpoint to evaluate")->required();
  ev->add_option("--label", eargs.label, "Method label for the CSV (default: checkpoint stem)");
  ev->add_option("--dump-trajectories", eargs.dump_trajectories, "Write sampling trajectories as JSON lines");
  ev->add_option("--dump-count", eargs.dump_count, "Trajectories to dump");

  std::string cov_teacher, cov_student;
  auto* cov = app.add_subcommand("covariate-shift", "Mixed teacher/student rollouts");
  add_common(cov, common);
  cov->add_option("--teacher", cov_teacher, "Teacher checkpoint (default <out>/teacher.ckpt)");
  cov->add_option("--student", cov_student, "Student checkpoint (default <out>/student_<method>.ckpt)");

  std::string runs;
  auto* rep = app.add_subcommand("report", "Summarize metrics_*.csv files over seeds");
  add_common(rep, common, false);
  rep->add_option("--runs", runs, "Directory searched for metrics CSVs (default <out>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (std::getenv("DDIL_VERBOSE")) std::clog << "kernels: " << kernels::backend_name(kernels::active().backend) << '\n';
    if (*gen) return gen_data(common);
    if (*teach) return train_teacher_cmd(common, skip_eval);
    if (*dist) return distill_cmd(common, dargs);
    if (*ev) return eval_cmd(common, eargs);
    if (*cov) return covariate_cmd(common, cov_teacher, cov_student);
    if (*rep) return report_cmd(common, runs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
