#include "ddil/harness/experiments.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>

#include <boost/algorithm/string.hpp>

#include "ddil/buffer.hpp"
#include "ddil/error.hpp"
#include "ddil/rng.hpp"

namespace ddil::harness {

namespace {

std::vector<double> gaussian(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = standard_normal(rng);
  return v;
}

bool all_finite(std::span<const double> v) {
  for (const double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Same indices from both sets, so labels stay paired.
LabeledPoints take(const LabeledPoints& s, std::span<const std::size_t> idx) {
  LabeledPoints out;
  out.dim = s.dim;
  for (const std::size_t i : idx) out.push(s.point(i), s.label(i));
  return out;
}

std::string_view order_name(SwitchOrder order) {
  return order == SwitchOrder::teacher_then_student ? "teacher_then_student" : "student_then_teacher";
}

void write_number(std::ostream& out, double v) { out << std::setprecision(10) << v; }

}  // namespace

SyntheticDataset training_set(const ExperimentConfig& config) {
  Rng rng = RngStreams(config.seed).stream("data/train");
  return generate_dataset(config.data, rng);
}

LabeledPoints held_out_set(const ExperimentConfig& config) {
  Rng rng = RngStreams(config.seed).stream("eval/real");
  DatasetSpec spec = config.data;
  spec.n_points = config.eval.n_samples;
  return generate_dataset(spec, rng).points;
}

MlpSpec model_spec(const ExperimentConfig& config) {
  MlpSpec spec = config.model;
  spec.cond_classes = class_count(config.data.kind);
  return spec;
}

TeacherRun TeacherRun::init(const ExperimentConfig& config) {
  const RngStreams streams(config.seed);
  Mlp model(model_spec(config), ModelRole::teacher, streams.derive("teacher/init"));
  AdamWConfig opt = config.teacher.optimizer;
  if (opt.total_steps == 0) opt.total_steps = config.teacher.steps;
  AdamW optimizer(opt, model.param_count());
  return {std::move(model), std::move(optimizer), {}};
}

void train_teacher(const ExperimentConfig& config, const SyntheticDataset& data, TeacherRun& run) {
  if (data.points.empty()) throw DataError("teacher training set is empty");
  const NoiseSchedule schedule = config.noise_schedule();
  const TeacherConfig& tc = config.teacher;
  Rng rng = RngStreams(config.seed).stream("teacher/batch");
  const int t_max = schedule.t_max();
  const int dim = data.points.dim;
  std::vector<TeacherSample> batch(tc.batch);
  std::vector<double> grad(run.model.param_count());

  for (std::uint64_t step = 0; step < tc.steps; ++step) {
    // Batches of finished steps are redrawn so a resumed run stays on the same stream.
    for (TeacherSample& s : batch) {
      const std::size_t i = uniform_index(rng, data.points.size());
      const auto p = data.points.point(i);
      s.x.assign(p.begin(), p.end());
      s.t = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(t_max)));
      s.eps = gaussian(rng, dim);
      const bool drop = uniform01(rng) < tc.p_uncond;
      s.cond = drop || data.classes == 0 ? kNullClass : data.points.label(i);
    }
    if (step < run.optimizer.step_count()) continue;

    double loss = 0.0;
    try {
      loss = teacher_loss(run.model, batch, schedule, grad);
    } catch (const NumericError& e) {
      throw DivergenceError(std::string("teacher diverged: ") + e.what(), step);
    }
    if (!std::isfinite(loss) || !all_finite(grad)) throw DivergenceError("teacher gradient is not finite", step);
    const double lr = run.optimizer.lr_at(step);
    run.optimizer.step(run.model.params(), grad);
    if ((tc.log_every > 0 && step % tc.log_every == 0) || step + 1 == tc.steps) {
      run.log.push_back({step, loss, l2_norm(grad), lr});
    }
  }
}

Sampler grid_sampler(const Denoiser& model, Discretization grid, SolverConfig config) {
  return [&model, grid = std::move(grid), config = std::move(config)](std::vector<double> z, int cond) {
    return sample(model, std::move(z), cond, grid, config);
  };
}

SolverConfig teacher_solver_config(const ExperimentConfig& config) {
  return {config.noise_schedule(), config.teacher.guidance, config.teacher.thresholding,
          SupportBox::symmetric(config.model.data_dim)};
}

SolverConfig student_solver_config(const ExperimentConfig& config) {
  return {config.noise_schedule(), 1.0, config.distill.student_thresholding,
          SupportBox::symmetric(config.model.data_dim)};
}

Discretization teacher_sample_grid(const ExperimentConfig& config) {
  return make_grid(config.teacher.sample_steps, config.model.t_max, GridPolicy::rounded);
}

Discretization student_sample_grid(const ExperimentConfig& config) {
  const bool pd = base_method(config.distill.method) == DistillMethod::pd;
  return make_grid(config.distill.final_steps, config.model.t_max, pd ? GridPolicy::exact : GridPolicy::rounded);
}

LabeledPoints generate_paired(const ExperimentConfig& config, const Sampler& sampler, const LabeledPoints& real,
                              std::string_view noise_stream) {
  Rng rng = RngStreams(config.seed).stream(noise_stream);
  LabeledPoints fake;
  fake.dim = real.dim;
  fake.coords.reserve(real.coords.size());
  for (std::size_t i = 0; i < real.size(); ++i) {
    std::vector<double> z = gaussian(rng, real.dim);
    const std::vector<double> x = sampler(std::move(z), real.label(i));
    if (!all_finite(x)) throw NumericError("generated sample " + std::to_string(i) + " is not finite");
    fake.push(x, real.label(i));
  }
  return fake;
}

SampleScore score_samples(const ExperimentConfig& config, const LabeledPoints& real, const LabeledPoints& fake) {
  if (real.size() != fake.size()) throw ShapeError("paired evaluation needs equal-size sets");
  const RngStreams streams(config.seed);
  const std::size_t n = real.size();
  const std::size_t m = std::min(config.eval.w2_subsample, n);
  SampleScore score;
  std::vector<std::size_t> idx(n);
  for (int r = 0; r < config.eval.w2_repeats; ++r) {
    Rng rng = streams.stream("eval/w2/" + std::to_string(r));
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
    const std::span<const std::size_t> chosen(idx.data(), m);
    score.w2 += exact_w2(take(real, chosen), take(fake, chosen));
  }
  score.w2 /= config.eval.w2_repeats;
  score.prdc = prdc(real, fake, config.eval.k);
  if (config.data.kind == DatasetKind::gauss8) score.modes_covered = gauss8_covered_modes(fake);
  return score;
}

double sampler_diversity(const ExperimentConfig& config, const Sampler& sampler, int classes) {
  const RngStreams streams(config.seed);
  const int dim = config.model.data_dim;
  std::vector<int> conds;
  for (int c = 0; c < classes; ++c) conds.push_back(c);
  if (conds.empty()) conds.push_back(kNullClass);
  double total = 0.0;
  for (const int c : conds) {
    Rng rng = streams.stream("eval/diversity/" + std::to_string(c));
    LabeledPoints samples;
    samples.dim = dim;
    for (int s = 0; s < config.eval.diversity_seeds; ++s) samples.push(sampler(gaussian(rng, dim), c), kNullClass);
    total += mean_pairwise_distance(samples);
  }
  return total / static_cast<double>(conds.size());
}

EvalResult evaluate(const ExperimentConfig& config, const Sampler& sampler, const LabeledPoints& real, int classes) {
  EvalResult result;
  result.samples = generate_paired(config, sampler, real);
  result.score = score_samples(config, real, result.samples);
  result.diversity = sampler_diversity(config, sampler, classes);
  return result;
}

MetricRow metric_row(const ExperimentConfig& config, std::string method, int steps, const EvalResult& result) {
  return {std::string(to_string(config.data.kind)), std::move(method), steps, config.seed, result.score,
          result.diversity};
}

void write_metrics_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<MetricRow>& rows) {
  out << "dataset,method,steps,seed,w2,precision,recall,density,coverage,diversity,modes_covered,config_hash,version\n";
  const std::string hash = config.hash();
  const std::string version = version_string();
  for (const MetricRow& r : rows) {
    out << r.dataset << ',' << r.method << ',' << r.steps << ',' << r.seed << ',';
    for (const double v : {r.score.w2, r.score.prdc.precision, r.score.prdc.recall, r.score.prdc.density,
                           r.score.prdc.coverage, r.diversity}) {
      write_number(out, v);
      out << ',';
    }
    out << r.score.modes_covered << ',' << hash << ',' << version << '\n';
  }
}

std::vector<MetricRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || !boost::starts_with(line, "dataset,method,steps,seed,w2")) {
    throw DataError("not a metrics CSV");
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    boost::split(f, line, boost::is_any_of(","));
    if (f.size() != 13) throw DataError("metrics row has " + std::to_string(f.size()) + " fields");
    try {
      MetricRow r;
      r.dataset = f[0];
      r.method = f[1];
      r.steps = std::stoi(f[2]);
      r.seed = std::stoull(f[3]);
      r.score.w2 = std::stod(f[4]);
      r.score.prdc.precision = std::stod(f[5]);
      r.score.prdc.recall = std::stod(f[6]);
      r.score.prdc.density = std::stod(f[7]);
      r.score.prdc.coverage = std::stod(f[8]);
      r.diversity = std::stod(f[9]);
      r.score.modes_covered = std::stoi(f[10]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw DataError("malformed metrics row: " + line);
    }
  }
  return rows;
}

void write_distill_log(std::ostream& out, const std::vector<DistillResult>& stages) {
  out << "stage,step,mode,loss,grad_norm,count\n";
  for (std::size_t s = 0; s < stages.size(); ++s) {
    for (const StepLog& row : stages[s].log) {
      out << s << ',' << row.step << ',' << to_string(row.mode) << ',';
      write_number(out, row.loss);
      out << ',';
      write_number(out, row.grad_norm);
      out << ',' << row.count << '\n';
    }
  }
}

void write_teacher_log(std::ostream& out, const std::vector<TeacherLogRow>& log) {
  out << "step,loss,grad_norm,lr\n";
  for (const TeacherLogRow& row : log) {
    out << row.step << ',';
    write_number(out, row.loss);
    out << ',';
    write_number(out, row.grad_norm);
    out << ',';
    write_number(out, row.lr);
    out << '\n';
  }
}

DistillRun run_distillation(const ExperimentConfig& config, const SyntheticDataset& data, const Mlp& teacher,
                            const DistillHooks& hooks) {
  if (!teacher.same_architecture(Mlp(model_spec(config), ModelRole::teacher, 0))) {
    throw ConfigError("teacher checkpoint does not match the configured model");
  }
  const RngStreams streams(config.seed);
  const std::vector<DistillStage> stages = make_stages(config);
  const DistillOptions options = make_distill_options(config);

  if (base_method(config.distill.method) == DistillMethod::lcm) {
    Mlp student = teacher;
    student.set_role(ModelRole::student);
    DistillRngs rngs = DistillRngs::from(streams, "lcm");
    DistillRun run{student, {}, std::nullopt};
    try {
      run.stages.push_back(
          ddil_train(stages.front(), DistillMethod::lcm, options, data.points, teacher, student, nullptr, rngs));
    } catch (const DivergenceError&) {
      if (hooks.on_divergence) hooks.on_divergence(student);
      throw;
    }
    run.student = std::move(student);
    return run;
  }

  ProgressiveHooks ph;
  ph.before_stage = [&](std::size_t i, ReplayBuffer* buffer) {
    if (i != 0 || !buffer || !hooks.buffer_restore) return;
    std::ifstream in(*hooks.buffer_restore);
    if (!in) throw DataError("cannot read buffer dump " + hooks.buffer_restore->string());
    buffer->restore(in);
  };
  ph.after_stage = [&](std::size_t i, ReplayBuffer* buffer, const DistillResult&) {
    if (i + 1 != stages.size() || !buffer || !hooks.buffer_dump) return;
    std::ostringstream out;
    buffer->dump(out);
    write_file(*hooks.buffer_dump, out.str());
  };
  ph.on_divergence = [&](std::size_t, const Mlp& student) {
    if (hooks.on_divergence) hooks.on_divergence(student);
  };
  ProgressiveResult result =
      progressive_loop(stages, options, data.points, teacher, config.distill.buffer_capacity, streams, ph);
  return {std::move(result.student), std::move(result.stages), std::move(result.final_teacher)};
}

std::vector<CovariateRow> covariate_shift(const ExperimentConfig& config, const Mlp& teacher, const Mlp& student,
                                          const LabeledPoints& real) {
  if (!teacher.same_architecture(student)) throw ShapeError("teacher and student architectures differ");
  const int t_max = config.model.t_max;
  const int n = config.distill.final_steps;
  const Discretization teacher_grid = make_grid(2 * n, t_max, GridPolicy::exact);
  const Discretization student_grid = make_grid(n, t_max, GridPolicy::exact);
  check_alignment(teacher_grid, student_grid);
  const SolverConfig teacher_cfg{config.noise_schedule(), config.distill.guidance.value_or(config.teacher.guidance),
                                 config.distill.teacher_thresholding, SupportBox::symmetric(config.model.data_dim)};
  const SolverConfig student_cfg = student_solver_config(config);
  const RolloutPair pair{teacher, teacher_cfg, teacher_grid, student, student_cfg, student_grid};
  const RngStreams streams(config.seed);

  auto run = [&](const MixedRolloutConfig& mixed) {
    mixed.validate();
    // Every variant replays the same coin stream as well as the same noise.
    auto coins = std::make_shared<Rng>(streams.stream("covariate/coin"));
    const Sampler sampler = [&, coins](std::vector<double> z, int cond) {
      return mixed_rollout(pair, mixed, std::move(z), cond, *coins).states.back().z;
    };
    return score_samples(config, real, generate_paired(config, sampler, real, "covariate/noise"));
  };

  std::vector<CovariateRow> rows;
  for (const double p : config.covariate.p_teacher) {
    rows.push_back({"p_teacher", p, 0, "", run(MixedRolloutConfig::with_probability(p))});
  }
  for (const int t : config.covariate.switch_t) {
    if (!student_grid.contains(t)) {
      throw GridError("switch timestep " + std::to_string(t) + " is not on the student grid");
    }
    for (const SwitchOrder order : {SwitchOrder::teacher_then_student, SwitchOrder::student_then_teacher}) {
      rows.push_back({"switch", 0.0, t, std::string(order_name(order)), run(MixedRolloutConfig::with_switch(t, order))});
    }
  }
  return rows;
}

void write_covariate_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<CovariateRow>& rows) {
  out << "dataset,seed,steps,experiment,p_teacher,switch_t,order,w2,precision,recall,density,coverage,modes_covered,"
         "config_hash,version\n";
  const std::string hash = config.hash();
  const std::string version = version_string();
  for (const CovariateRow& r : rows) {
    out << to_string(config.data.kind) << ',' << config.seed << ',' << config.distill.final_steps << ','
        << r.experiment << ',';
    write_number(out, r.p_teacher);
    out << ',' << r.switch_t << ',' << r.order << ',';
    for (const double v : {r.score.w2, r.score.prdc.precision, r.score.prdc.recall, r.score.prdc.density,
                           r.score.prdc.coverage}) {
      write_number(out, v);
      out << ',';
    }
    out << r.score.modes_covered << ',' << hash << ',' << version << '\n';
  }
}

std::vector<LatentState> sample_trajectory(const Denoiser& model, std::vector<double> z_init, int cond,
                                           const Discretization& grid, const SolverConfig& config,
                                           Provenance provenance) {
  std::vector<LatentState> states;
  states.emplace_back(std::move(z_init), grid.timesteps.front(), cond, provenance);
  for (std::size_t i = 1; i <= grid.timesteps.size(); ++i) {
    const int t_next = i < grid.timesteps.size() ? grid.timesteps[i] : 0;
    states.push_back(ddim_step(model, states.back(), t_next, config));
  }
  return states;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace ddil::harness
