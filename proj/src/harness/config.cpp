#include "ddil/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ddil/error.hpp"

#ifndef DDIL_VERSION_STRING
#define DDIL_VERSION_STRING "0.1.0"
#endif

namespace ddil::harness {

namespace pt = boost::property_tree;

std::string version_string() { return DDIL_VERSION_STRING; }

std::string_view to_string(MethodVariant variant) {
  switch (variant) {
    case MethodVariant::pd: return "pd";
    case MethodVariant::pd_ddil: return "pd-ddil";
    case MethodVariant::lcm: return "lcm";
    case MethodVariant::lcm_ddil: return "lcm-ddil";
  }
  return "unknown";
}

MethodVariant parse_method(std::string_view name) {
  if (name == "pd") return MethodVariant::pd;
  if (name == "pd-ddil") return MethodVariant::pd_ddil;
  if (name == "lcm") return MethodVariant::lcm;
  if (name == "lcm-ddil") return MethodVariant::lcm_ddil;
  throw ConfigError("unknown distillation method '" + std::string(name) + "'");
}

DistillMethod base_method(MethodVariant variant) {
  return variant == MethodVariant::lcm || variant == MethodVariant::lcm_ddil ? DistillMethod::lcm : DistillMethod::pd;
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"seed", "out"}},
      {"data", {"kind", "n_train", "noise"}},
      {"model", {"hidden", "time_embed_dim", "schedule", "t_max"}},
      {"teacher",
       {"steps", "batch", "lr", "warmup", "weight_decay", "p_uncond", "sample_steps", "guidance", "thresholding",
        "log_every"}},
      {"distill",
       {"method", "teacher_steps", "final_steps", "iterations", "lcm_iterations", "lr", "warmup", "weight_decay",
        "batch", "priors", "priors_split", "buffer_capacity", "refresh_period", "rollouts_per_refresh", "min_fill",
        "teacher_thresholding", "student_thresholding", "lcm_grid_steps", "ema_decay", "lcm_inference_steps",
        "guidance"}},
      {"eval", {"n_samples", "k", "w2_subsample", "w2_repeats", "diversity_seeds"}},
      {"covariate", {"p_teacher", "switch_t"}},
  };
  return keys;
}

std::vector<std::string> split_list(const std::string& text, const char* separators) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(separators));
  for (std::string& p : parts) boost::trim(p);
  std::erase_if(parts, [](const std::string& p) { return p.empty(); });
  return parts;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (!in || !(in >> std::ws).eof()) throw ConfigError("bad value '" + text + "' for " + key);
  if constexpr (std::is_unsigned_v<T>) {
    if (!text.empty() && text.front() == '-') throw ConfigError("negative value for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string v = boost::to_lower_copy(text);
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw ConfigError("bad boolean '" + text + "' for " + key);
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const std::string& part : split_list(text, ",")) out.push_back(parse_number<T>(key, part));
  return out;
}

class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (!tree_) return std::nullopt;
    if (auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'))) return boost::trim_copy(*v);
    return std::nullopt;
  }

  template <class T>
  void number(const std::string& key, T& target) const {
    if (auto v = raw(key)) target = parse_number<T>(name_ + "." + key, *v);
  }
  void boolean(const std::string& key, bool& target) const {
    if (auto v = raw(key)) target = parse_bool(name_ + "." + key, *v);
  }
  template <class T>
  void list(const std::string& key, std::vector<T>& target) const {
    if (auto v = raw(key)) target = parse_list<T>(name_ + "." + key, *v);
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
};

template <class T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

std::string format_priors(const std::vector<SamplingPriors>& phases) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < phases.size(); ++i) {
    out << (i ? " | " : "") << phases[i].forward << ',' << phases[i].teacher_backward << ','
        << phases[i].student_backward;
  }
  return out.str();
}

void validate(const ExperimentConfig& c) {
  if (c.data.n_points == 0) throw ConfigError("data.n_train must be positive");
  if (c.model.hidden.empty()) throw ConfigError("model.hidden needs at least one layer");
  if (c.teacher.batch == 0 || c.distill.batch == 0) throw ConfigError("batch sizes must be positive");
  if (c.teacher.p_uncond < 0.0 || c.teacher.p_uncond > 1.0) throw ConfigError("teacher.p_uncond outside [0, 1]");
  if (c.teacher.guidance < 1.0) throw ConfigError("teacher.guidance must be >= 1");
  if (c.teacher.sample_steps <= 0) throw ConfigError("teacher.sample_steps must be positive");
  if (c.distill.final_steps <= 0 || c.distill.teacher_steps <= c.distill.final_steps) {
    throw ConfigError("distill.teacher_steps must exceed distill.final_steps");
  }
  int n = c.distill.teacher_steps;
  while (n > c.distill.final_steps) {
    if (n % 2 != 0) throw ConfigError("distill.teacher_steps must reach final_steps by halving");
    n /= 2;
  }
  if (n != c.distill.final_steps) throw ConfigError("distill.teacher_steps must reach final_steps by halving");
  if (c.distill.priors.size() > 2) throw ConfigError("distill.priors accepts at most two phases");
  for (const SamplingPriors& p : c.distill.priors) p.validate();
  if (c.distill.priors_split <= 0.0 || c.distill.priors_split >= 1.0) throw ConfigError("distill.priors_split outside (0, 1)");
  if (c.distill.refresh_period == 0) throw ConfigError("distill.refresh_period must be positive");
  if (c.distill.ema_decay < 0.0 || c.distill.ema_decay >= 1.0) throw ConfigError("distill.ema_decay outside [0, 1)");
  if (c.eval.n_samples <= static_cast<std::size_t>(c.eval.k)) throw ConfigError("eval.n_samples must exceed eval.k");
  if (c.eval.w2_repeats <= 0 || c.eval.w2_subsample == 0) throw ConfigError("bad W2 evaluation settings");
  if (c.eval.diversity_seeds < 2) throw ConfigError("eval.diversity_seeds must be >= 2");
  for (const double p : c.covariate.p_teacher) {
    if (p < 0.0 || p > 1.0) throw ConfigError("covariate.p_teacher entries must lie in [0, 1]");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigError("unknown config section [" + section + "]");
    if (!body.data().empty() && body.empty()) throw ConfigError("config key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) throw ConfigError("unknown config key " + section + "." + key);
    }
  }
  auto section = [&](const std::string& name) {
    const auto child = tree.get_child_optional(name);
    return Section(child ? &*child : nullptr, name);
  };

  ExperimentConfig c;
  const Section run = section("run");
  run.number("seed", c.seed);
  if (auto out = run.raw("out")) c.out = *out;

  const Section data = section("data");
  if (auto kind = data.raw("kind")) c.data.kind = parse_dataset_kind(*kind);
  data.number("n_train", c.data.n_points);
  data.number("noise", c.data.noise);
  c.model.cond_classes = class_count(c.data.kind);

  const Section model = section("model");
  model.list("hidden", c.model.hidden);
  model.number("time_embed_dim", c.model.time_embed_dim);
  model.number("t_max", c.model.t_max);
  if (auto kind = model.raw("schedule")) c.schedule = parse_schedule_kind(*kind);

  const Section teacher = section("teacher");
  teacher.number("steps", c.teacher.steps);
  teacher.number("batch", c.teacher.batch);
  teacher.number("lr", c.teacher.optimizer.lr);
  teacher.number("warmup", c.teacher.optimizer.warmup_steps);
  teacher.number("weight_decay", c.teacher.optimizer.weight_decay);
  teacher.number("p_uncond", c.teacher.p_uncond);
  teacher.number("sample_steps", c.teacher.sample_steps);
  teacher.number("guidance", c.teacher.guidance);
  teacher.boolean("thresholding", c.teacher.thresholding);
  teacher.number("log_every", c.teacher.log_every);

  const Section distill = section("distill");
  if (auto method = distill.raw("method")) c.distill.method = parse_method(*method);
  distill.number("teacher_steps", c.distill.teacher_steps);
  distill.number("final_steps", c.distill.final_steps);
  distill.list("iterations", c.distill.iterations);
  distill.number("lcm_iterations", c.distill.lcm_iterations);
  distill.number("lr", c.distill.lr);
  distill.number("warmup", c.distill.warmup);
  distill.number("weight_decay", c.distill.weight_decay);
  distill.number("batch", c.distill.batch);
  if (auto priors = distill.raw("priors")) {
    c.distill.priors.clear();
    for (const std::string& phase : split_list(*priors, "|")) {
      const auto w = parse_list<double>("distill.priors", phase);
      if (w.size() != 3) throw ConfigError("distill.priors phases need three weights");
      c.distill.priors.push_back({w[0], w[1], w[2]});
    }
  }
  distill.number("priors_split", c.distill.priors_split);
  distill.number("buffer_capacity", c.distill.buffer_capacity);
  distill.number("refresh_period", c.distill.refresh_period);
  distill.number("rollouts_per_refresh", c.distill.rollouts_per_refresh);
  distill.number("min_fill", c.distill.min_fill);
  distill.boolean("teacher_thresholding", c.distill.teacher_thresholding);
  distill.boolean("student_thresholding", c.distill.student_thresholding);
  distill.number("lcm_grid_steps", c.distill.lcm_grid_steps);
  distill.number("ema_decay", c.distill.ema_decay);
  distill.list("lcm_inference_steps", c.distill.lcm_inference_steps);
  if (auto g = distill.raw("guidance")) c.distill.guidance = parse_number<double>("distill.guidance", *g);

  const Section eval = section("eval");
  eval.number("n_samples", c.eval.n_samples);
  eval.number("k", c.eval.k);
  eval.number("w2_subsample", c.eval.w2_subsample);
  eval.number("w2_repeats", c.eval.w2_repeats);
  eval.number("diversity_seeds", c.eval.diversity_seeds);

  const Section covariate = section("covariate");
  covariate.list("p_teacher", c.covariate.p_teacher);
  covariate.list("switch_t", c.covariate.switch_t);

  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string ExperimentConfig::canonical() const {
  std::vector<std::string> lines;
  auto add = [&](const std::string& key, const auto& value) {
    std::ostringstream line;
    line.precision(17);
    line << key << " = " << value;
    lines.push_back(line.str());
  };
  add("data.kind", to_string(data.kind));
  add("data.n_train", data.n_points);
  add("data.noise", data.noise);
  add("model.hidden", join(model.hidden));
  add("model.time_embed_dim", model.time_embed_dim);
  add("model.schedule", to_string(schedule));
  add("model.t_max", model.t_max);
  add("teacher.steps", teacher.steps);
  add("teacher.batch", teacher.batch);
  add("teacher.lr", teacher.optimizer.lr);
  add("teacher.warmup", teacher.optimizer.warmup_steps);
  add("teacher.weight_decay", teacher.optimizer.weight_decay);
  add("teacher.p_uncond", teacher.p_uncond);
  add("teacher.sample_steps", teacher.sample_steps);
  add("teacher.guidance", teacher.guidance);
  add("teacher.thresholding", teacher.thresholding);
  add("teacher.log_every", teacher.log_every);
  add("distill.method", to_string(distill.method));
  add("distill.teacher_steps", distill.teacher_steps);
  add("distill.final_steps", distill.final_steps);
  add("distill.iterations", join(distill.iterations));
  add("distill.lcm_iterations", distill.lcm_iterations);
  add("distill.lr", distill.lr);
  add("distill.warmup", distill.warmup);
  add("distill.weight_decay", distill.weight_decay);
  add("distill.batch", distill.batch);
  add("distill.priors", format_priors(distill.priors));
  add("distill.priors_split", distill.priors_split);
  add("distill.buffer_capacity", distill.buffer_capacity);
  add("distill.refresh_period", distill.refresh_period);
  add("distill.rollouts_per_refresh", distill.rollouts_per_refresh);
  add("distill.min_fill", distill.min_fill);
  add("distill.teacher_thresholding", distill.teacher_thresholding);
  add("distill.student_thresholding", distill.student_thresholding);
  add("distill.lcm_grid_steps", distill.lcm_grid_steps);
  add("distill.ema_decay", distill.ema_decay);
  add("distill.lcm_inference_steps", join(distill.lcm_inference_steps));
  add("distill.guidance", distill.guidance ? std::to_string(*distill.guidance) : std::string("teacher"));
  add("eval.n_samples", eval.n_samples);
  add("eval.k", eval.k);
  add("eval.w2_subsample", eval.w2_subsample);
  add("eval.w2_repeats", eval.w2_repeats);
  add("eval.diversity_seeds", eval.diversity_seeds);
  add("covariate.p_teacher", join(covariate.p_teacher));
  add("covariate.switch_t", join(covariate.switch_t));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : canonical()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

std::vector<DistillStage> make_stages(const ExperimentConfig& config) {
  const DistillConfig& d = config.distill;
  const double guidance = d.guidance.value_or(config.teacher.guidance);
  const AdamWConfig optimizer{d.lr, 0.9, 0.999, 1e-8, d.weight_decay, d.warmup, 0};

  auto priors_for = [&](std::uint64_t iterations, const SamplingPriors& first, const SamplingPriors& second,
                        bool two_part) {
    const auto split = static_cast<std::uint64_t>(std::llround(d.priors_split * static_cast<double>(iterations)));
    if (!d.priors.empty()) {
      if (d.priors.size() == 1) return PriorSchedule::constant(d.priors[0], iterations);
      return PriorSchedule::two_part(d.priors[0], d.priors[1], split, iterations);
    }
    return two_part ? PriorSchedule::two_part(first, second, split, iterations)
                    : PriorSchedule::constant(first, iterations);
  };

  std::vector<DistillStage> stages;
  if (base_method(d.method) == DistillMethod::lcm) {
    DistillStage stage;
    stage.teacher_steps = d.lcm_grid_steps;
    stage.iterations = d.lcm_iterations;
    stage.optimizer = optimizer;
    stage.batch_size = d.batch;
    stage.teacher_guidance = guidance;
    const SamplingPriors& preset = d.method == MethodVariant::lcm_ddil ? priors::kLcm : priors::kForwardOnly;
    stage.priors = priors_for(d.lcm_iterations, preset, preset, false);
    stages.push_back(std::move(stage));
    return stages;
  }

  std::size_t count = 0;
  for (int n = d.teacher_steps; n > d.final_steps; n /= 2) ++count;
  if (d.iterations.size() != count && d.iterations.size() != 1) {
    throw ConfigError("distill.iterations needs one entry or one per stage (" + std::to_string(count) + ")");
  }
  int n = d.teacher_steps;
  for (std::size_t i = 0; i < count; ++i, n /= 2) {
    DistillStage stage;
    stage.teacher_steps = n;
    stage.iterations = d.iterations.size() == 1 ? d.iterations[0] : d.iterations[i];
    stage.optimizer = optimizer;
    stage.batch_size = d.batch;
    // Only the original teacher is guided; distilled teachers already are.
    stage.teacher_guidance = i == 0 ? guidance : 1.0;
    if (d.method == MethodVariant::pd_ddil) {
      stage.priors = priors_for(stage.iterations, priors::kPdPart1, priors::kPdPart2, true);
    } else {
      stage.priors = priors_for(stage.iterations, priors::kForwardOnly, priors::kForwardOnly, false);
    }
    stages.push_back(std::move(stage));
  }
  return stages;
}

DistillOptions make_distill_options(const ExperimentConfig& config) {
  const DistillConfig& d = config.distill;
  DistillOptions options;
  options.schedule = config.noise_schedule();
  options.support = SupportBox::symmetric(config.model.data_dim);
  options.teacher_thresholding = d.teacher_thresholding;
  options.student_thresholding = d.student_thresholding;
  options.refresh_period = d.refresh_period;
  options.rollouts_per_refresh = d.rollouts_per_refresh;
  options.min_fill = d.min_fill;
  options.lcm_grid_steps = d.lcm_grid_steps;
  options.ema_decay = d.ema_decay;
  options.lcm_inference_steps = d.lcm_inference_steps;
  return options;
}

}  // namespace ddil::harness
