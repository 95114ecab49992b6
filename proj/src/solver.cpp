#include "ddil/solver.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "ddil/error.hpp"

namespace ddil {

std::vector<double> cfg_predict(const Denoiser& model, std::span<const double> z, int t, int cond, double omega) {
  if (omega < 1.0) throw ConfigError("guidance scale must be >= 1");
  const std::size_t dim = z.size();
  std::vector<double> v_cond(dim);
  model.predict(z, t, cond, v_cond);
  if (omega == 1.0) return v_cond;
  if (cond == kNullClass) throw ConfigError("guidance needs a concrete condition, got the null class");
  if (!model.has_null_class()) throw ConfigError("guidance needs a model with a null class");
  std::vector<double> v_null(dim);
  model.predict(z, t, kNullClass, v_null);
  for (std::size_t i = 0; i < dim; ++i) v_cond[i] = v_null[i] + omega * (v_cond[i] - v_null[i]);
  return v_cond;
}

Prediction solver_prediction(const Denoiser& model, std::span<const double> z, int t, int cond,
                             const SolverConfig& config) {
  const std::vector<double> v = cfg_predict(model, z, t, cond, config.guidance);
  Prediction p = to_prediction(v, z, t, config.schedule);
  if (!config.thresholding) return p;
  const double sigma = std::max(config.schedule.alpha_sigma(t).sigma, kSigmaFloor);
  const double alpha = config.schedule.alpha_sigma(t).alpha;
  for (std::size_t i = 0; i < p.x_hat.size(); ++i) {
    const double clamped = std::clamp(p.x_hat[i], config.support.lo[i], config.support.hi[i]);
    if (clamped == p.x_hat[i]) continue;
    // Keep z = alpha x_hat + sigma eps_hat for the clamped coordinate.
    p.x_hat[i] = clamped;
    p.eps_hat[i] = (z[i] - alpha * clamped) / sigma;
  }
  return p;
}

LatentState ddim_step(const Denoiser& model, const LatentState& state, int t_next, const SolverConfig& config,
                      const XHatObserver* observer) {
  if (t_next == state.t) return state;
  if (t_next > state.t) {
    throw OrderingError("DDIM step must move toward t = 0 (from " + std::to_string(state.t) + " to " +
                        std::to_string(t_next) + ")");
  }
  const Prediction p = solver_prediction(model, state.z, state.t, state.cond, config);
  if (observer) (*observer)(state.t, p.x_hat);
  const auto [alpha, sigma] = config.schedule.alpha_sigma(t_next);
  std::vector<double> z_next(state.z.size());
  for (std::size_t i = 0; i < z_next.size(); ++i) z_next[i] = alpha * p.x_hat[i] + sigma * p.eps_hat[i];
  return state.moved_to(std::move(z_next), t_next);
}

LatentState unroll_backward(const Denoiser& model, std::vector<double> z_init, int cond, const Discretization& grid,
                            int stop_at, const SolverConfig& config, Provenance provenance,
                            const XHatObserver* observer) {
  if (grid.timesteps.empty()) throw GridError("empty grid");
  if (stop_at != 0 && !grid.contains(stop_at)) {
    throw GridError("stop timestep " + std::to_string(stop_at) + " is not on the grid");
  }
  LatentState state(std::move(z_init), grid.timesteps.front(), cond, provenance);
  while (state.t != stop_at) state = ddim_step(model, state, grid.next(state.t), config, observer);
  return state;
}

std::vector<double> sample(const Denoiser& model, std::vector<double> z_init, int cond, const Discretization& grid,
                           const SolverConfig& config) {
  return unroll_backward(model, std::move(z_init), cond, grid, 0, config, Provenance::mixed).z;
}

void MixedRolloutConfig::validate() const {
  if (p_teacher.has_value() == switch_t.has_value()) {
    throw ConfigError("mixed rollout needs exactly one of p_teacher or switch_t");
  }
  if (p_teacher && !(*p_teacher >= 0.0 && *p_teacher <= 1.0)) throw ConfigError("p_teacher must lie in [0, 1]");
}

void check_alignment(const Discretization& teacher_grid, const Discretization& student_grid) {
  const auto& tt = teacher_grid.timesteps;
  const auto& st = student_grid.timesteps;
  if (st.empty() || tt.size() != 2 * st.size()) {
    throw ConfigError("teacher grid must have exactly twice as many points as the student grid");
  }
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (tt[2 * i] != st[i]) {
      throw ConfigError("student point " + std::to_string(st[i]) + " is not aligned with teacher point " +
                        std::to_string(tt[2 * i]));
    }
  }
}

Trajectory mixed_rollout(const RolloutPair& models, const MixedRolloutConfig& config, std::vector<double> z_init,
                         int cond, Rng& coin_rng, const XHatObserver* observer) {
  config.validate();
  check_alignment(models.teacher_grid, models.student_grid);
  const auto& st = models.student_grid.timesteps;
  const auto& tt = models.teacher_grid.timesteps;

  Trajectory traj;
  traj.states.emplace_back(std::move(z_init), st.front(), cond, Provenance::mixed);
  for (std::size_t b = 0; b < st.size(); ++b) {
    const int t_start = st[b];
    const int t_end = b + 1 < st.size() ? st[b + 1] : 0;
    BlockModel choice;
    if (config.p_teacher) {
      choice = uniform01(coin_rng) < *config.p_teacher ? BlockModel::teacher : BlockModel::student;
    } else {
      const bool before_switch = t_start > *config.switch_t;
      const bool teacher_first = config.order == SwitchOrder::teacher_then_student;
      choice = (before_switch == teacher_first) ? BlockModel::teacher : BlockModel::student;
    }
    const LatentState& current = traj.states.back();
    LatentState next = current;
    if (choice == BlockModel::teacher) {
      next = ddim_step(models.teacher, current, tt[2 * b + 1], models.teacher_config, observer);
      next = ddim_step(models.teacher, next, t_end, models.teacher_config, observer);
    } else {
      next = ddim_step(models.student, current, t_end, models.student_config, observer);
    }
    traj.states.push_back(std::move(next));
    traj.choices.push_back(choice);
  }
  return traj;
}

void write_trajectory_records(std::ostream& out, std::span<const LatentState> states) {
  for (const LatentState& s : states) {
    nlohmann::json record{{"t", s.t}, {"provenance", to_string(s.provenance())}, {"cond", s.cond}, {"z", s.z}};
    out << record.dump() << '\n';
  }
}

std::vector<LatentState> read_trajectory_records(std::istream& in) {
  std::vector<LatentState> states;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json record = nlohmann::json::parse(line);
      states.emplace_back(record.at("z").get<std::vector<double>>(), record.at("t").get<int>(),
                          record.at("cond").get<int>(),
                          parse_provenance(record.at("provenance").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad trajectory record on line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return states;
}

}  // namespace ddil
