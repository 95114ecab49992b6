#include "ddil/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ddil/error.hpp"

namespace ddil {

namespace {
constexpr double kCosineOffset = 0.008;
constexpr double kBetaMin = 0.1;
constexpr double kBetaMax = 20.0;
}  // namespace

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::linear_vp: return "linear_vp";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "cosine") return ScheduleKind::cosine;
  if (name == "linear_vp") return ScheduleKind::linear_vp;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, int t_max) : kind_(kind), t_max_(t_max) {
  if (t_max <= 1) throw ConfigError("schedule t_max must be > 1");
}

double NoiseSchedule::alpha_bar(double t) const {
  const double u = t / t_max_;
  double abar = 1.0;
  switch (kind_) {
    case ScheduleKind::cosine: {
      auto f = [](double x) {
        const double c = std::cos((x + kCosineOffset) / (1.0 + kCosineOffset) * std::numbers::pi / 2.0);
        return c * c;
      };
      abar = f(u) / f(0.0);
      break;
    }
    case ScheduleKind::linear_vp:
      abar = std::exp(-(kBetaMin * u + 0.5 * (kBetaMax - kBetaMin) * u * u));
      break;
  }
  return std::clamp(abar, 0.0, 1.0);
}

AlphaSigma NoiseSchedule::alpha_sigma(double t) const {
  if (!(t >= 0.0 && t <= t_max_)) {
    throw DomainError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(t_max_) + "]");
  }
  if (t == 0.0) return {1.0, 0.0};
  const double abar = alpha_bar(t);
  return {std::sqrt(abar), std::sqrt(1.0 - abar)};
}

double NoiseSchedule::snr(double t) const {
  const auto [alpha, sigma] = alpha_sigma(t);
  if (sigma == 0.0) return std::numeric_limits<double>::infinity();
  return (alpha * alpha) / (sigma * sigma);
}

bool Discretization::contains(int t) const {
  return std::find(timesteps.begin(), timesteps.end(), t) != timesteps.end();
}

std::size_t Discretization::index_of(int t) const {
  const auto it = std::find(timesteps.begin(), timesteps.end(), t);
  if (it == timesteps.end()) throw GridError("timestep " + std::to_string(t) + " is not on the grid");
  return static_cast<std::size_t>(it - timesteps.begin());
}

int Discretization::next(int t) const {
  const std::size_t i = index_of(t);
  return i + 1 < timesteps.size() ? timesteps[i + 1] : 0;
}

int Discretization::previous_below(int t) const {
  for (const int s : timesteps) {
    if (s < t) return s;
  }
  return 0;
}

Discretization make_grid(int n_steps, int t_max, GridPolicy policy) {
  if (n_steps <= 0) throw ConfigError("grid needs a positive number of steps");
  if (t_max <= 1) throw ConfigError("grid t_max must be > 1");
  if (policy == GridPolicy::exact && t_max % n_steps != 0) {
    throw ConfigError("grid with " + std::to_string(n_steps) + " steps does not divide t_max " + std::to_string(t_max));
  }
  Discretization grid;
  grid.t_max = t_max;
  const double spacing = static_cast<double>(t_max - 1) / n_steps;
  for (int j = n_steps; j >= 1; --j) {
    const int t = static_cast<int>(std::nearbyint(j * spacing));
    if (t <= 0) break;
    if (grid.timesteps.empty() || grid.timesteps.back() != t) grid.timesteps.push_back(t);
  }
  grid.n_steps = static_cast<int>(grid.timesteps.size());
  return grid;
}

}  // namespace ddil
