#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ddil {

enum class ScheduleKind { cosine, linear_vp };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

struct AlphaSigma {
  double alpha;
  double sigma;
};

// Lower bound applied to sigma wherever it appears as a divisor.
inline constexpr double kSigmaFloor = 1e-6;

// Variance-preserving noise schedule: alpha(t)^2 + sigma(t)^2 = 1 on
// [0, t_max], alpha(0) = 1 exactly, alpha non-increasing in t.
//
// cosine:    abar(t) = f(t) / f(0), f(t) = cos^2((t / t_max + s) / (1 + s) * pi / 2), s = 0.008
// linear_vp: abar(t) = exp(-(b0 * u + (b1 - b0) * u^2 / 2)), u = t / t_max, b0 = 0.1, b1 = 20
class NoiseSchedule {
 public:
  NoiseSchedule() : NoiseSchedule(ScheduleKind::cosine, 1000) {}
  explicit NoiseSchedule(ScheduleKind kind, int t_max = 1000);

  ScheduleKind kind() const { return kind_; }
  int t_max() const { return t_max_; }

  // Throws DomainError for t outside [0, t_max].
  AlphaSigma alpha_sigma(double t) const;

  // alpha^2 / sigma^2; +infinity at sigma = 0 (t = 0).
  double snr(double t) const;

  bool operator==(const NoiseSchedule&) const = default;

 private:
  double alpha_bar(double t) const;

  ScheduleKind kind_;
  int t_max_;
};

enum class GridPolicy {
  // n must divide t_max; required for distillation so that every student
  // grid point is a teacher grid point.
  exact,
  // Any n; points are rounded and deduplicated. Only for plain sampling.
  rounded,
};

// Descending timesteps round(j * (t_max - 1) / n) for j = n..1 (round half to
// even), so the first point is t_max - 1 and 4 steps give {999, 749, 500, 250}.
// After the last point a sampler steps to t = 0.
struct Discretization {
  int n_steps = 0;
  int t_max = 0;
  std::vector<int> timesteps;

  // Nominal spacing t_max / n_steps.
  double step() const { return static_cast<double>(t_max) / n_steps; }
  bool contains(int t) const;
  // Index of t in timesteps; throws GridError when absent.
  std::size_t index_of(int t) const;
  // Next point toward 0 after t (0 after the last point). Throws GridError.
  int next(int t) const;
  // Largest grid point strictly below t, or 0 when none.
  int previous_below(int t) const;

  bool operator==(const Discretization&) const = default;
};

Discretization make_grid(int n_steps, int t_max = 1000, GridPolicy policy = GridPolicy::exact);

}  // namespace ddil
