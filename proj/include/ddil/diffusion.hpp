#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ddil/denoiser.hpp"
#include "ddil/net.hpp"
#include "ddil/schedule.hpp"

namespace ddil {

enum class Provenance { forward, teacher_backward, student_backward, mixed };

std::string_view to_string(Provenance provenance);
Provenance parse_provenance(std::string_view name);

// A noisy latent z_t together with where it came from. The provenance is
// fixed when the state is created.
class LatentState {
 public:
  LatentState(std::vector<double> z, int t, int cond, Provenance provenance,
              std::optional<std::vector<double>> eps = std::nullopt)
      : z(std::move(z)), t(t), cond(cond), eps(std::move(eps)), provenance_(provenance) {}

  // Same provenance and condition, new position.
  LatentState moved_to(std::vector<double> z_next, int t_next) const {
    return LatentState(std::move(z_next), t_next, cond, provenance_);
  }
  LatentState retagged(Provenance provenance) const { return LatentState(z, t, cond, provenance, eps); }

  Provenance provenance() const { return provenance_; }

  std::vector<double> z;
  int t;
  int cond;
  std::optional<std::vector<double>> eps;

 private:
  Provenance provenance_;
};

// The three mutually consistent views of one v-prediction.
struct Prediction {
  std::vector<double> v_hat;
  std::vector<double> x_hat;
  std::vector<double> eps_hat;
};

// Axis-aligned data support used by thresholding.
struct SupportBox {
  std::vector<double> lo;
  std::vector<double> hi;

  static SupportBox symmetric(int dim, double half_width = 1.0);
  bool contains(std::span<const double> x) const;
};

// z = alpha_t x + sigma_t eps, tagged forward with eps recorded.
LatentState forward_diffuse(std::span<const double> x, int t, std::span<const double> eps,
                            const NoiseSchedule& schedule, int cond = kNullClass);

// v = alpha_t eps - sigma_t x.
std::vector<double> true_velocity(std::span<const double> x, std::span<const double> eps, int t,
                                  const NoiseSchedule& schedule);

// x_hat = alpha_t z - sigma_t v_hat and eps_hat = sigma_t z + alpha_t v_hat,
// which satisfy z = alpha_t x_hat + sigma_t eps_hat.
Prediction to_prediction(std::span<const double> v_hat, std::span<const double> z, int t,
                         const NoiseSchedule& schedule);

// Clamps into the support box in place; idempotent.
void threshold(std::span<double> x, const SupportBox& support);
std::vector<double> thresholded(std::span<const double> x, const SupportBox& support);

// Teacher pretraining sample: clean point, timestep, noise, condition.
struct TeacherSample {
  std::vector<double> x;
  int t;
  std::vector<double> eps;
  int cond;
};

// Mean over the batch of ||f(z_t, t, cond) - v||^2 with v the true velocity.
// grad (may be empty) receives the mean gradient.
double teacher_loss(const Mlp& model, std::span<const TeacherSample> batch, const NoiseSchedule& schedule,
                    std::span<double> grad);

}  // namespace ddil
