#include "ddil/diffusion.hpp"

#include <algorithm>
#include <string>

#include "ddil/error.hpp"

namespace ddil {

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::forward: return "forward";
    case Provenance::teacher_backward: return "teacher_backward";
    case Provenance::student_backward: return "student_backward";
    case Provenance::mixed: return "mixed";
  }
  return "unknown";
}

Provenance parse_provenance(std::string_view name) {
  if (name == "forward") return Provenance::forward;
  if (name == "teacher_backward") return Provenance::teacher_backward;
  if (name == "student_backward") return Provenance::student_backward;
  if (name == "mixed") return Provenance::mixed;
  throw DataError("unknown provenance '" + std::string(name) + "'");
}

SupportBox SupportBox::symmetric(int dim, double half_width) {
  return {std::vector<double>(static_cast<std::size_t>(dim), -half_width),
          std::vector<double>(static_cast<std::size_t>(dim), half_width)};
}

bool SupportBox::contains(std::span<const double> x) const {
  if (x.size() != lo.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
  }
  return true;
}

LatentState forward_diffuse(std::span<const double> x, int t, std::span<const double> eps,
                            const NoiseSchedule& schedule, int cond) {
  if (x.size() != eps.size()) throw ShapeError("data and noise differ in dimension");
  const auto [alpha, sigma] = schedule.alpha_sigma(t);
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = alpha * x[i] + sigma * eps[i];
  return LatentState(std::move(z), t, cond, Provenance::forward, std::vector<double>(eps.begin(), eps.end()));
}

std::vector<double> true_velocity(std::span<const double> x, std::span<const double> eps, int t,
                                  const NoiseSchedule& schedule) {
  if (x.size() != eps.size()) throw ShapeError("data and noise differ in dimension");
  const auto [alpha, sigma] = schedule.alpha_sigma(t);
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = alpha * eps[i] - sigma * x[i];
  return v;
}

Prediction to_prediction(std::span<const double> v_hat, std::span<const double> z, int t,
                         const NoiseSchedule& schedule) {
  if (v_hat.size() != z.size()) throw ShapeError("prediction and latent differ in dimension");
  const auto [alpha, sigma] = schedule.alpha_sigma(t);
  Prediction p{std::vector<double>(v_hat.begin(), v_hat.end()), std::vector<double>(z.size()),
               std::vector<double>(z.size())};
  for (std::size_t i = 0; i < z.size(); ++i) {
    p.x_hat[i] = alpha * z[i] - sigma * v_hat[i];
    p.eps_hat[i] = sigma * z[i] + alpha * v_hat[i];
  }
  return p;
}

void threshold(std::span<double> x, const SupportBox& support) {
  if (x.size() != support.lo.size()) throw ShapeError("support box dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], support.lo[i], support.hi[i]);
}

std::vector<double> thresholded(std::span<const double> x, const SupportBox& support) {
  std::vector<double> out(x.begin(), x.end());
  threshold(out, support);
  return out;
}

double teacher_loss(const Mlp& model, std::span<const TeacherSample> batch, const NoiseSchedule& schedule,
                    std::span<double> grad) {
  if (batch.empty()) throw ShapeError("empty teacher batch");
  const std::size_t dim = static_cast<std::size_t>(model.data_dim());
  std::vector<double> z, target;
  std::vector<int> ts, conds;
  z.reserve(batch.size() * dim);
  target.reserve(batch.size() * dim);
  for (const TeacherSample& s : batch) {
    const LatentState state = forward_diffuse(s.x, s.t, s.eps, schedule, s.cond);
    z.insert(z.end(), state.z.begin(), state.z.end());
    const std::vector<double> v = true_velocity(s.x, s.eps, s.t, schedule);
    target.insert(target.end(), v.begin(), v.end());
    ts.push_back(s.t);
    conds.push_back(s.cond);
  }
  const TrainingBatch tb{std::move(z), std::move(ts), std::move(conds), std::move(target)};
  if (grad.empty()) {
    double total = 0.0;
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < tb.size(); ++i) {
      model.predict(std::span<const double>(tb.z).subspan(i * dim, dim), tb.t[i], tb.cond[i], out);
      for (std::size_t d = 0; d < dim; ++d) {
        const double r = out[d] - tb.target[i * dim + d];
        total += r * r;
      }
    }
    return total / static_cast<double>(tb.size());
  }
  LossAndGradient lg = weighted_mse_gradient(model, tb);
  if (grad.size() != lg.grad.size()) throw ShapeError("gradient buffer has wrong size");
  std::copy(lg.grad.begin(), lg.grad.end(), grad.begin());
  return lg.loss;
}

}  // namespace ddil
