#pragma once

#include <span>

namespace ddil {

// Condition value selecting the unconditional (null-class) branch.
inline constexpr int kNullClass = -1;

// Anything that predicts v = alpha_t * eps - sigma_t * x from (z_t, t, cond).
// Implementations must be pure: predict() is const and mutates no state, so
// one model may be evaluated from many threads at once.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual int data_dim() const = 0;
  // True when the model accepts kNullClass, enabling classifier-free guidance.
  virtual bool has_null_class() const = 0;
  virtual void predict(std::span<const double> z, int t, int cond, std::span<double> v_out) const = 0;
};

}  // namespace ddil
