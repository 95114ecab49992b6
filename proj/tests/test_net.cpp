#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "ddil/error.hpp"
#include "ddil/net.hpp"
#include "ddil/rng.hpp"
#include "support/gradcheck.hpp"

using namespace ddil;
using namespace ddil::testing;

namespace {

MlpSpec small_spec() {
  MlpSpec spec;
  spec.data_dim = 2;
  spec.time_embed_dim = 8;
  spec.cond_classes = 3;
  spec.hidden = {12, 10};
  return spec;
}

}  // namespace

TEST_CASE("parameter layout and count") {
  const MlpSpec spec = small_spec();
  const Mlp m(spec, ModelRole::teacher, 3);
  CHECK(spec.input_dim() == 2 + 8 + 4);
  CHECK(m.param_count() == 14 * 12 + 12 + 12 * 10 + 10 + 10 * 2 + 2);
  std::size_t total = 0;
  for (const auto& r : layer_types(spec)) total += r.indices.size();
  CHECK(total == m.param_count());
}

TEST_CASE("zero-initialized output layer predicts zero") {
  MlpSpec spec = small_spec();
  spec.zero_init_output = true;
  const Mlp m(spec, ModelRole::student, 11);
  std::vector<double> v(2, 1.0);
  for (int t : {0, 1, 500, 1000}) {
    m.predict(std::vector<double>{0.3, -2.0}, t, kNullClass, v);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
  }
}

TEST_CASE("forward is deterministic and pure") {
  const Mlp a(small_spec(), ModelRole::teacher, 5), b(small_spec(), ModelRole::teacher, 5);
  const std::vector<double> z{0.1, 0.7};
  std::vector<double> va(2), vb(2), vc(2);
  a.predict(z, 321, 2, va);
  b.predict(z, 321, 2, vb);
  a.predict(z, 321, 2, vc);
  CHECK(va == vb);
  CHECK(va == vc);
  const Mlp c(small_spec(), ModelRole::teacher, 6);
  c.predict(z, 321, 2, vc);
  CHECK(va != vc);
}

TEST_CASE("shape and domain errors") {
  const Mlp m(small_spec(), ModelRole::teacher, 1);
  std::vector<double> v(2);
  CHECK_THROWS_AS(m.predict(std::vector<double>{1.0}, 10, 0, v), ShapeError);
  CHECK_THROWS_AS(m.predict(std::vector<double>{1.0, 2.0}, 10, 3, v), ShapeError);
  CHECK_THROWS_AS(m.predict(std::vector<double>{1.0, 2.0}, 1001, 0, v), DomainError);
  std::vector<double> wrong(3);
  CHECK_THROWS_AS(m.predict(std::vector<double>{1.0, 2.0}, 10, 0, wrong), ShapeError);
  MlpSpec odd = small_spec();
  odd.time_embed_dim = 7;
  CHECK_THROWS_AS(Mlp(odd, ModelRole::teacher, 0), ConfigError);
}

TEST_CASE("time embedding frequencies span 1 down to 1 / t_max") {
  std::vector<double> e(8);
  time_embedding(3.0, 1000, e);
  CHECK(e[0] == doctest::Approx(std::sin(3.0)));
  CHECK(e[4] == doctest::Approx(std::cos(3.0)));
  CHECK(e[3] == doctest::Approx(std::sin(3.0 / 1000.0)));
  CHECK(e[7] == doctest::Approx(std::cos(3.0 / 1000.0)));
}

TEST_CASE("analytic gradients match central finite differences") {
  const MlpSpec spec = small_spec();
  Mlp model(spec, ModelRole::student, 21);
  Rng rng(99);
  const TrainingBatch batch = random_batch(rng, 6, spec.cond_classes);
  const std::vector<double> weights{1.0, 0.5, 2.0, 1.5, 0.25, 3.0};
  for (const ParamRange& range : layer_types(spec)) {
    CAPTURE(range.name);
    const GradCheck check = finite_difference_check(model, batch, weights, range, rng);
    REQUIRE(check.checked >= 20);
    CHECK(check.worst < 1e-4);
  }
}

TEST_CASE("one-layer model matches the hand-derived gradient") {
  MlpSpec spec;
  spec.data_dim = 1;
  spec.time_embed_dim = 0;
  spec.cond_classes = 0;
  spec.hidden = {};
  Mlp model(spec, ModelRole::student, 0);
  REQUIRE(model.param_count() == 2);
  model.params()[0] = 0.7;   // w
  model.params()[1] = -0.2;  // b
  TrainingBatch batch;
  batch.z = {1.5, -0.5};
  batch.t = {10, 20};
  batch.cond = {kNullClass, kNullClass};
  batch.target = {0.3, 0.9};
  const LossAndGradient lg = weighted_mse_gradient(model, batch);
  // L = mean_i (w z_i + b - y_i)^2
  const double r0 = 0.7 * 1.5 - 0.2 - 0.3, r1 = 0.7 * -0.5 - 0.2 - 0.9;
  CHECK(lg.loss == doctest::Approx((r0 * r0 + r1 * r1) / 2.0).epsilon(1e-14));
  CHECK(lg.grad[0] == doctest::Approx((2 * r0 * 1.5 + 2 * r1 * -0.5) / 2.0).epsilon(1e-14));
  CHECK(lg.grad[1] == doctest::Approx((2 * r0 + 2 * r1) / 2.0).epsilon(1e-14));
}

TEST_CASE("gradient vanishes when the target equals the output") {
  const Mlp model(small_spec(), ModelRole::student, 8);
  Rng rng(4);
  TrainingBatch batch = random_batch(rng, 5, 3);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    model.predict(std::span<const double>(batch.z).subspan(2 * i, 2), batch.t[i], batch.cond[i],
                  std::span<double>(batch.target).subspan(2 * i, 2));
  }
  const LossAndGradient lg = weighted_mse_gradient(model, batch);
  CHECK(lg.loss == 0.0);
  CHECK(l2_norm(lg.grad) == 0.0);
}

TEST_CASE("non-finite values name the batch index") {
  const Mlp model(small_spec(), ModelRole::student, 8);
  Rng rng(4);
  TrainingBatch batch = random_batch(rng, 4, 3);
  batch.z[2 * 2] = std::nan("");
  try {
    weighted_mse_gradient(model, batch);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("batch index 2") != std::string::npos);
  }
  CHECK_THROWS_AS(weighted_mse_gradient(model, TrainingBatch{}), ShapeError);
}

TEST_CASE("AdamW matches an independent simulation of the recursion") {
  const AdamWConfig cfg{0.01, 0.9, 0.999, 1e-8, 0.1, 0, 0};
  AdamW opt(cfg, 3);
  std::vector<double> params{1.0, -2.0, 0.5};
  std::vector<double> ref = params;
  double m[3] = {0, 0, 0}, v[3] = {0, 0, 0};
  const double g[3] = {0.3, -1.2, 4.0};
  for (int step = 1; step <= 200; ++step) {
    opt.step(params, g);
    for (int i = 0; i < 3; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, step)), vh = v[i] / (1 - std::pow(0.999, step));
      ref[i] -= 0.01 * (mh / (std::sqrt(vh) + 1e-8) + 0.1 * ref[i]);
    }
  }
  for (int i = 0; i < 3; ++i) CHECK(params[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  CHECK(opt.step_count() == 200);
}

TEST_CASE("AdamW with a constant gradient moves by about lr against its sign") {
  AdamW opt({0.001, 0.9, 0.999, 1e-8, 0.0, 0, 0}, 2);
  std::vector<double> p{0.0, 0.0};
  const std::vector<double> g{5.0, -0.01};
  for (int i = 0; i < 500; ++i) opt.step(p, g);
  const std::vector<double> before = p;
  opt.step(p, g);
  CHECK(p[0] - before[0] == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK(p[1] - before[1] == doctest::Approx(0.001).epsilon(1e-4));
}

TEST_CASE("AdamW degenerate steps leave parameters unchanged") {
  std::vector<double> p{0.4, -0.4};
  const std::vector<double> zero{0.0, 0.0}, g{1.0, 1.0};
  AdamW no_grad({0.1, 0.9, 0.999, 1e-8, 0.0, 0, 0}, 2);
  no_grad.step(p, zero);
  CHECK(p == std::vector<double>{0.4, -0.4});
  AdamW warm({0.1, 0.9, 0.999, 1e-8, 0.0, 10, 100}, 2);
  CHECK(warm.lr_at(0) == 0.0);
  warm.step(p, g);
  CHECK(p == std::vector<double>{0.4, -0.4});
  CHECK_THROWS_AS(warm.step(p, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("learning rate warms up linearly then decays linearly to zero") {
  const AdamW opt({1.0, 0.9, 0.999, 1e-8, 0.0, 10, 110}, 1);
  CHECK(opt.lr_at(5) == doctest::Approx(0.5));
  CHECK(opt.lr_at(10) == doctest::Approx(1.0));
  CHECK(opt.lr_at(60) == doctest::Approx(0.5));
  CHECK(opt.lr_at(110) == 0.0);
  CHECK(opt.lr_at(500) == 0.0);
  const AdamW flat({0.3, 0.9, 0.999, 1e-8, 0.0, 0, 0}, 1);
  CHECK(flat.lr_at(12345) == 0.3);
}

TEST_CASE("EMA update") {
  Mlp online(small_spec(), ModelRole::student, 1);
  Mlp ema(small_spec(), ModelRole::ema, 2);

  Mlp copy = ema;
  ema_update(copy, online, 0.0);
  CHECK(std::equal(copy.params().begin(), copy.params().end(), online.params().begin()));

  // Gap 1.0 shrinks by the decay every step: 0.99^100.
  for (double& p : online.params()) p = 1.0;
  for (double& p : ema.params()) p = 0.0;
  for (int i = 0; i < 100; ++i) ema_update(ema, online, 0.99);
  CHECK(1.0 - ema.params()[0] == doctest::Approx(std::pow(0.99, 100)).epsilon(1e-12));
  CHECK(1.0 - ema.params()[0] == doctest::Approx(0.366).epsilon(1e-3));

  CHECK_THROWS_AS(ema_update(ema, online, 1.0), DomainError);
  CHECK_THROWS_AS(ema_update(ema, online, -0.1), DomainError);
  MlpSpec other = small_spec();
  other.hidden = {4};
  Mlp different(other, ModelRole::student, 0);
  CHECK_THROWS_AS(ema_update(ema, different, 0.5), ShapeError);
}

TEST_CASE("identical seeds give identical training trajectories") {
  auto run = [] {
    Mlp m(small_spec(), ModelRole::student, 17);
    AdamW opt({0.01, 0.9, 0.999, 1e-8, 0.01, 2, 20}, m.param_count());
    Rng rng(5);
    for (int s = 0; s < 20; ++s) {
      const TrainingBatch b = random_batch(rng, 8, 3);
      opt.step(m.params(), weighted_mse_gradient(m, b).grad);
    }
    return std::vector<double>(m.params().begin(), m.params().end());
  };
  CHECK(run() == run());
}
