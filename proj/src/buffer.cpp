#include "ddil/buffer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddil/error.hpp"

namespace ddil {

void SamplingPriors::validate() const {
  for (const double p : {forward, teacher_backward, student_backward}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sampling prior " + std::to_string(p) + " outside [0, 1]");
  }
  const double sum = forward + teacher_backward + student_backward;
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("sampling priors sum to " + std::to_string(sum) + ", not 1");
}

Provenance sample_mode(const SamplingPriors& priors, double u) {
  if (u < priors.forward) return Provenance::forward;
  if (u < priors.forward + priors.teacher_backward) return Provenance::teacher_backward;
  return Provenance::student_backward;
}

PriorSchedule::PriorSchedule(std::vector<PriorPhase> phases) : phases_(std::move(phases)) {
  if (phases_.empty()) throw ConfigError("prior schedule needs at least one phase");
  std::uint64_t expected = 0;
  for (const PriorPhase& phase : phases_) {
    if (phase.begin != expected) throw ConfigError("prior schedule phases must be contiguous from step 0");
    if (phase.end <= phase.begin) throw ConfigError("prior schedule phase is empty");
    phase.priors.validate();
    expected = phase.end;
  }
}

PriorSchedule PriorSchedule::constant(const SamplingPriors& priors, std::uint64_t steps) {
  return PriorSchedule({{0, std::max<std::uint64_t>(steps, 1), priors}});
}

PriorSchedule PriorSchedule::two_part(const SamplingPriors& first, const SamplingPriors& second, std::uint64_t split,
                                      std::uint64_t steps) {
  if (split == 0 || split >= steps) return constant(split == 0 ? second : first, steps);
  return PriorSchedule({{0, split, first}, {split, steps, second}});
}

const SamplingPriors& PriorSchedule::at(std::uint64_t step) const {
  for (const PriorPhase& phase : phases_) {
    if (step < phase.end) return phase.priors;
  }
  return phases_.back().priors;
}

bool PriorSchedule::uses_backward() const {
  return std::any_of(phases_.begin(), phases_.end(), [](const PriorPhase& p) { return p.priors.backward_mass() > 0.0; });
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
  ring_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mutex_);
  return ring_.size();
}

std::uint64_t ReplayBuffer::total_inserted() const {
  std::lock_guard lock(mutex_);
  return inserted_;
}

void ReplayBuffer::push_locked(const LatentState& record) {
  if (record.provenance() == Provenance::forward) return;
  if (ring_.size() < capacity_) {
    ring_.push_back(record);
  } else {
    ring_[oldest_] = record;
    oldest_ = (oldest_ + 1) % capacity_;
  }
  ++inserted_;
}

void ReplayBuffer::push(const LatentState& record) {
  std::lock_guard lock(mutex_);
  push_locked(record);
}

void ReplayBuffer::push_trajectory(std::span<const LatentState> records) {
  std::lock_guard lock(mutex_);
  for (const LatentState& r : records) push_locked(r);
}

std::vector<LatentState> ReplayBuffer::snapshot() const {
  std::lock_guard lock(mutex_);
  std::vector<LatentState> out;
  out.reserve(ring_.size());
  for (std::size_t i = 0; i < ring_.size(); ++i) out.push_back(ring_[(oldest_ + i) % ring_.size()]);
  return out;
}

std::optional<LatentState> ReplayBuffer::sample(Rng& rng, std::span<const Provenance> accept) const {
  std::lock_guard lock(mutex_);
  auto matches = [&](const LatentState& r) {
    return std::find(accept.begin(), accept.end(), r.provenance()) != accept.end();
  };
  const auto count = static_cast<std::size_t>(std::count_if(ring_.begin(), ring_.end(), matches));
  if (count == 0) return std::nullopt;
  std::size_t pick = uniform_index(rng, count);
  for (std::size_t i = 0; i < ring_.size(); ++i) {
    const LatentState& r = ring_[(oldest_ + i) % ring_.size()];
    if (matches(r) && pick-- == 0) return r;
  }
  return std::nullopt;
}

void ReplayBuffer::dump(std::ostream& out) const {
  const std::vector<LatentState> records = snapshot();
  write_trajectory_records(out, records);
}

void ReplayBuffer::restore(std::istream& in) {
  const std::vector<LatentState> records = read_trajectory_records(in);
  push_trajectory(records);
}

namespace {

std::vector<double> gaussian(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = standard_normal(rng);
  return v;
}

}  // namespace

LatentState next_training_latent(Provenance mode, const LatentSources& sources, int target_t, Rng& rng) {
  const LabeledPoints& data = sources.dataset;
  if (data.empty()) throw DataError("training dataset is empty");
  const std::size_t index = uniform_index(rng, data.size());
  const int cond = data.label(index);

  switch (mode) {
    case Provenance::forward: {
      const std::vector<double> eps = gaussian(rng, data.dim);
      return forward_diffuse(data.point(index), target_t, eps, sources.schedule, cond);
    }
    case Provenance::teacher_backward:
    case Provenance::student_backward: {
      const bool teacher = mode == Provenance::teacher_backward;
      if (sources.buffer && sources.buffer->size() >= sources.min_fill) {
        const Provenance accept[] = {mode, Provenance::mixed};
        if (auto record = sources.buffer->sample(rng, accept)) return *std::move(record);
      }
      std::vector<double> z = gaussian(rng, data.dim);
      if (teacher) {
        return unroll_backward(sources.teacher, std::move(z), cond, sources.teacher_grid, target_t,
                               sources.teacher_config, Provenance::teacher_backward);
      }
      return unroll_backward(sources.student, std::move(z), cond, sources.student_grid, target_t,
                             sources.student_config, Provenance::student_backward);
    }
    case Provenance::mixed: break;
  }
  throw ConfigError("mixed is not a sampling mode");
}

}  // namespace ddil
