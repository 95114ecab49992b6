#pragma once

#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "ddil/diffusion.hpp"
#include "ddil/points.hpp"
#include "ddil/rng.hpp"
#include "ddil/solver.hpp"

namespace ddil {

// Mixture weights over the three sources of training latents. Stored as a
// probability simplex; sample_mode compares a uniform draw to cumulative sums.
struct SamplingPriors {
  double forward = 1.0;
  double teacher_backward = 0.0;
  double student_backward = 0.0;

  // Throws ConfigError unless each weight is in [0, 1] and they sum to 1 (1e-9).
  void validate() const;
  double backward_mass() const { return teacher_backward + student_backward; }
  bool operator==(const SamplingPriors&) const = default;
};

namespace priors {
// Forward diffusion only: plain progressive / consistency distillation.
inline constexpr SamplingPriors kForwardOnly{1.0, 0.0, 0.0};
// Progressive distillation, first part of a stage (student chosen 15% of
// the time inside the 25% of mixed rollouts).
inline constexpr SamplingPriors kPdPart1{0.75, 0.2125, 0.0375};
// Progressive distillation, second part (student chosen 80% inside 50%).
inline constexpr SamplingPriors kPdPart2{0.5, 0.10, 0.40};
// Consistency distillation: forward and student rollouts, no teacher rollouts.
inline constexpr SamplingPriors kLcm{0.5, 0.0, 0.5};
// Distribution-matching setting; kept for reference, no DMD loss is implemented.
inline constexpr SamplingPriors kDmd2{0.0, 0.6, 0.4};
}  // namespace priors

// forward if u < b_f, teacher_backward if u < b_f + b_t, else student_backward.
Provenance sample_mode(const SamplingPriors& priors, double u);

struct PriorPhase {
  std::uint64_t begin;  // first training step, inclusive
  std::uint64_t end;    // exclusive
  SamplingPriors priors;
};

// Piecewise-constant priors over the steps of a stage.
class PriorSchedule {
 public:
  // Phases must be contiguous from step 0 and non-empty; each prior is validated.
  explicit PriorSchedule(std::vector<PriorPhase> phases);

  static PriorSchedule constant(const SamplingPriors& priors, std::uint64_t steps);
  // first for [0, split), second for [split, steps).
  static PriorSchedule two_part(const SamplingPriors& first, const SamplingPriors& second, std::uint64_t split,
                                std::uint64_t steps);

  // Priors in force at a step; steps past the end use the last phase.
  const SamplingPriors& at(std::uint64_t step) const;
  std::uint64_t total_steps() const { return phases_.back().end; }
  std::span<const PriorPhase> phases() const { return phases_; }
  bool uses_backward() const;

 private:
  std::vector<PriorPhase> phases_;
};

// Bounded FIFO store of backward-trajectory latents. Appends are serialized
// under a mutex and get a total insertion order; readers see consistent snapshots.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  ReplayBuffer(const ReplayBuffer&) = delete;
  ReplayBuffer& operator=(const ReplayBuffer&) = delete;

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const;
  std::uint64_t total_inserted() const;

  // Appends every record except forward ones; the oldest records are evicted
  // once the buffer is full.
  void push_trajectory(std::span<const LatentState> records);
  void push(const LatentState& record);

  // Records oldest first.
  std::vector<LatentState> snapshot() const;

  // Uniform draw among records whose provenance is in `accept`; nullopt when none match.
  std::optional<LatentState> sample(Rng& rng, std::span<const Provenance> accept) const;

  // Same record format as trajectory dumps.
  void dump(std::ostream& out) const;
  void restore(std::istream& in);

 private:
  void push_locked(const LatentState& record);

  mutable std::mutex mutex_;
  std::size_t capacity_;
  std::vector<LatentState> ring_;
  std::size_t oldest_ = 0;
  std::uint64_t inserted_ = 0;
};

// Everything next_training_latent may draw from.
struct LatentSources {
  const NoiseSchedule& schedule;
  const LabeledPoints& dataset;
  const Denoiser& teacher;
  const SolverConfig& teacher_config;
  const Discretization& teacher_grid;
  const Denoiser& student;
  const SolverConfig& student_config;
  const Discretization& student_grid;
  const ReplayBuffer* buffer = nullptr;
  // The buffered path is used once the buffer holds at least this many records.
  std::size_t min_fill = 1;
};

// Produces one training latent for the given mode:
//   forward          -> fresh forward diffusion of a dataset point at target_t
//   teacher_backward -> buffered teacher/mixed record, else a fresh teacher unroll to target_t
//   student_backward -> buffered student/mixed record, else a fresh student unroll to target_t
// Throws DataError on an empty dataset.
LatentState next_training_latent(Provenance mode, const LatentSources& sources, int target_t, Rng& rng);

}  // namespace ddil
