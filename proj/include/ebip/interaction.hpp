#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ebip/filters.hpp"
#include "ebip/priors.hpp"

namespace ebip {

enum class FilterKind { bip, ebip, ebip_minus, pf };

std::string_view to_string(FilterKind kind);
FilterKind filter_kind_from_string(std::string_view text);

struct InteractionConfig {
  FilterKind filter = FilterKind::ebip;
  /// 0 picks a default: N for direct sampling, 80 for the mixture prior.
  int ensemble_size = 0;
  std::uint64_t seed = 0;
  TransitionModel transition{};
  /// Direct sampling with replacement (allows E > N).
  bool with_replacement = false;
  GmmOptions gmm{};
  double phase_variance = 1e-6;
  /// Ticks to emit when the stream is shorter: -1 means the nominal
  /// duration round(1 / mean(l)), 0 means stop with the stream.
  int horizon = -1;
};

struct TickEstimate {
  int tick = 0;
  bool updated = false;
  GaussianBelief belief;
  Eigen::VectorXd y_hat;
};

/// One live interaction: owns the filter state and the run's random stream.
/// Initialises from the trained model, then each step() predicts one tick
/// and, when the observation has any observed dimension, updates.
class InteractionSession {
 public:
  InteractionSession(const TrainedModel& trained, const InteractionConfig& config);

  /// Controlled DoFs are always treated as unobserved. nullptr or an
  /// all-false mask is a prediction-only tick.
  void step(const Observation* observation);

  int tick() const { return tick_; }
  const FilterState& state() const { return state_; }
  Eigen::VectorXd mean() const { return state_mean(state_); }
  TickEstimate estimate() const;
  /// h at the mean, extrapolated to `target_tick` along the mean phase velocity.
  Eigen::VectorXd forecast(int target_tick) const;

  int ensemble_size() const { return ensemble_size_; }
  bool prior_fell_back() const { return fell_back_; }
  int resample_count() const { return resamples_; }

 private:
  const TrainedModel& trained_;
  InteractionConfig config_;
  RandomSource rng_;
  FilterState state_;
  std::vector<bool> controlled_;
  int tick_ = 0;
  int ensemble_size_ = 0;
  bool last_updated_ = false;
  bool fell_back_ = false;
  int resamples_ = 0;
};

int nominal_duration(const DemonstrationCorpus& corpus);

/// Runs a whole stream (ticks strictly increasing, >= 1; gaps become
/// prediction-only ticks) and emits one estimate per tick.
void run_interaction(const TrainedModel& trained, const InteractionConfig& config,
                     std::span<const TimedObservation> stream,
                     const std::function<void(const TickEstimate&)>& sink);
std::vector<TickEstimate> run_interaction(const TrainedModel& trained,
                                          const InteractionConfig& config,
                                          std::span<const TimedObservation> stream);

/// Newline-delimited JSON: {"tick", "values": [D], "mask": [D]}.
std::vector<TimedObservation> read_observation_stream(std::istream& in, int dofs);
void write_observation(std::ostream& out, const TimedObservation& obs);
/// {"tick", "phase_mean", "phase_var", "y_hat": [D]}.
void write_tick_estimate(std::ostream& out, const TickEstimate& estimate);

}  // namespace ebip
