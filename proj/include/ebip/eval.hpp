#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ebip/interaction.hpp"
#include "ebip/sim.hpp"

namespace ebip {

/// One held-out replay: the truncated, masked observation stream plus the
/// ground truth it is scored against.
struct EvalCase {
  const Demonstration* truth = nullptr;
  std::vector<TimedObservation> stream;
  int terminal_tick = 0;  // ground-truth final tick
  double fraction = 0.0;
  const std::vector<std::string>* subset = nullptr;
};

struct FoldContext {
  const TrainedModel* trained = nullptr;
  int fold = 0;
  int train_size = 0;
  std::uint64_t seed = 0;  // per (fold, demo), shared across methods
};

/// Per-prediction bookkeeping a method may fill in.
struct MethodTrace {
  std::vector<double> tick_seconds;
  int ensemble_size = 0;
};

/// Produces the full D-vector predicted at the terminal tick.
struct EvalMethod {
  std::string name;
  std::function<Eigen::VectorXd(const FoldContext&, const EvalCase&, MethodTrace&)> predict;
};

/// Runs the stream through an InteractionSession and forecasts to the
/// terminal tick. A direct-sampled ensemble is capped at the fold's
/// training size.
EvalMethod filter_method(FilterKind kind, InteractionConfig base = {});
/// Harness self-test: returns the ground truth.
EvalMethod perfect_method();

struct EvalOptions {
  /// Modality sets to leave observable; an empty set means every observed modality.
  std::vector<std::vector<std::string>> subsets{{}};
  std::vector<double> fractions{0.43, 0.82};
  int folds = 10;
  std::uint64_t seed = 0;
  std::vector<OcclusionWindow> occlusions;
  /// Modality scored by mean absolute error.
  std::string target_modality = "ball";
  /// Leading controlled DoFs scored by mean squared error.
  int scored_joints = 3;
  double ridge = kDefaultRidge;
  /// Worker threads; 0 uses the hardware concurrency.
  int threads = 0;
};

struct CellResult {
  std::string method;
  std::vector<std::string> subset;
  double fraction = 0.0;
  int ensemble_size = 0;
  /// Per held-out demo, in corpus order. NaN marks a numerical failure.
  std::vector<double> joint_mse;
  std::vector<double> target_mae;
  std::vector<double> fold_joint_mse;
  std::vector<double> fold_target_mae;
  double joint_mean = 0.0;
  double joint_se = 0.0;
  double target_mean = 0.0;
  double target_se = 0.0;
  int failures = 0;
  std::vector<std::string> failure_codes;
  /// Wall time of every tick; excluded from the deterministic report.
  std::vector<double> tick_seconds;
};

struct InferenceReport {
  int demos = 0;
  int folds = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold_sizes;
  std::string target_modality;
  int scored_joints = 0;
  std::vector<CellResult> cells;

  const CellResult& cell(const std::string& method, const std::vector<std::string>& subset,
                         double fraction) const;
};

/// Contiguous folds over a seeded shuffle; sizes differ by at most one.
std::vector<std::vector<int>> make_folds(int n, int k, std::uint64_t seed);

/// Largest direct ensemble available when training on k-1 of k folds.
int ensemble_cap(int n, int k);

InferenceReport kfold_evaluate(const std::vector<Demonstration>& demos, const BasisModel& model,
                               const std::vector<EvalMethod>& methods,
                               const EvalOptions& options);

/// Deterministic part of a report (no timings).
nlohmann::json report_to_json(const InferenceReport& report);
/// Latency distribution per cell.
nlohmann::json report_timing_json(const InferenceReport& report);
/// Method x subset rows, one column pair per fraction.
void write_report_table(std::ostream& out, const InferenceReport& report);

struct CurvePoint {
  int ensemble_size = 0;
  double joint_mse = 0.0;
  double target_mae = 0.0;
  double median_tick_seconds = 0.0;
  bool highlighted = false;  // the default ensemble size
};

inline constexpr int kDefaultEnsembleSize = 80;

/// eBIP (or eBIP-minus) error and latency across ensemble sizes.
std::vector<CurvePoint> accuracy_vs_ensemble(const std::vector<Demonstration>& demos,
                                             const BasisModel& model,
                                             const std::vector<int>& ensemble_sizes,
                                             const EvalOptions& options,
                                             FilterKind kind = FilterKind::ebip,
                                             InteractionConfig base = {});
/// ensemble_size, joint_mse, target_mae, highlighted
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);
/// ensemble_size, median_tick_seconds
void write_curve_latency_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

// Runtime scaling.

struct BenchOptions {
  std::vector<int> dims{64, 128, 256, 512, 1024};
  int ensemble_size = kDefaultEnsembleSize;
  FilterKind filter = FilterKind::ebip;
  int trials = 9;
  int observed_dofs = 8;
  std::uint64_t seed = 0;
};

struct BenchPoint {
  int dim = 0;
  int repetitions = 1;
  double median_seconds = 0.0;
  std::vector<double> samples;  // per predict+update pair, warm-up excluded
};

struct ScalingReport {
  FilterKind filter = FilterKind::ebip;
  int ensemble_size = 0;
  int observed_dofs = 0;
  double clock_granularity = 0.0;
  std::vector<BenchPoint> points;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Smallest observable steady_clock increment, in seconds.
double clock_granularity();

/// Median latency of predict+update pairs at each dimension and the
/// least-squares slope of log(latency) against log(n).
ScalingReport runtime_benchmark(const BenchOptions& options);

/// Median eBIP update time at 2E divided by that at E, for one dimension.
double ensemble_doubling_ratio(int dim, int ensemble_size, int trials, int observed_dofs,
                               std::uint64_t seed);

/// Deterministic fields only: dims, filter, E, trial counts.
nlohmann::json scaling_to_json(const ScalingReport& report, bool with_timings);
void write_scaling_table(std::ostream& out, const ScalingReport& report);

}  // namespace ebip
