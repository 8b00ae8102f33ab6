#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ebip/core.hpp"
#include "ebip/random.hpp"

namespace ebip {

/// Shape generators available to scenario channels.
enum class SignalKind { pose, imu, pressure, ball, joints };

struct ScenarioChannel {
  Modality modality;
  SignalKind signal = SignalKind::pose;
  double noise_std = 0.0;
};

struct ParameterRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Phase interval [begin, end] during which a modality is not observable.
struct OcclusionWindow {
  std::string modality;
  double begin = 0.0;
  double end = 0.0;
};

/// Latent task parameters of one synthetic throw.
struct TaskParameters {
  double release = 0.43;  // phase at which the ball leaves the hand
  double target = 0.0;    // lateral landing offset
  double apex = 1.0;      // arc height
  double windup = 1.0;    // amplitude of the preparatory motion
};

struct ScenarioSpec {
  std::string name = "toy-throw";
  std::vector<ScenarioChannel> channels;
  int min_duration = 80;
  int max_duration = 120;
  double sample_rate = 60.0;
  ParameterRange release{0.43, 0.43};
  ParameterRange target{-1.0, 1.0};
  ParameterRange apex{0.5, 1.5};
  ParameterRange windup{0.8, 1.2};
  std::vector<OcclusionWindow> occlusions;

  ModalityLayout layout() const;
  void validate() const;

  nlohmann::json to_json() const;
  static ScenarioSpec from_json(const nlohmann::json& j);
};

/// 12-DoF throw/catch analog: pose(2), imu(2), pressure(1), ball(3) observed,
/// joints(4) controlled; ball occluded on [0, 0.43].
ScenarioSpec toy_throw_scenario();

TaskParameters sample_task(const ScenarioSpec& spec, RandomSource& rng);

/// Noise-free value of every channel at `phase`.
Eigen::VectorXd scenario_signal(const ScenarioSpec& spec, const TaskParameters& task,
                                double phase);

/// Renders a demonstration of the given duration; noise drawn from `rng`
/// sample-major, channel-minor.
Demonstration render_demo(const ScenarioSpec& spec, const TaskParameters& task, int duration,
                          RandomSource& rng);

/// Draws T uniformly in [min_duration, max_duration], then the task, then
/// renders. Same seed, same demonstration.
Demonstration generate_demo(const ScenarioSpec& spec, std::uint64_t seed,
                            TaskParameters* task = nullptr);

/// Observations for ticks 1..floor(fraction * T) of a demonstration. A
/// dimension is observed when its modality is observed-role, listed in
/// `subset` (all observed modalities when empty) and outside every
/// occlusion window at phase t / T.
std::vector<TimedObservation> stream_from_demo(const Demonstration& demo,
                                               const std::vector<OcclusionWindow>& occlusions,
                                               double fraction,
                                               const std::vector<std::string>& subset = {});

/// Number of ticks streamed for a given observed fraction.
int observed_ticks(int duration, double fraction);

struct GeneratedStream {
  std::vector<TimedObservation> observations;
  Demonstration truth;
};

GeneratedStream generate_stream(const ScenarioSpec& spec, std::uint64_t seed, double fraction);

}  // namespace ebip
