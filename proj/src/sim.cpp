#include "ebip/sim.hpp"

#include <cmath>
#include <numbers>

#include "ebip/error.hpp"
#include "ebip/io.hpp"

namespace ebip {

namespace {

constexpr double kPi = std::numbers::pi;

int max_channels(SignalKind kind) {
  switch (kind) {
    case SignalKind::pose: return 2;
    case SignalKind::imu: return 2;
    case SignalKind::pressure: return 2;
    case SignalKind::ball: return 3;
    case SignalKind::joints: return 6;
  }
  return 0;
}

std::string_view signal_name(SignalKind kind) {
  switch (kind) {
    case SignalKind::pose: return "pose";
    case SignalKind::imu: return "imu";
    case SignalKind::pressure: return "pressure";
    case SignalKind::ball: return "ball";
    case SignalKind::joints: return "joints";
  }
  return "unknown";
}

SignalKind signal_from_string(std::string_view s) {
  if (s == "pose") return SignalKind::pose;
  if (s == "imu") return SignalKind::imu;
  if (s == "pressure") return SignalKind::pressure;
  if (s == "ball") return SignalKind::ball;
  if (s == "joints") return SignalKind::joints;
  throw config_error("bad_scenario", "unknown signal kind '" + std::string(s) + "'");
}

double pose(int k, double p, const TaskParameters& t) {
  if (k == 0) return 0.5 * t.target * (1.0 - std::cos(kPi * p)) + 0.2 * t.windup * std::sin(2.0 * kPi * p);
  return 0.5 * t.apex * std::pow(std::sin(kPi * p), 2) + 0.3 * t.windup * p;
}

// Scaled phase derivative of pose().
double imu(int k, double p, const TaskParameters& t) {
  if (k == 0) {
    return 0.3 * (0.5 * kPi * t.target * std::sin(kPi * p) +
                  0.4 * kPi * t.windup * std::cos(2.0 * kPi * p));
  }
  return 0.3 * (t.apex * kPi * std::sin(kPi * p) * std::cos(kPi * p) + 0.3 * t.windup);
}

double pressure(int k, double p, const TaskParameters& t) {
  const double step = 1.0 / (1.0 + std::exp(-(p - t.release) / 0.04));
  return k == 0 ? t.windup * step : t.windup * (1.0 - step);
}

// Smooth flight progress: ~0 while held, ~1 at the end of the interaction.
double flight(double p, double release) {
  constexpr double width = 0.08;
  const double ramp = width * std::log1p(std::exp((p - release) / width));
  const double at_end = width * std::log1p(std::exp((1.0 - release) / width));
  return ramp / at_end;
}

double ball(int k, double p, const TaskParameters& t) {
  const double s = flight(p, t.release);
  if (k == 0) return 0.4 * t.target + 1.2 * t.target * s;
  if (k == 1) return 0.3 + 1.5 * t.apex * s * (1.2 - s);
  return 2.5 * s;
}

double joints(int k, double p, const TaskParameters& t) {
  static constexpr double a[6] = {0.8, -0.5, 0.3, 0.6, -0.2, 0.4};
  static constexpr double b[6] = {0.2, 0.6, -0.4, 0.1, 0.5, -0.3};
  static constexpr double c[6] = {0.1, -0.2, 0.3, 0.0, 0.2, -0.1};
  const double smooth = p * p * (3.0 - 2.0 * p);
  return smooth * (a[k] * t.target + b[k] * t.apex + c[k]) +
         0.1 * (k + 1) * t.windup * std::sin(kPi * p) * (1.0 - 0.5 * p);
}

double signal_value(SignalKind kind, int k, double p, const TaskParameters& t) {
  switch (kind) {
    case SignalKind::pose: return pose(k, p, t);
    case SignalKind::imu: return imu(k, p, t);
    case SignalKind::pressure: return pressure(k, p, t);
    case SignalKind::ball: return ball(k, p, t);
    case SignalKind::joints: return joints(k, p, t);
  }
  return 0.0;
}

double draw(const ParameterRange& r, RandomSource& rng) {
  return r.lo + (r.hi - r.lo) * rng.uniform();
}

nlohmann::json range_json(const ParameterRange& r) { return nlohmann::json::array({r.lo, r.hi}); }

ParameterRange range_from(const nlohmann::json& j, const char* key, ParameterRange fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2 || v[0] > v[1]) {
    throw config_error("bad_scenario", std::string("parameter range '") + key + "' must be [lo, hi]");
  }
  return {v[0], v[1]};
}

}  // namespace

ModalityLayout ScenarioSpec::layout() const {
  std::vector<Modality> mods;
  for (const auto& c : channels) mods.push_back(c.modality);
  return ModalityLayout(std::move(mods));
}

void ScenarioSpec::validate() const {
  const ModalityLayout l = layout();
  for (const auto& c : channels) {
    if (c.noise_std < 0.0) throw config_error("bad_scenario", "noise std must be >= 0");
    if (c.modality.dof_count > max_channels(c.signal)) {
      throw config_error("bad_scenario", "signal '" + std::string(signal_name(c.signal)) +
                                             "' supports at most " +
                                             std::to_string(max_channels(c.signal)) + " DoFs");
    }
  }
  if (min_duration < 2 || max_duration < min_duration) {
    throw config_error("bad_scenario", "duration range must satisfy 2 <= min <= max");
  }
  if (!(sample_rate > 0.0)) throw config_error("bad_scenario", "sample rate must be positive");
  for (const auto& w : occlusions) {
    if (!l.find(w.modality)) throw config_error("bad_scenario", "occlusion names unknown modality '" + w.modality + "'");
    if (w.begin < 0.0 || w.end > 1.0 || w.begin > w.end) {
      throw config_error("bad_scenario", "occlusion bounds must satisfy 0 <= begin <= end <= 1");
    }
  }
}

nlohmann::json ScenarioSpec::to_json() const {
  nlohmann::json mods = nlohmann::json::array();
  for (const auto& c : channels) {
    mods.push_back({{"name", c.modality.name},
                    {"dofs", c.modality.dof_count},
                    {"role", to_string(c.modality.role)},
                    {"signal", signal_name(c.signal)},
                    {"noise_std", c.noise_std}});
  }
  nlohmann::json occ = nlohmann::json::array();
  for (const auto& w : occlusions) occ.push_back({{"modality", w.modality}, {"begin", w.begin}, {"end", w.end}});
  return {{"name", name},
          {"sample_rate", sample_rate},
          {"duration", {min_duration, max_duration}},
          {"parameters",
           {{"release", range_json(release)},
            {"target", range_json(target)},
            {"apex", range_json(apex)},
            {"windup", range_json(windup)}}},
          {"modalities", mods},
          {"occlusions", occ}};
}

ScenarioSpec ScenarioSpec::from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  try {
    s.name = j.value("name", s.name);
    s.sample_rate = j.value("sample_rate", s.sample_rate);
    if (j.contains("duration")) {
      const auto d = j.at("duration").get<std::vector<int>>();
      if (d.size() != 2) throw config_error("bad_scenario", "duration must be [min, max]");
      s.min_duration = d[0];
      s.max_duration = d[1];
    }
    const nlohmann::json params = j.value("parameters", nlohmann::json::object());
    s.release = range_from(params, "release", s.release);
    s.target = range_from(params, "target", s.target);
    s.apex = range_from(params, "apex", s.apex);
    s.windup = range_from(params, "windup", s.windup);
    for (const auto& m : j.at("modalities")) {
      s.channels.push_back({{m.at("name").get<std::string>(), m.at("dofs").get<int>(),
                             role_from_string(m.at("role").get<std::string>())},
                            signal_from_string(m.at("signal").get<std::string>()),
                            m.value("noise_std", 0.0)});
    }
    if (j.contains("occlusions")) {
      for (const auto& w : j.at("occlusions")) {
        s.occlusions.push_back({w.at("modality").get<std::string>(), w.at("begin").get<double>(),
                                w.at("end").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error("bad_scenario", e.what());
  }
  s.validate();
  return s;
}

ScenarioSpec toy_throw_scenario() {
  ScenarioSpec s;
  s.channels = {
      {{"pose", 2, Role::observed}, SignalKind::pose, 0.01},
      {{"imu", 2, Role::observed}, SignalKind::imu, 0.05},
      {{"pressure", 1, Role::observed}, SignalKind::pressure, 0.02},
      {{"ball", 3, Role::observed}, SignalKind::ball, 0.02},
      {{"joints", 4, Role::controlled}, SignalKind::joints, 0.01},
  };
  s.occlusions = {{"ball", 0.0, 0.43}};
  return s;
}

TaskParameters sample_task(const ScenarioSpec& spec, RandomSource& rng) {
  TaskParameters t;
  t.release = draw(spec.release, rng);
  t.target = draw(spec.target, rng);
  t.apex = draw(spec.apex, rng);
  t.windup = draw(spec.windup, rng);
  return t;
}

Eigen::VectorXd scenario_signal(const ScenarioSpec& spec, const TaskParameters& task,
                                double phase) {
  int total = 0;
  for (const auto& c : spec.channels) total += c.modality.dof_count;
  Eigen::VectorXd y(total);
  int row = 0;
  for (const auto& c : spec.channels) {
    for (int k = 0; k < c.modality.dof_count; ++k) y[row++] = signal_value(c.signal, k, phase, task);
  }
  return y;
}

Demonstration render_demo(const ScenarioSpec& spec, const TaskParameters& task, int duration,
                          RandomSource& rng) {
  if (duration < 2) throw config_error("bad_scenario", "duration must be >= 2");
  Demonstration demo;
  demo.layout = spec.layout();
  demo.sample_rate = spec.sample_rate;
  demo.samples.resize(demo.layout.total_dofs(), duration);
  for (int t = 0; t < duration; ++t) {
    const double phase = static_cast<double>(t + 1) / duration;
    int row = 0;
    for (const auto& c : spec.channels) {
      for (int k = 0; k < c.modality.dof_count; ++k, ++row) {
        double v = signal_value(c.signal, k, phase, task);
        if (c.noise_std > 0.0) v += c.noise_std * rng.gaussian();
        demo.samples(row, t) = v;
      }
    }
  }
  return demo;
}

Demonstration generate_demo(const ScenarioSpec& spec, std::uint64_t seed, TaskParameters* task) {
  spec.validate();
  RandomSource rng(seed);
  const int duration =
      static_cast<int>(rng.index(static_cast<std::size_t>(spec.min_duration),
                                 static_cast<std::size_t>(spec.max_duration)));
  const TaskParameters t = sample_task(spec, rng);
  if (task) *task = t;
  return render_demo(spec, t, duration, rng);
}

int observed_ticks(int duration, double fraction) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw config_error("bad_fraction", "observed fraction must lie in [0, 1]");
  }
  // Guard against 0.43 * 100 landing a hair under 43.
  return std::min(duration, static_cast<int>(std::floor(fraction * duration + 1e-9)));
}

std::vector<TimedObservation> stream_from_demo(const Demonstration& demo,
                                               const std::vector<OcclusionWindow>& occlusions,
                                               double fraction,
                                               const std::vector<std::string>& subset) {
  const ModalityLayout& layout = demo.layout;
  const int t_count = demo.duration();
  const int ticks = observed_ticks(t_count, fraction);
  std::vector<bool> base(layout.total_dofs(), false);
  if (subset.empty()) {
    for (int d = 0; d < layout.total_dofs(); ++d) base[d] = layout.role_of(d) == Role::observed;
  } else {
    for (int d : layout.dofs_of(subset)) base[d] = layout.role_of(d) == Role::observed;
  }
  std::vector<std::pair<std::vector<int>, OcclusionWindow>> windows;
  for (const auto& w : occlusions) windows.push_back({layout.dofs_of({w.modality}), w});

  std::vector<TimedObservation> out;
  out.reserve(ticks);
  for (int t = 1; t <= ticks; ++t) {
    const double phase = static_cast<double>(t) / t_count;
    TimedObservation rec;
    rec.tick = t;
    rec.observation.values = demo.samples.col(t - 1);
    rec.observation.mask = base;
    for (const auto& [dofs, w] : windows) {
      if (phase >= w.begin && phase <= w.end) {
        for (int d : dofs) rec.observation.mask[d] = false;
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

GeneratedStream generate_stream(const ScenarioSpec& spec, std::uint64_t seed, double fraction) {
  GeneratedStream out;
  out.truth = generate_demo(spec, seed);
  out.observations = stream_from_demo(out.truth, spec.occlusions, fraction);
  return out;
}

}  // namespace ebip
