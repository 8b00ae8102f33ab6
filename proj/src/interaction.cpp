#include "ebip/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "ebip/error.hpp"
#include "ebip/io.hpp"

namespace ebip {

std::string_view to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::bip: return "bip";
    case FilterKind::ebip: return "ebip";
    case FilterKind::ebip_minus: return "ebip_minus";
    case FilterKind::pf: return "pf";
  }
  return "unknown";
}

FilterKind filter_kind_from_string(std::string_view text) {
  if (text == "bip") return FilterKind::bip;
  if (text == "ebip") return FilterKind::ebip;
  if (text == "ebip_minus" || text == "ebip-") return FilterKind::ebip_minus;
  if (text == "pf") return FilterKind::pf;
  throw config_error("bad_filter", "unknown filter '" + std::string(text) + "'");
}

int nominal_duration(const DemonstrationCorpus& corpus) {
  if (corpus.size() == 0) return 0;
  return static_cast<int>(std::lround(1.0 / corpus.reciprocal_lengths.mean()));
}

InteractionSession::InteractionSession(const TrainedModel& trained,
                                       const InteractionConfig& config)
    : trained_(trained), config_(config), rng_(config.seed) {
  const DemonstrationCorpus& corpus = trained.corpus;
  corpus.validate();
  if (corpus.weight_count() != trained.model.weight_count()) {
    throw data_error("layout_mismatch", "corpus weights do not match the basis model");
  }
  if (trained.noise.size() != trained.model.dofs()) {
    throw data_error("layout_mismatch", "noise vector does not match the basis model");
  }
  controlled_.assign(trained.model.dofs(), false);
  for (int d : trained.model.layout().controlled_dof_indices()) controlled_[d] = true;

  int e = config.ensemble_size;
  switch (config.filter) {
    case FilterKind::bip:
      state_ = build_gaussian_prior(corpus, config.phase_variance);
      e = 0;
      break;
    case FilterKind::ebip:
    case FilterKind::pf: {
      if (e == 0) e = corpus.size();
      if (e < 2) throw config_error("ensemble_size", "ensemble size must be >= 2");
      Ensemble init = sample_direct(corpus, e, rng_, config.with_replacement);
      if (config.filter == FilterKind::pf) {
        state_ = ParticleSet::uniform(std::move(init));
      } else {
        state_ = std::move(init);
      }
      break;
    }
    case FilterKind::ebip_minus: {
      if (e == 0) e = 80;
      if (e < 2) throw config_error("ensemble_size", "ensemble size must be >= 2");
      GmmFit fit = fit_gmm_or_fallback(corpus, config.gmm, derive_seed(config.seed, 0x676d6d));
      fell_back_ = fit.fell_back;
      state_ = sample_gmm(corpus, fit.prior, e, rng_);
      break;
    }
  }
  ensemble_size_ = e;
}

void InteractionSession::step(const Observation* observation) {
  Observation masked;
  const Observation* use = nullptr;
  if (observation != nullptr) {
    if (observation->values.size() != trained_.model.dofs() ||
        static_cast<int>(observation->mask.size()) != trained_.model.dofs()) {
      throw data_error("layout_mismatch", "observation has the wrong number of DoFs");
    }
    masked = *observation;
    for (std::size_t d = 0; d < masked.mask.size(); ++d) {
      if (controlled_[d]) masked.mask[d] = false;
    }
    if (masked.any()) use = &masked;
  }
  const auto& model = trained_.model;
  const auto& noise = trained_.noise;
  const auto& tm = config_.transition;
  if (auto* belief = std::get_if<GaussianBelief>(&state_)) {
    GaussianBelief next = ekf_predict(*belief, tm);
    if (use) next = ekf_update(next, *use, model, noise);
    *belief = std::move(next);
  } else if (auto* ensemble = std::get_if<Ensemble>(&state_)) {
    Ensemble next = enkf_predict(std::move(*ensemble), tm, rng_);
    if (use) next = enkf_update(std::move(next), *use, model, noise, rng_);
    *ensemble = std::move(next);
  } else {
    auto& particles = std::get<ParticleSet>(state_);
    ParticleStepInfo info;
    Observation none = Observation::unobserved(model.dofs());
    particles = pf_step(std::move(particles), use ? *use : none, model, noise, tm, rng_, &info);
    resamples_ += info.resampled ? 1 : 0;
  }
  ++tick_;
  last_updated_ = use != nullptr;
}

TickEstimate InteractionSession::estimate() const {
  TickEstimate out;
  out.tick = tick_;
  out.updated = last_updated_;
  out.belief = belief_of(state_);
  out.y_hat = observe(out.belief.mean, trained_.model);
  return out;
}

Eigen::VectorXd InteractionSession::forecast(int target_tick) const {
  const Eigen::VectorXd mu = mean();
  // Horizon indexing clamps to [0, 1.1]; the filter state itself is never clamped.
  const double phase = std::clamp(
      mu[kPhase] + static_cast<double>(target_tick - tick_) * config_.transition.dt * mu[kPhaseVelocity],
      0.0, 1.1);
  return observe_at(phase, mu, trained_.model);
}

void run_interaction(const TrainedModel& trained, const InteractionConfig& config,
                     std::span<const TimedObservation> stream,
                     const std::function<void(const TickEstimate&)>& sink) {
  InteractionSession session(trained, config);
  int last = 0;
  for (const auto& rec : stream) {
    if (rec.tick <= last) {
      throw data_error("bad_stream", "observation ticks must be strictly increasing and >= 1 "
                                     "(tick " + std::to_string(rec.tick) + ")");
    }
    last = rec.tick;
  }
  const int horizon = config.horizon < 0 ? nominal_duration(trained.corpus) : config.horizon;
  const int end = std::max(last, horizon);
  std::size_t next = 0;
  for (int t = 1; t <= end; ++t) {
    const Observation* obs = nullptr;
    if (next < stream.size() && stream[next].tick == t) obs = &stream[next++].observation;
    try {
      session.step(obs);
    } catch (const Error& e) {
      throw Error(e.kind(), e.code(), "tick " + std::to_string(t) + ": " + e.what());
    }
    sink(session.estimate());
  }
}

std::vector<TickEstimate> run_interaction(const TrainedModel& trained,
                                          const InteractionConfig& config,
                                          std::span<const TimedObservation> stream) {
  std::vector<TickEstimate> out;
  run_interaction(trained, config, stream, [&out](const TickEstimate& e) { out.push_back(e); });
  return out;
}

std::vector<TimedObservation> read_observation_stream(std::istream& in, int dofs) {
  std::vector<TimedObservation> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TimedObservation rec;
      rec.tick = j.at("tick").get<int>();
      std::vector<double> values;
      for (const auto& v : j.at("values")) values.push_back(v.is_null() ? 0.0 : v.get<double>());
      const auto mask = j.at("mask").get<std::vector<bool>>();
      if (static_cast<int>(values.size()) != dofs || static_cast<int>(mask.size()) != dofs) {
        throw data_error("layout_mismatch", "stream line " + std::to_string(line_no) +
                                                " has " + std::to_string(values.size()) +
                                                " values, model expects " + std::to_string(dofs));
      }
      rec.observation.values = Eigen::Map<const Eigen::VectorXd>(values.data(), dofs);
      rec.observation.mask = mask;
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw data_error("bad_stream", "stream line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::string json_array(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::isfinite(v[i]) ? format_double(v[i]) : std::string("null");
  }
  return s + "]";
}

}  // namespace

void write_observation(std::ostream& out, const TimedObservation& obs) {
  std::string s = "{\"tick\":" + std::to_string(obs.tick) +
                  ",\"values\":" + json_array(obs.observation.values) + ",\"mask\":[";
  for (std::size_t i = 0; i < obs.observation.mask.size(); ++i) {
    if (i) s += ',';
    s += obs.observation.mask[i] ? "true" : "false";
  }
  out << s << "]}\n";
}

void write_tick_estimate(std::ostream& out, const TickEstimate& estimate) {
  out << "{\"tick\":" << estimate.tick
      << ",\"phase_mean\":" << format_double(estimate.belief.mean[kPhase])
      << ",\"phase_var\":" << format_double(estimate.belief.covariance(kPhase, kPhase))
      << ",\"y_hat\":" << json_array(estimate.y_hat) << "}\n";
}

}  // namespace ebip
