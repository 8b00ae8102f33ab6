#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "ebip/error.hpp"
#include "ebip/eval.hpp"
#include "ebip/stats.hpp"

namespace ebip {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void pin_to_current_cpu() {
#if defined(__linux__)
  const int cpu = sched_getcpu();
  if (cpu < 0) return;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  pthread_setaffinity_np(pthread_self(), sizeof(set), &set);  // best effort
#endif
}

// D DoFs (one controlled) sharing n - 2 RBF weights as evenly as possible.
BasisModel synthetic_model(int dim, int dofs) {
  if (dim - kWeightOffset < dofs) {
    throw config_error("bad_dims", "dimension " + std::to_string(dim) + " is too small for " +
                                       std::to_string(dofs) + " DoFs");
  }
  ModalityLayout layout({{"obs", dofs - 1, Role::observed}, {"ctl", 1, Role::controlled}});
  const int weights = dim - kWeightOffset;
  std::vector<BasisFamily> families;
  for (int d = 0; d < dofs; ++d) {
    families.push_back(BasisFamily::gaussian_rbf(weights / dofs + (d < weights % dofs ? 1 : 0)));
  }
  return BasisModel(layout, families);
}

struct Problem {
  BasisModel model;
  Eigen::VectorXd noise;
  Observation obs;
  TransitionModel tm;
};

Problem make_problem(int dim, int dofs, RandomSource& rng) {
  Problem p{synthetic_model(dim, dofs), Eigen::VectorXd::Constant(dofs, 0.01),
            Observation::unobserved(dofs), TransitionModel{}};
  Eigen::VectorXd x(dim);
  x[kPhase] = 0.3;
  x[kPhaseVelocity] = 0.01;
  for (int i = kWeightOffset; i < dim; ++i) x[i] = rng.gaussian();
  p.obs.values = observe(x, p.model);
  for (int d = 0; d < dofs; ++d) {
    p.obs.values[d] += 0.1 * rng.gaussian();
    p.obs.mask[d] = true;
  }
  return p;
}

Ensemble make_ensemble(int dim, int members, RandomSource& rng) {
  Eigen::MatrixXd x(dim, members);
  for (int j = 0; j < members; ++j) {
    x(kPhase, j) = 0.3 + 0.01 * rng.gaussian();
    x(kPhaseVelocity, j) = 0.01 + 0.001 * rng.gaussian();
    for (int i = kWeightOffset; i < dim; ++i) x(i, j) = rng.gaussian();
  }
  return Ensemble(std::move(x));
}

GaussianBelief make_belief(int dim, RandomSource& rng) {
  GaussianBelief b;
  b.mean.resize(dim);
  b.mean[kPhase] = 0.3;
  b.mean[kPhaseVelocity] = 0.01;
  for (int i = kWeightOffset; i < dim; ++i) b.mean[i] = rng.gaussian();
  Eigen::MatrixXd v(dim - kWeightOffset, 4);
  for (int i = 0; i < v.size(); ++i) v.data()[i] = 0.3 * rng.gaussian();
  b.covariance = Eigen::MatrixXd::Zero(dim, dim);
  b.covariance(kPhase, kPhase) = 1e-4;
  b.covariance(kPhaseVelocity, kPhaseVelocity) = 1e-6;
  b.covariance.bottomRightCorner(dim - kWeightOffset, dim - kWeightOffset) =
      v * v.transpose() + 0.1 * Eigen::MatrixXd::Identity(dim - kWeightOffset, dim - kWeightOffset);
  return b;
}

// Times `reps` back-to-back calls of `step` per sample. The first
// max(1, 10%) samples are warm-up and dropped.
template <typename Step>
std::vector<double> sample_latency(int trials, int reps, Step&& step) {
  const int warm = std::max(1, (trials + 9) / 10);
  std::vector<double> out;
  for (int t = 0; t < warm + trials; ++t) {
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) step();
    const double s = seconds_since(t0) / reps;
    if (t >= warm) out.push_back(s);
  }
  return out;
}

// Repetitions needed for one sample to span 100 clock ticks.
template <typename Step>
int calibrate_reps(double granularity, Step&& step) {
  const auto t0 = Clock::now();
  step();
  const double one = std::max(seconds_since(t0), 1e-9);
  const double needed = 100.0 * granularity;
  return one >= needed ? 1 : static_cast<int>(std::ceil(needed / one));
}

}  // namespace

double clock_granularity() {
  double best = 1.0;
  for (int i = 0; i < 64; ++i) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    best = std::min(best, std::chrono::duration<double>(b - a).count());
  }
  return best;
}

ScalingReport runtime_benchmark(const BenchOptions& options) {
  if (options.dims.size() < 4) {
    throw config_error("too_few_dims", "slope fit needs at least 4 dimensions, got " +
                                           std::to_string(options.dims.size()));
  }
  for (std::size_t i = 1; i < options.dims.size(); ++i) {
    if (options.dims[i] <= options.dims[i - 1]) {
      throw config_error("bad_dims", "dimensions must be strictly increasing");
    }
  }
  if (options.trials < 1) throw config_error("bad_trials", "trials must be >= 1");
  if (options.filter != FilterKind::bip && options.ensemble_size < 2) {
    throw config_error("ensemble_size", "ensemble size must be >= 2");
  }
  pin_to_current_cpu();

  ScalingReport report;
  report.filter = options.filter;
  report.ensemble_size = options.filter == FilterKind::bip ? 0 : options.ensemble_size;
  report.observed_dofs = options.observed_dofs;
  report.clock_granularity = clock_granularity();

  for (int dim : options.dims) {
    RandomSource rng(derive_seed(options.seed, 0x62656e63, static_cast<std::uint64_t>(dim)));
    Problem p = make_problem(dim, options.observed_dofs, rng);
    BenchPoint point;
    point.dim = dim;
    if (options.filter == FilterKind::bip) {
      const GaussianBelief start = make_belief(dim, rng);
      GaussianBelief b = start;
      auto step = [&] { b = ekf_update(ekf_predict(b, p.tm), p.obs, p.model, p.noise); };
      point.repetitions = calibrate_reps(report.clock_granularity, step);
      b = start;
      point.samples = sample_latency(options.trials, point.repetitions, step);
    } else if (options.filter == FilterKind::pf) {
      ParticleSet s = ParticleSet::uniform(make_ensemble(dim, options.ensemble_size, rng));
      auto step = [&] { s = pf_step(std::move(s), p.obs, p.model, p.noise, p.tm, rng); };
      point.repetitions = calibrate_reps(report.clock_granularity, step);
      point.samples = sample_latency(options.trials, point.repetitions, step);
    } else {
      Ensemble x = make_ensemble(dim, options.ensemble_size, rng);
      auto step = [&] {
        x = enkf_update(enkf_predict(std::move(x), p.tm, rng), p.obs, p.model, p.noise, rng);
      };
      point.repetitions = calibrate_reps(report.clock_granularity, step);
      point.samples = sample_latency(options.trials, point.repetitions, step);
    }
    point.median_seconds = median(point.samples);
    report.points.push_back(std::move(point));
  }

  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& pt : report.points) {
    lx.push_back(std::log(static_cast<double>(pt.dim)));
    ly.push_back(std::log(pt.median_seconds));
  }
  const LineFit fit = fit_line(lx, ly);
  report.slope = fit.slope;
  report.intercept = fit.intercept;
  return report;
}

double ensemble_doubling_ratio(int dim, int ensemble_size, int trials, int observed_dofs,
                               std::uint64_t seed) {
  if (ensemble_size < 2) throw config_error("ensemble_size", "ensemble size must be >= 2");
  pin_to_current_cpu();
  const double granularity = clock_granularity();
  double medians[2];
  for (int k = 0; k < 2; ++k) {
    const int e = ensemble_size << k;
    RandomSource rng(derive_seed(seed, 0x64626c, static_cast<std::uint64_t>(e)));
    Problem p = make_problem(dim, observed_dofs, rng);
    Ensemble x = make_ensemble(dim, e, rng);
    const Ensemble start = x;
    auto step = [&] { x = enkf_update(std::move(x), p.obs, p.model, p.noise, rng); };
    const int reps = calibrate_reps(granularity, step);
    x = start;
    medians[k] = median(sample_latency(trials, reps, step));
  }
  return medians[1] / medians[0];
}

nlohmann::json scaling_to_json(const ScalingReport& report, bool with_timings) {
  nlohmann::json j;
  j["filter"] = std::string(to_string(report.filter));
  j["ensemble_size"] = report.ensemble_size;
  j["observed_dofs"] = report.observed_dofs;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : report.points) {
    nlohmann::json jp;
    jp["dim"] = p.dim;
    jp["trials"] = p.samples.size();
    if (with_timings) {
      jp["repetitions"] = p.repetitions;
      jp["median_seconds"] = p.median_seconds;
      jp["samples"] = p.samples;
    }
    pts.push_back(std::move(jp));
  }
  j["points"] = std::move(pts);
  if (with_timings) {
    j["clock_granularity"] = report.clock_granularity;
    j["slope"] = report.slope;
    j["intercept"] = report.intercept;
  }
  return j;
}

void write_scaling_table(std::ostream& out, const ScalingReport& report) {
  out << "filter " << to_string(report.filter);
  if (report.ensemble_size > 0) out << "  E=" << report.ensemble_size;
  out << "\n";
  out << std::left << std::setw(8) << "n" << std::setw(8) << "reps" << "median_us\n";
  for (const auto& p : report.points) {
    out << std::left << std::setw(8) << p.dim << std::setw(8) << p.repetitions << std::fixed
        << std::setprecision(2) << p.median_seconds * 1e6 << "\n";
    out.unsetf(std::ios::floatfield);
  }
  out << "log-log slope " << std::setprecision(3) << report.slope << "\n";
}

}  // namespace ebip
