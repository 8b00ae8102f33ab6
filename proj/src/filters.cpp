#include "ebip/filters.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ebip/error.hpp"
#include "ebip/kernels.hpp"

namespace ebip {

Eigen::Matrix2d TransitionModel::phase_noise() const {
  Eigen::Matrix2d block;
  const double dt2 = dt * dt;
  block << dt2 * dt2 / 4.0, dt2 * dt / 2.0, dt2 * dt / 2.0, dt2;
  return q * block;
}

Eigen::MatrixXd TransitionModel::transition_matrix(int state_dim) const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(state_dim, state_dim);
  g(kPhase, kPhaseVelocity) = dt;
  return g;
}

Eigen::MatrixXd TransitionModel::process_noise(int state_dim) const {
  Eigen::MatrixXd q_full = Eigen::MatrixXd::Zero(state_dim, state_dim);
  q_full.topLeftCorner<2, 2>() = phase_noise();
  return q_full;
}

ParticleSet ParticleSet::uniform(Ensemble ensemble) {
  const int e = ensemble.size();
  return {std::move(ensemble), Eigen::VectorXd::Constant(e, 1.0 / e)};
}

namespace {

// Cholesky of the innovation covariance with diagonal jitter escalation.
Eigen::LLT<Eigen::MatrixXd> factor_innovation(const Eigen::MatrixXd& s, const char* code) {
  const double mean_diag = s.diagonal().mean();
  const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (double jitter : {0.0, 1e-12, 1e-10, 1e-8, 1e-6}) {
    Eigen::MatrixXd trial = s;
    trial.diagonal().array() += jitter * scale;
    llt.compute(trial);
    if (llt.info() == Eigen::Success) return llt;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
  const auto& sv = svd.singularValues();
  std::ostringstream os;
  os << "innovation covariance is singular (condition estimate "
     << (sv.size() && sv.minCoeff() > 0.0 ? sv.maxCoeff() / sv.minCoeff()
                                          : std::numeric_limits<double>::infinity())
     << ")";
  throw numerical_error(code, os.str());
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

void check_noise(const Eigen::VectorXd& noise, const BasisModel& model, const Observation& obs) {
  if (noise.size() != model.dofs() || obs.values.size() != model.dofs() ||
      static_cast<int>(obs.mask.size()) != model.dofs()) {
    throw config_error("dimension_mismatch",
                       "observation, noise and model disagree on the number of DoFs");
  }
}

// Lower-triangular square root of the 2x2 phase noise block (PSD, possibly
// rank one).
Eigen::Matrix2d phase_noise_root(const TransitionModel& tm) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(tm.phase_noise());
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

void propagate(Eigen::MatrixXd& x, const TransitionModel& tm, RandomSource& rng) {
  const bool noisy = tm.q > 0.0;
  const Eigen::Matrix2d root = noisy ? phase_noise_root(tm) : Eigen::Matrix2d::Zero();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    x(kPhase, j) += tm.dt * x(kPhaseVelocity, j);
    if (noisy) {
      const double z0 = rng.gaussian();
      const double z1 = rng.gaussian();
      x(kPhase, j) += root(0, 0) * z0 + root(0, 1) * z1;
      x(kPhaseVelocity, j) += root(1, 0) * z0 + root(1, 1) * z1;
    }
  }
}

}  // namespace

GaussianBelief ekf_predict(const GaussianBelief& belief, const TransitionModel& tm) {
  GaussianBelief out = belief;
  out.mean[kPhase] += tm.dt * out.mean[kPhaseVelocity];
  // G Sigma G^T touches only the phase row and column.
  out.covariance.row(kPhase) += tm.dt * out.covariance.row(kPhaseVelocity);
  out.covariance.col(kPhase) += tm.dt * out.covariance.col(kPhaseVelocity);
  out.covariance.topLeftCorner<2, 2>() += tm.phase_noise();
  return out;
}

GaussianBelief ekf_update(const GaussianBelief& belief, const Observation& obs,
                          const BasisModel& model, const Eigen::VectorXd& noise) {
  check_noise(noise, model, obs);
  const std::vector<int> idx = obs.observed_indices();
  if (idx.empty()) return belief;
  const Eigen::Index n = belief.state_dim();
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());

  const Eigen::MatrixXd h_full = observation_jacobian(belief.mean, model);
  Eigen::MatrixXd h(m, n);
  for (Eigen::Index i = 0; i < m; ++i) h.row(i) = h_full.row(idx[i]);

  const Eigen::VectorXd innovation =
      gather(obs.values, idx) - observe(belief.mean, model, idx);
  const Eigen::MatrixXd h_sigma = h * belief.covariance;  // m x n
  Eigen::MatrixXd s = h_sigma * h.transpose();
  s.diagonal() += gather(noise, idx);
  const auto llt = factor_innovation(s, "singular_update");
  const Eigen::MatrixXd gain = llt.solve(h_sigma).transpose();  // n x m

  GaussianBelief out;
  out.mean = belief.mean + gain * innovation;
  Eigen::MatrixXd i_kh = -gain * h;
  i_kh.diagonal().array() += 1.0;
  out.covariance = i_kh * belief.covariance;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

Ensemble enkf_predict(Ensemble ensemble, const TransitionModel& tm, RandomSource& rng) {
  propagate(ensemble.members(), tm, rng);
  return ensemble;
}

Ensemble enkf_update(Ensemble ensemble, const Observation& obs, const BasisModel& model,
                     const Eigen::VectorXd& noise, RandomSource& rng) {
  check_noise(noise, model, obs);
  const std::vector<int> idx = obs.observed_indices();
  if (idx.empty()) return ensemble;
  const int e = ensemble.size();
  if (e < 2) throw numerical_error("covariance_undefined", "ensemble update needs E >= 2");
  const auto& kern = simd::active_kernels();
  Eigen::MatrixXd& x = ensemble.members();
  const Eigen::Index n = x.rows();
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  const double inv_e1 = 1.0 / static_cast<double>(e - 1);

  Eigen::MatrixXd hx(m, e);
  for (int j = 0; j < e; ++j) hx.col(j) = observe(x.col(j), model, idx);

  const Eigen::VectorXd x_mean = ensemble_mean(ensemble);
  Eigen::MatrixXd a = x;
  for (int j = 0; j < e; ++j) kern.axpy(-1.0, x_mean.data(), a.col(j).data(), n);

  const Eigen::VectorXd hx_mean = hx.rowwise().mean();
  const Eigen::MatrixXd ha = hx.colwise() - hx_mean;

  const Eigen::VectorXd r = gather(noise, idx);
  Eigen::MatrixXd s = inv_e1 * (ha * ha.transpose());
  s.diagonal() += r;

  const Eigen::VectorXd y = gather(obs.values, idx);
  const Eigen::VectorXd r_std = r.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd d(m, e);
  for (int j = 0; j < e; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) d(i, j) = y[i] + r_std[i] * rng.gaussian() - hx(i, j);
  }

  const auto llt = factor_innovation(s, "singular_innovation");
  const Eigen::MatrixXd z = llt.solve(d);                        // m x E
  const Eigen::MatrixXd p = inv_e1 * (ha.transpose() * z);       // E x E
  kern.gemm_accumulate(a.data(), p.data(), x.data(), n, e, e);   // X += A P
  return ensemble;
}

double effective_sample_size(const Eigen::VectorXd& weights) {
  const double s = weights.squaredNorm();
  return s > 0.0 ? 1.0 / s : 0.0;
}

std::vector<int> systematic_resample(const Eigen::VectorXd& weights, double offset) {
  const int e = static_cast<int>(weights.size());
  std::vector<int> out(e);
  double cumulative = weights[0];
  int i = 0;
  for (int j = 0; j < e; ++j) {
    const double u = offset + static_cast<double>(j) / e;
    while (u > cumulative && i < e - 1) cumulative += weights[++i];
    out[j] = i;
  }
  return out;
}

ParticleSet pf_step(ParticleSet state, const Observation& obs, const BasisModel& model,
                    const Eigen::VectorXd& noise, const TransitionModel& tm, RandomSource& rng,
                    ParticleStepInfo* info) {
  check_noise(noise, model, obs);
  const int e = state.size();
  if (state.weights.size() != e || (state.weights.array() < 0.0).any() ||
      std::abs(state.weights.sum() - 1.0) > 1e-9) {
    throw numerical_error("bad_weights", "particle weights must be non-negative and sum to 1");
  }
  Eigen::MatrixXd& x = state.particles.members();
  propagate(x, tm, rng);

  ParticleStepInfo local;
  const std::vector<int> idx = obs.observed_indices();
  if (!idx.empty()) {
    const Eigen::VectorXd y = gather(obs.values, idx);
    Eigen::VectorXd inv_r = gather(noise, idx);
    for (Eigen::Index i = 0; i < inv_r.size(); ++i) {
      inv_r[i] = 1.0 / std::max(inv_r[i], std::numeric_limits<double>::min());
    }
    Eigen::VectorXd log_w(e);
    double max_ll = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < e; ++j) {
      const Eigen::VectorXd res = y - observe(x.col(j), model, idx);
      const double ll = -0.5 * res.cwiseAbs2().dot(inv_r);
      max_ll = std::max(max_ll, ll);
      log_w[j] = std::log(state.weights[j]) + ll;
    }
    local.max_log_likelihood = max_ll;
    const double top = log_w.maxCoeff();
    if (!std::isfinite(top)) {
      std::ostringstream os;
      os << "all particle likelihoods vanished (max log-likelihood " << max_ll << ")";
      throw numerical_error("weight_collapse", os.str());
    }
    state.weights = (log_w.array() - top).exp();
    state.weights /= state.weights.sum();
  }

  local.ess = effective_sample_size(state.weights);
  if (local.ess < 0.5 * e) {
    const auto pick = systematic_resample(state.weights, rng.uniform() / e);
    Eigen::MatrixXd resampled(x.rows(), e);
    for (int j = 0; j < e; ++j) resampled.col(j) = x.col(pick[j]);
    x = std::move(resampled);
    state.weights.setConstant(1.0 / e);
    local.resampled = true;
  }
  if (info) *info = local;
  return state;
}

GaussianBelief belief_of(const FilterState& state) {
  struct Visitor {
    GaussianBelief operator()(const GaussianBelief& b) const { return b; }
    GaussianBelief operator()(const Ensemble& e) const { return ensemble_moments(e); }
    GaussianBelief operator()(const ParticleSet& p) const {
      return weighted_moments(p.particles, p.weights);
    }
  };
  return std::visit(Visitor{}, state);
}

Eigen::VectorXd state_mean(const FilterState& state) {
  struct Visitor {
    Eigen::VectorXd operator()(const GaussianBelief& b) const { return b.mean; }
    Eigen::VectorXd operator()(const Ensemble& e) const { return ensemble_mean(e); }
    Eigen::VectorXd operator()(const ParticleSet& p) const {
      return p.particles.members() * p.weights;
    }
  };
  return std::visit(Visitor{}, state);
}

Eigen::MatrixXd predict_trajectory(const FilterState& state, const BasisModel& model,
                                   const std::vector<double>& phases) {
  const Eigen::VectorXd mean = state_mean(state);
  Eigen::MatrixXd out(model.dofs(), static_cast<Eigen::Index>(phases.size()));
  for (std::size_t k = 0; k < phases.size(); ++k) out.col(k) = observe_at(phases[k], mean, model);
  return out;
}

}  // namespace ebip
