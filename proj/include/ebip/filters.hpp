#pragma once

#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ebip/basis.hpp"
#include "ebip/core.hpp"
#include "ebip/random.hpp"

namespace ebip {

/// Constant-velocity phase dynamics: phase += dt * phase_velocity, weights
/// static. Process noise is the discrete white-noise block
/// q * [[dt^4/4, dt^3/2], [dt^3/2, dt^2]] on (phase, phase velocity).
struct TransitionModel {
  double dt = 1.0;
  double q = 1e-6;

  Eigen::Matrix2d phase_noise() const;
  /// Full (n x n) G and Q, mainly for tests and the dense EKF path.
  Eigen::MatrixXd transition_matrix(int state_dim) const;
  Eigen::MatrixXd process_noise(int state_dim) const;
};

/// Weighted particle cloud; weights are non-negative and sum to one.
struct ParticleSet {
  Ensemble particles;
  Eigen::VectorXd weights;

  static ParticleSet uniform(Ensemble ensemble);
  int size() const { return particles.size(); }
};

using FilterState = std::variant<GaussianBelief, Ensemble, ParticleSet>;

GaussianBelief ekf_predict(const GaussianBelief& belief, const TransitionModel& tm);

/// Standard EKF update linearised at the predicted mean, restricted to the
/// observed dimensions; Sigma <- (I - K H) Sigma. `noise` is diag(R) over all
/// D dimensions. An all-false mask returns the belief unchanged.
GaussianBelief ekf_update(const GaussianBelief& belief, const Observation& obs,
                          const BasisModel& model, const Eigen::VectorXd& noise);

/// x_j <- G x_j + eta_j, eta_j ~ N(0, Q). Draws two normals per member, in
/// member order.
Ensemble enkf_predict(Ensemble ensemble, const TransitionModel& tm, RandomSource& rng);

/// Stochastic ensemble update with perturbed observations. The observation
/// function is applied to each member directly (no linearisation). Draws
/// one normal per member per observed dimension, member-major.
Ensemble enkf_update(Ensemble ensemble, const Observation& obs, const BasisModel& model,
                     const Eigen::VectorXd& noise, RandomSource& rng);

double effective_sample_size(const Eigen::VectorXd& weights);

/// Systematic resampling with offset u0 in [0, 1/E): returns the source
/// index for each of the E output particles.
std::vector<int> systematic_resample(const Eigen::VectorXd& weights, double offset);

struct ParticleStepInfo {
  double ess = 0.0;
  bool resampled = false;
  double max_log_likelihood = 0.0;
};

/// Propagate, reweight by the diagonal-Gaussian likelihood on the observed
/// dimensions, and resample systematically when ESS < E / 2 (strictly).
ParticleSet pf_step(ParticleSet state, const Observation& obs, const BasisModel& model,
                    const Eigen::VectorXd& noise, const TransitionModel& tm, RandomSource& rng,
                    ParticleStepInfo* info = nullptr);

/// Mean and covariance of any filter state (ensemble: 1/(E-1) moments;
/// particles: weighted moments).
GaussianBelief belief_of(const FilterState& state);
Eigen::VectorXd state_mean(const FilterState& state);

/// h evaluated at the belief mean for each requested phase (weights held
/// fixed): D x phases.size().
Eigen::MatrixXd predict_trajectory(const FilterState& state, const BasisModel& model,
                                   const std::vector<double>& phases);

}  // namespace ebip
