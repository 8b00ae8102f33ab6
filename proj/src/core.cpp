#include "ebip/core.hpp"

#include <cmath>
#include <set>

#include "ebip/error.hpp"
#include "ebip/kernels.hpp"

namespace ebip {

std::string_view to_string(Role role) {
  return role == Role::observed ? "observed" : "controlled";
}

Role role_from_string(std::string_view text) {
  if (text == "observed") return Role::observed;
  if (text == "controlled") return Role::controlled;
  throw config_error("bad_role", "unknown modality role '" + std::string(text) + "'");
}

ModalityLayout::ModalityLayout(std::vector<Modality> modalities)
    : modalities_(std::move(modalities)) {
  std::set<std::string> names;
  bool has_observed = false;
  bool has_controlled = false;
  offsets_.reserve(modalities_.size());
  for (const auto& m : modalities_) {
    if (m.dof_count < 1) {
      throw config_error("bad_layout", "modality '" + m.name + "' has dof_count < 1");
    }
    if (!names.insert(m.name).second) {
      throw config_error("bad_layout", "duplicate modality name '" + m.name + "'");
    }
    has_observed |= m.role == Role::observed;
    has_controlled |= m.role == Role::controlled;
    offsets_.push_back(total_);
    total_ += m.dof_count;
  }
  if (!has_observed || !has_controlled) {
    throw config_error("bad_layout",
                       "layout needs at least one observed and one controlled modality");
  }
}

int ModalityLayout::observed_dofs() const {
  int n = 0;
  for (const auto& m : modalities_)
    if (m.role == Role::observed) n += m.dof_count;
  return n;
}

int ModalityLayout::controlled_dofs() const { return total_ - observed_dofs(); }

std::optional<std::size_t> ModalityLayout::find(std::string_view name) const {
  for (std::size_t i = 0; i < modalities_.size(); ++i)
    if (modalities_[i].name == name) return i;
  return std::nullopt;
}

std::size_t ModalityLayout::modality_of(int dof) const {
  for (std::size_t i = modalities_.size(); i-- > 0;)
    if (dof >= offsets_[i]) return i;
  return 0;
}

std::vector<int> ModalityLayout::dofs_of(const std::vector<std::string>& names) const {
  std::vector<int> out;
  for (const auto& name : names) {
    auto idx = find(name);
    if (!idx) throw config_error("unknown_modality", "no modality named '" + name + "'");
    for (int k = 0; k < modalities_[*idx].dof_count; ++k) out.push_back(offsets_[*idx] + k);
  }
  return out;
}

std::vector<int> ModalityLayout::controlled_dof_indices() const {
  std::vector<int> out;
  for (int d = 0; d < total_; ++d)
    if (role_of(d) == Role::controlled) out.push_back(d);
  return out;
}

std::vector<std::string> ModalityLayout::observed_names() const {
  std::vector<std::string> out;
  for (const auto& m : modalities_)
    if (m.role == Role::observed) out.push_back(m.name);
  return out;
}

std::uint64_t ModalityLayout::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& m : modalities_) {
    mix(m.name);
    mix(":");
    mix(std::to_string(m.dof_count));
    mix(":");
    mix(to_string(m.role));
    mix(";");
  }
  return h;
}

void Demonstration::validate() const {
  if (samples.rows() != layout.total_dofs()) {
    throw data_error("bad_demo", "demonstration has " + std::to_string(samples.rows()) +
                                     " rows, layout expects " +
                                     std::to_string(layout.total_dofs()));
  }
  if (samples.cols() < 2) throw data_error("bad_demo", "demonstration needs T >= 2");
  if (!(sample_rate > 0.0)) throw data_error("bad_demo", "sample_rate must be positive");
  if (samples.hasNaN()) throw data_error("bad_demo", "training demonstration contains NaN");
}

Observation Observation::unobserved(int dofs) {
  return {Eigen::VectorXd::Zero(dofs), std::vector<bool>(dofs, false)};
}

std::vector<int> Observation::observed_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<int>(i));
  return out;
}

bool Observation::any() const {
  for (bool b : mask)
    if (b) return true;
  return false;
}

Eigen::VectorXd LatentState::to_vector() const {
  Eigen::VectorXd x(kWeightOffset + weights.size());
  x[kPhase] = phase;
  x[kPhaseVelocity] = phase_velocity;
  x.tail(weights.size()) = weights;
  return x;
}

LatentState LatentState::from_vector(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return {x[kPhase], x[kPhaseVelocity], x.tail(x.size() - kWeightOffset)};
}

Ensemble::Ensemble(Eigen::MatrixXd members) : members_(std::move(members)) {
  if (members_.cols() < 1) throw config_error("bad_ensemble", "ensemble needs at least one member");
  if (members_.rows() < kWeightOffset) {
    throw config_error("bad_ensemble", "member state must hold phase and phase velocity");
  }
  for (Eigen::Index j = 0; j < members_.cols(); ++j) {
    if (!std::isfinite(members_(kPhase, j))) {
      throw numerical_error("bad_ensemble", "non-finite member phase");
    }
  }
}

void GaussianBelief::validate() const {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw numerical_error("bad_belief", "covariance shape does not match mean");
  }
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw numerical_error("bad_belief", "covariance is not symmetric");
  }
  if ((covariance.diagonal().array() < 0.0).any()) {
    throw numerical_error("bad_belief", "covariance has a negative variance");
  }
}

Eigen::VectorXd ensemble_mean(const Ensemble& ensemble) {
  const Eigen::MatrixXd& x = ensemble.members();
  const auto& k = simd::active_kernels();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.rows());
  const auto n = static_cast<std::size_t>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) k.axpy(1.0, x.col(j).data(), mean.data(), n);
  return mean / static_cast<double>(x.cols());
}

GaussianBelief ensemble_moments(const Ensemble& ensemble, double inflation) {
  const int e = ensemble.size();
  if (e < 2) {
    throw numerical_error("covariance_undefined",
                          "ensemble covariance needs at least two members");
  }
  const Eigen::MatrixXd& x = ensemble.members();
  GaussianBelief out;
  out.mean = ensemble_mean(ensemble);
  Eigen::MatrixXd dev = x.colwise() - out.mean;
  out.covariance = (inflation / static_cast<double>(e - 1)) * (dev * dev.transpose());
  return out;
}

GaussianBelief weighted_moments(const Ensemble& ensemble, const Eigen::VectorXd& weights) {
  const Eigen::MatrixXd& x = ensemble.members();
  if (weights.size() != x.cols()) {
    throw config_error("bad_weights", "weight vector does not match ensemble size");
  }
  GaussianBelief out;
  out.mean = x * weights;
  const double sum_sq = weights.squaredNorm();
  Eigen::MatrixXd dev = x.colwise() - out.mean;
  Eigen::MatrixXd scaled = dev * weights.asDiagonal();
  const double denom = 1.0 - sum_sq;
  if (denom <= 0.0) {
    out.covariance = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  } else {
    out.covariance = (scaled * dev.transpose()) / denom;
  }
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

}  // namespace ebip
