#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ebip/core.hpp"

namespace ebip {

enum class BasisKind { gaussian_rbf, polynomial, sigmoid };

std::string_view to_string(BasisKind kind);
BasisKind basis_kind_from_string(std::string_view text);

/// A family of phase-dependent basis functions for a single DoF.
///
///   gaussian_rbf  exp(-(phase - c_i)^2 / (2 width^2))
///   polynomial    phase^i, i = 0..degree
///   sigmoid       1 / (1 + exp(-(phase - c_i) / width))
///
/// Phases outside [0, 1] are evaluated as-is (polynomials extrapolate,
/// RBF and sigmoid tails decay naturally).
class BasisFamily {
 public:
  /// `count` centers spaced uniformly on [0, 1] with width 1 / (count - 1).
  static BasisFamily gaussian_rbf(int count);
  static BasisFamily gaussian_rbf(std::vector<double> centers, double width);
  static BasisFamily polynomial(int degree);
  static BasisFamily sigmoid(int count);
  static BasisFamily sigmoid(std::vector<double> centers, double width);

  BasisKind kind() const { return kind_; }
  int size() const { return size_; }
  int degree() const { return size_ - 1; }
  const std::vector<double>& centers() const { return centers_; }
  double width() const { return width_; }

  /// Writes size() values into `out`.
  void evaluate(double phase, double* out) const;
  void derivative(double phase, double* out) const;
  Eigen::RowVectorXd evaluate(double phase) const;
  Eigen::RowVectorXd derivative(double phase) const;

  /// Phi(phase) . w and d(Phi(phase) . w)/dphase without allocating.
  double combine(double phase, const double* weights) const;
  double combine_derivative(double phase, const double* weights) const;

  std::string describe() const;
  nlohmann::json to_json() const;
  static BasisFamily from_json(const nlohmann::json& j);

  bool operator==(const BasisFamily&) const = default;

 private:
  BasisFamily(BasisKind kind, int size, std::vector<double> centers, double width);

  void rbf_values(double phase, double* out) const;

  BasisKind kind_ = BasisKind::polynomial;
  int size_ = 1;
  std::vector<double> centers_;
  double width_ = 0.0;
  double spacing_ = 0.0;  // > 0 when RBF centers form a uniform grid
};

/// One basis family per DoF, weight blocks laid out contiguously in DoF order.
class BasisModel {
 public:
  BasisModel() = default;
  BasisModel(ModalityLayout layout, std::vector<BasisFamily> families);

  const ModalityLayout& layout() const { return layout_; }
  const std::vector<BasisFamily>& families() const { return families_; }
  const BasisFamily& family(int dof) const { return families_[dof]; }
  int dofs() const { return static_cast<int>(families_.size()); }
  int weight_count() const { return total_; }
  int state_dim() const { return kWeightOffset + total_; }
  /// Offset of DoF `dof`'s block inside the weight vector.
  int block_offset(int dof) const { return offsets_[dof]; }

  nlohmann::json to_json() const;
  static BasisModel from_json(const nlohmann::json& j);

  bool operator==(const BasisModel& other) const {
    return layout_ == other.layout_ && families_ == other.families_;
  }

 private:
  ModalityLayout layout_;
  std::vector<BasisFamily> families_;
  std::vector<int> offsets_;
  int total_ = 0;
};

inline constexpr double kDefaultRidge = 1e-8;

/// Relative phase t / T of tick t in an interaction of T ticks.
double compute_phase(int tick, int duration);
/// Phases of the T samples of a demonstration: (1/T, 2/T, ..., 1).
Eigen::VectorXd demonstration_phases(int duration);

Eigen::MatrixXd design_matrix(const BasisFamily& family, const Eigen::VectorXd& phases);

/// Ridge least squares min |y - Phi w|^2 + ridge |w|^2, solved by QR on the
/// augmented system.
Eigen::VectorXd fit_weights(const Eigen::VectorXd& values, const Eigen::VectorXd& phases,
                            const BasisFamily& family, double ridge = kDefaultRidge);

/// Full weight vector (length B) for one demonstration.
Eigen::VectorXd fit_demonstration(const Demonstration& demo, const BasisModel& model,
                                  double ridge = kDefaultRidge);

/// n ln(RSS / n) + k ln(n), with RSS/n floored at a tiny fraction of the
/// signal power so exact fits compare on the penalty alone.
double bic_score(double rss, double signal_power, int samples, int parameters);

struct CandidateScore {
  int dof = 0;
  std::size_t candidate = 0;
  double rss = 0.0;
  double bic = 0.0;
};

/// Per DoF, picks the candidate with the lowest BIC (ties: fewer basis
/// functions, then list order). `candidates` holds either one list shared by
/// every DoF or one list per DoF.
BasisModel select_basis(const std::vector<Demonstration>& demos,
                        const std::vector<std::vector<BasisFamily>>& candidates,
                        double ridge = kDefaultRidge,
                        std::vector<CandidateScore>* scores = nullptr);

/// y^d = Phi^d(phase) w^d for every DoF.
Eigen::VectorXd observe(const Eigen::Ref<const Eigen::VectorXd>& state, const BasisModel& model);
/// Same, restricted to the listed DoFs (in the order given).
Eigen::VectorXd observe(const Eigen::Ref<const Eigen::VectorXd>& state, const BasisModel& model,
                        const std::vector<int>& dofs);
/// Observation at an explicit phase, ignoring state[kPhase].
Eigen::VectorXd observe_at(double phase, const Eigen::Ref<const Eigen::VectorXd>& state,
                           const BasisModel& model);

/// D x (2 + B) Jacobian of observe(): phase column, zero phase-velocity
/// column, block-diagonal basis rows for the weights.
Eigen::MatrixXd observation_jacobian(const Eigen::Ref<const Eigen::VectorXd>& state,
                                     const BasisModel& model);

/// Candidate lists for the CLI: {"default": [...], "modalities": {"name": [...]}}.
std::vector<std::vector<BasisFamily>> candidates_from_json(const nlohmann::json& j,
                                                           const ModalityLayout& layout);
/// Polynomial, RBF and sigmoid candidates used when none are supplied.
std::vector<BasisFamily> default_candidates();

}  // namespace ebip
