#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ebip {

enum class Role { observed, controlled };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct Modality {
  std::string name;
  int dof_count = 1;
  Role role = Role::observed;

  bool operator==(const Modality&) const = default;
};

/// Ordered list of sensor modalities. DoFs are numbered contiguously in
/// modality order; this object is the only place that indexing is defined.
class ModalityLayout {
 public:
  ModalityLayout() = default;
  explicit ModalityLayout(std::vector<Modality> modalities);

  const std::vector<Modality>& modalities() const { return modalities_; }
  std::size_t size() const { return modalities_.size(); }
  const Modality& operator[](std::size_t i) const { return modalities_[i]; }

  int total_dofs() const { return total_; }
  int observed_dofs() const;
  int controlled_dofs() const;

  /// First DoF row of modality `i`.
  int offset(std::size_t i) const { return offsets_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;
  /// Modality index that owns DoF `dof`.
  std::size_t modality_of(int dof) const;
  Role role_of(int dof) const { return modalities_[modality_of(dof)].role; }

  /// DoF rows belonging to the named modalities.
  std::vector<int> dofs_of(const std::vector<std::string>& names) const;
  std::vector<int> controlled_dof_indices() const;
  std::vector<std::string> observed_names() const;

  /// Stable FNV-1a hash over the canonical "name:count:role;" encoding.
  std::uint64_t hash() const;

  bool operator==(const ModalityLayout& other) const {
    return modalities_ == other.modalities_;
  }

 private:
  std::vector<Modality> modalities_;
  std::vector<int> offsets_;
  int total_ = 0;
};

/// One recorded interaction: D rows (layout order) by T columns (ticks).
/// Column c holds the sample for tick c + 1.
struct Demonstration {
  ModalityLayout layout;
  Eigen::MatrixXd samples;
  double sample_rate = 60.0;

  int duration() const { return static_cast<int>(samples.cols()); }
  int dofs() const { return static_cast<int>(samples.rows()); }

  /// Throws data_error on shape mismatch, T < 2, NaN, or bad rate.
  void validate() const;
};

struct Observation {
  Eigen::VectorXd values;
  std::vector<bool> mask;  // true = dimension observed this tick

  static Observation unobserved(int dofs);
  std::vector<int> observed_indices() const;
  bool any() const;
};

struct TimedObservation {
  int tick = 0;
  Observation observation;
};

/// Index constants for the augmented state [phase, phase velocity, weights].
inline constexpr int kPhase = 0;
inline constexpr int kPhaseVelocity = 1;
inline constexpr int kWeightOffset = 2;

struct LatentState {
  double phase = 0.0;
  double phase_velocity = 0.0;
  Eigen::VectorXd weights;

  Eigen::VectorXd to_vector() const;
  static LatentState from_vector(const Eigen::Ref<const Eigen::VectorXd>& x);
};

/// E members stored column-wise: members().col(j) is member j's state.
class Ensemble {
 public:
  Ensemble() = default;
  explicit Ensemble(Eigen::MatrixXd members);

  int size() const { return static_cast<int>(members_.cols()); }
  int state_dim() const { return static_cast<int>(members_.rows()); }

  const Eigen::MatrixXd& members() const { return members_; }
  Eigen::MatrixXd& members() { return members_; }

 private:
  Eigen::MatrixXd members_;
};

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  int state_dim() const { return static_cast<int>(mean.size()); }
  /// Throws numerical_error if asymmetric beyond 1e-9 relative or a
  /// diagonal entry is negative.
  void validate() const;
};

/// Member mean, accumulated member by member in index order.
Eigen::VectorXd ensemble_mean(const Ensemble& ensemble);

/// Sample mean and 1/(E-1) sample covariance of the members, with the
/// covariance optionally scaled by `inflation`.
GaussianBelief ensemble_moments(const Ensemble& ensemble,
                                double inflation = 1.0);

/// Weighted moments with reliability-weight normalisation; reduces to
/// ensemble_moments for uniform weights.
GaussianBelief weighted_moments(const Ensemble& ensemble,
                                const Eigen::VectorXd& weights);

}  // namespace ebip
