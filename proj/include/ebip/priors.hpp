#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ebip/basis.hpp"
#include "ebip/core.hpp"
#include "ebip/random.hpp"

namespace ebip {

/// Fitted weights of N demonstrations (columns of `weights`, B x N) and their
/// reciprocal lengths 1 / T_i.
struct DemonstrationCorpus {
  Eigen::MatrixXd weights;
  Eigen::VectorXd reciprocal_lengths;
  std::uint64_t layout_hash = 0;

  int size() const { return static_cast<int>(weights.cols()); }
  int weight_count() const { return static_cast<int>(weights.rows()); }
  void validate() const;
};

DemonstrationCorpus build_corpus(const std::vector<Demonstration>& demos, const BasisModel& model,
                                 double ridge = kDefaultRidge);

/// Corpus file: JSON header line {"B","N","layout_hash"}, B CSV rows of the
/// weight matrix, then one CSV row of reciprocal lengths.
void write_corpus(std::ostream& out, const DemonstrationCorpus& corpus);
DemonstrationCorpus read_corpus(std::istream& in);

/// Gaussian prior: mean [0, mean(l), mean(W)], block-diagonal covariance with
/// Var(phase) = `phase_variance`, Var(phase velocity) = sample variance of l
/// and the sample covariance of W.
GaussianBelief build_gaussian_prior(const DemonstrationCorpus& corpus,
                                    double phase_variance = 1e-6);

struct GmmPrior {
  std::vector<double> mixing;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  double log_likelihood = 0.0;
  double bic = 0.0;
  int iterations = 0;

  int components() const { return static_cast<int>(mixing.size()); }
};

struct GmmOptions {
  std::vector<int> component_candidates{1, 2, 3};
  int max_iterations = 200;
  double tolerance = 1e-6;
  /// A component is rejected when lambda_min <= psd_tolerance * lambda_max.
  double psd_tolerance = 1e-12;
  int kmeans_iterations = 10;
};

/// EM over the columns of W, k-means++ initialised, K picked by BIC.
/// Throws numerical_error("non_psd_prior") when no candidate K yields
/// positive-definite component covariances.
GmmPrior fit_gmm(const DemonstrationCorpus& corpus, const GmmOptions& options,
                 std::uint64_t seed);

/// Single component holding the sample mean and covariance of W.
GmmPrior gaussian_gmm(const DemonstrationCorpus& corpus);

struct GmmFit {
  GmmPrior prior;
  bool fell_back = false;
  std::string reason;
};

/// fit_gmm, falling back to gaussian_gmm on the non-PSD failure.
GmmFit fit_gmm_or_fallback(const DemonstrationCorpus& corpus, const GmmOptions& options,
                           std::uint64_t seed);

enum class SampleMode { direct, gmm };

/// Direct mode: E demonstrations drawn uniformly (without replacement unless
/// `with_replacement`), each member [0, 1/T_i, w_i].
Ensemble sample_direct(const DemonstrationCorpus& corpus, int members, RandomSource& rng,
                       bool with_replacement = false);

/// GMM mode: weights from the mixture, phase velocity ~ N(mean(l), var(l))
/// redrawn until positive, phase 0.
Ensemble sample_gmm(const DemonstrationCorpus& corpus, const GmmPrior& gmm, int members,
                    RandomSource& rng);

/// Diagonal of R: per-dimension mean over demos of the mean squared
/// regression residual.
Eigen::VectorXd estimate_measurement_noise(const std::vector<Demonstration>& demos,
                                           const BasisModel& model,
                                           const std::vector<Eigen::VectorXd>& weights);

/// Everything inference needs from a training set.
struct TrainedModel {
  BasisModel model;
  DemonstrationCorpus corpus;
  Eigen::VectorXd noise;  // diagonal of R
};

TrainedModel train_model(const std::vector<Demonstration>& demos, const BasisModel& model,
                         double ridge = kDefaultRidge);

}  // namespace ebip
