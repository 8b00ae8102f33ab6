#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ebip/core.hpp"
#include "ebip/error.hpp"
#include "test_helpers.hpp"

using namespace ebip;

namespace {

Ensemble random_ensemble(int n, int e, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(n, e);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = nd(gen);
  return Ensemble(x);
}

// Two-pass covariance written independently of the library.
Eigen::MatrixXd oracle_covariance(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index e = x.cols();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < e; ++j) mu += x.col(j);
  mu /= static_cast<double>(e);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < e; ++j) s += (x(a, j) - mu[a]) * (x(b, j) - mu[b]);
      c(a, b) = s / static_cast<double>(e - 1);
    }
  return c;
}

}  // namespace

TEST(Layout, RejectsInvalidLayouts) {
  EXPECT_THROW(ModalityLayout({{"a", 1, Role::observed}}), Error);
  EXPECT_THROW(ModalityLayout({{"a", 1, Role::controlled}}), Error);
  EXPECT_THROW(ModalityLayout({{"a", 0, Role::observed}, {"b", 1, Role::controlled}}), Error);
  EXPECT_THROW(ModalityLayout({{"a", 1, Role::observed}, {"a", 1, Role::controlled}}), Error);
}

TEST(Layout, IndexesModalitiesContiguously) {
  ModalityLayout l({{"pose", 2, Role::observed},
                    {"joints", 3, Role::controlled},
                    {"ball", 1, Role::observed}});
  EXPECT_EQ(l.total_dofs(), 6);
  EXPECT_EQ(l.observed_dofs(), 3);
  EXPECT_EQ(l.controlled_dofs(), 3);
  EXPECT_EQ(l.offset(2), 5);
  EXPECT_EQ(l.modality_of(4), 1u);
  EXPECT_EQ(l.role_of(5), Role::observed);
  EXPECT_EQ(l.dofs_of({"ball", "pose"}), (std::vector<int>{5, 0, 1}));
  EXPECT_EQ(l.controlled_dof_indices(), (std::vector<int>{2, 3, 4}));
  EXPECT_EQ(l.observed_names(), (std::vector<std::string>{"pose", "ball"}));
  EXPECT_THROW(l.dofs_of({"head"}), Error);
}

TEST(Layout, HashDistinguishesLayouts) {
  ModalityLayout a({{"x", 1, Role::observed}, {"y", 1, Role::controlled}});
  ModalityLayout b({{"x", 2, Role::observed}, {"y", 1, Role::controlled}});
  ModalityLayout c({{"x", 1, Role::observed}, {"y", 1, Role::controlled}});
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash(), c.hash());
}

TEST(Demonstration, ValidateRejectsBadShapes) {
  Demonstration d;
  d.layout = fixtures::small_layout();
  d.samples = Eigen::MatrixXd::Zero(3, 1);
  EXPECT_THROW(d.validate(), Error);  // T < 2
  d.samples = Eigen::MatrixXd::Zero(2, 5);
  EXPECT_THROW(d.validate(), Error);  // wrong D
  d.samples = Eigen::MatrixXd::Zero(3, 5);
  d.samples(1, 2) = std::nan("");
  EXPECT_THROW(d.validate(), Error);
  d.samples(1, 2) = 0.0;
  EXPECT_NO_THROW(d.validate());
}

TEST(Observation, MaskHelpers) {
  Observation o = Observation::unobserved(4);
  EXPECT_FALSE(o.any());
  o.mask[1] = o.mask[3] = true;
  EXPECT_TRUE(o.any());
  EXPECT_EQ(o.observed_indices(), (std::vector<int>{1, 3}));
}

TEST(LatentState, VectorRoundTrip) {
  LatentState s{0.25, 0.01, Eigen::Vector3d(1, 2, 3)};
  const Eigen::VectorXd v = s.to_vector();
  ASSERT_EQ(v.size(), 5);
  EXPECT_EQ(v[kPhase], 0.25);
  EXPECT_EQ(v[kPhaseVelocity], 0.01);
  const LatentState back = LatentState::from_vector(v);
  EXPECT_EQ(back.weights, s.weights);
}

TEST(Ensemble, RejectsNonFinitePhase) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  x(kPhase, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(Ensemble{x}, Error);
}

TEST(Moments, IdenticalMembersGiveZeroCovariance) {
  Eigen::MatrixXd x = Eigen::Vector4d(0.1, 0.01, 2.0, -1.0).replicate(1, 5);
  const GaussianBelief b = ensemble_moments(Ensemble(x));
  EXPECT_EQ(b.covariance, Eigen::MatrixXd::Zero(4, 4));
  EXPECT_TRUE(b.mean.isApprox(x.col(0)));
}

TEST(Moments, TwoMemberHandExample) {
  Eigen::MatrixXd x(3, 2);
  x << 0, 1, 1, 1, 0, 0;
  const GaussianBelief b = ensemble_moments(Ensemble(x));
  EXPECT_DOUBLE_EQ(b.mean[kPhase], 0.5);
  EXPECT_DOUBLE_EQ(b.covariance(kPhase, kPhase), 0.5);
  EXPECT_EQ(b.covariance(kPhaseVelocity, kPhaseVelocity), 0.0);
}

TEST(Moments, MatchesIndependentOracle) {
  const Ensemble e = random_ensemble(7, 13, 3);
  const GaussianBelief b = ensemble_moments(e);
  EXPECT_LT(fixtures::rel_err(b.covariance, oracle_covariance(e.members())), 1e-12);
}

TEST(Moments, PermutationInvariant) {
  const Ensemble e = random_ensemble(6, 20, 11);
  std::vector<int> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), gen);
    Eigen::MatrixXd y(6, 20);
    for (int j = 0; j < 20; ++j) y.col(j) = e.members().col(perm[j]);
    const GaussianBelief a = ensemble_moments(e);
    const GaussianBelief b = ensemble_moments(Ensemble(y));
    EXPECT_LT((a.mean - b.mean).norm(), 1e-12);
    EXPECT_LT(fixtures::rel_err(b.covariance, a.covariance), 1e-12);
  }
}

TEST(Moments, CovarianceIsPsd) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Ensemble e = random_ensemble(10, 4 + static_cast<int>(seed), seed);
    const GaussianBelief b = ensemble_moments(e);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.covariance);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()));
    EXPECT_NO_THROW(b.validate());
  }
}

TEST(Moments, SingleMemberIsUndefined) {
  try {
    ensemble_moments(Ensemble(Eigen::MatrixXd::Zero(3, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "covariance_undefined");
  }
}

TEST(Moments, InflationScalesCovariance) {
  const Ensemble e = random_ensemble(4, 9, 1);
  const GaussianBelief a = ensemble_moments(e);
  const GaussianBelief b = ensemble_moments(e, 1.5);
  EXPECT_LT(fixtures::rel_err(b.covariance, 1.5 * a.covariance), 1e-14);
}

TEST(Moments, UniformWeightsReduceToSampleMoments) {
  const Ensemble e = random_ensemble(5, 8, 2);
  const GaussianBelief a = ensemble_moments(e);
  const GaussianBelief b = weighted_moments(e, Eigen::VectorXd::Constant(8, 1.0 / 8));
  EXPECT_LT((a.mean - b.mean).norm(), 1e-12);
  EXPECT_LT(fixtures::rel_err(b.covariance, a.covariance), 1e-12);
}

TEST(Belief, ValidateRejectsAsymmetry) {
  GaussianBelief b{Eigen::VectorXd::Zero(2), Eigen::Matrix2d::Identity()};
  EXPECT_NO_THROW(b.validate());
  b.covariance(0, 1) = 1e-3;
  EXPECT_THROW(b.validate(), Error);
  b.covariance(0, 1) = 0.0;
  b.covariance(1, 1) = -1.0;
  EXPECT_THROW(b.validate(), Error);
}
