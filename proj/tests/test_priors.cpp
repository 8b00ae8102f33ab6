#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "ebip/error.hpp"
#include "ebip/priors.hpp"
#include "test_helpers.hpp"

using namespace ebip;

namespace {

DemonstrationCorpus corpus_from(const Eigen::MatrixXd& w, const Eigen::VectorXd& l) {
  DemonstrationCorpus c;
  c.weights = w;
  c.reciprocal_lengths = l;
  return c;
}

DemonstrationCorpus random_corpus(int b, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd w(b, n);
  for (int i = 0; i < w.size(); ++i) w.data()[i] = nd(gen);
  Eigen::VectorXd l(n);
  for (int i = 0; i < n; ++i) l[i] = 1.0 / (80 + 5 * i);
  return corpus_from(w, l);
}

std::vector<Demonstration> random_demos(int n, std::uint64_t seed) {
  std::vector<Demonstration> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(fixtures::smooth_demo(fixtures::small_layout(), 40 + 7 * i, 1.0 + 0.1 * i, 0.05,
                                       seed * 100 + static_cast<std::uint64_t>(i)));
  }
  return out;
}

BasisModel rbf_model(int count) {
  return BasisModel(fixtures::small_layout(),
                    std::vector<BasisFamily>(3, BasisFamily::gaussian_rbf(count)));
}

}  // namespace

TEST(Corpus, BuildsWeightsAndReciprocalLengths) {
  const auto demos = random_demos(4, 1);
  const BasisModel m = rbf_model(6);
  const DemonstrationCorpus c = build_corpus(demos, m);
  ASSERT_EQ(c.size(), 4);
  ASSERT_EQ(c.weight_count(), 18);
  EXPECT_EQ(c.layout_hash, m.layout().hash());
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(c.reciprocal_lengths[i], 1.0 / demos[i].duration());
    EXPECT_EQ(c.weights.col(i), fit_demonstration(demos[i], m, kDefaultRidge));
  }
}

TEST(Corpus, StreamRoundTripIsExact) {
  DemonstrationCorpus c = random_corpus(5, 7, 2);
  c.layout_hash = 0xfeedbeefcafe1234ULL;
  std::stringstream ss;
  write_corpus(ss, c);
  const DemonstrationCorpus back = read_corpus(ss);
  EXPECT_EQ(back.weights, c.weights);
  EXPECT_EQ(back.reciprocal_lengths, c.reciprocal_lengths);
  EXPECT_EQ(back.layout_hash, c.layout_hash);
}

TEST(GaussianPrior, PhaseVelocityIsMeanReciprocalLength) {
  const DemonstrationCorpus c =
      corpus_from(Eigen::MatrixXd::Zero(2, 2), Eigen::Vector2d(1.0 / 50, 1.0 / 100));
  const GaussianBelief b = build_gaussian_prior(c);
  EXPECT_DOUBLE_EQ(b.mean[kPhaseVelocity], 0.015);
  EXPECT_EQ(b.mean[kPhase], 0.0);
  EXPECT_EQ(b.covariance(kPhase, kPhase), 1e-6);
  EXPECT_DOUBLE_EQ(b.covariance(kPhaseVelocity, kPhaseVelocity), 2.0 * 0.005 * 0.005);
  EXPECT_EQ(b.covariance(kPhase, kPhaseVelocity), 0.0);
}

TEST(GaussianPrior, IdenticalDemosGiveZeroWeightCovariance) {
  const Eigen::VectorXd w = Eigen::Vector3d(1, -2, 0.5);
  const DemonstrationCorpus c = corpus_from(w.replicate(1, 4), Eigen::VectorXd::Constant(4, 0.01));
  const GaussianBelief b = build_gaussian_prior(c);
  EXPECT_EQ(b.mean.tail(3), w);
  EXPECT_EQ(b.covariance.bottomRightCorner(3, 3), Eigen::MatrixXd::Zero(3, 3));
  EXPECT_EQ(b.covariance.block(0, 2, 2, 3), Eigen::MatrixXd::Zero(2, 3));
}

TEST(GaussianPrior, NeedsTwoDemonstrations) {
  EXPECT_THROW(build_gaussian_prior(random_corpus(3, 1, 1)), Error);
}

TEST(GaussianPrior, WeightBlockMatchesDirectEnsembleMoments) {
  const DemonstrationCorpus c = random_corpus(6, 9, 3);
  RandomSource rng(1);
  const Ensemble e = sample_direct(c, 9, rng);
  const GaussianBelief from_ensemble = ensemble_moments(e);
  const GaussianBelief prior = build_gaussian_prior(c);
  EXPECT_LE(fixtures::rel_err(from_ensemble.covariance.bottomRightCorner(6, 6),
                             prior.covariance.bottomRightCorner(6, 6)),
            1e-12);
}

TEST(Gmm, SingleComponentIsTheMaximumLikelihoodGaussian) {
  const DemonstrationCorpus c = random_corpus(3, 30, 4);
  GmmOptions opt;
  opt.component_candidates = {1};
  const GmmPrior g = fit_gmm(c, opt, 7);
  ASSERT_EQ(g.components(), 1);
  EXPECT_DOUBLE_EQ(g.mixing[0], 1.0);
  const Eigen::VectorXd mu = c.weights.rowwise().mean();
  const Eigen::MatrixXd dev = c.weights.colwise() - mu;
  const Eigen::MatrixXd mle = dev * dev.transpose() / 30.0;
  EXPECT_LE((g.means[0] - mu).norm(), 1e-12);
  EXPECT_LE(fixtures::rel_err(g.covariances[0], mle), 1e-10);
}

TEST(Gmm, RecoversTwoSeparatedClusters) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  const Eigen::Vector2d m1(0, 0), m2(10, 10);
  Eigen::MatrixXd w(2, 40);
  for (int i = 0; i < 40; ++i) {
    const Eigen::Vector2d center = i % 2 ? m2 : m1;
    w.col(i) = center + 0.5 * Eigen::Vector2d(nd(gen), nd(gen));
  }
  GmmOptions opt;
  opt.component_candidates = {1, 2};
  const GmmPrior g = fit_gmm(corpus_from(w, Eigen::VectorXd::Constant(40, 0.01)), opt, 11);
  ASSERT_EQ(g.components(), 2);
  const double sep = (m2 - m1).norm();
  const bool order = (g.means[0] - m1).norm() < (g.means[1] - m1).norm();
  EXPECT_LT((g.means[order ? 0 : 1] - m1).norm(), 0.1 * sep);
  EXPECT_LT((g.means[order ? 1 : 0] - m2).norm(), 0.1 * sep);
  EXPECT_NEAR(g.mixing[0] + g.mixing[1], 1.0, 1e-12);
}

TEST(Gmm, DeterministicGivenSeed) {
  const DemonstrationCorpus c = random_corpus(2, 25, 6);
  const GmmPrior a = fit_gmm(c, {}, 3);
  const GmmPrior b = fit_gmm(c, {}, 3);
  ASSERT_EQ(a.components(), b.components());
  for (int k = 0; k < a.components(); ++k) {
    EXPECT_EQ(a.means[k], b.means[k]);
    EXPECT_EQ(a.covariances[k], b.covariances[k]);
  }
}

TEST(Gmm, FewerDemosThanWeightsIsNonPsdAndFallsBack) {
  const DemonstrationCorpus c = random_corpus(12, 5, 7);
  try {
    fit_gmm(c, {}, 1);
    FAIL() << "expected non_psd_prior";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "non_psd_prior");
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
  }
  const GmmFit fit = fit_gmm_or_fallback(c, {}, 1);
  EXPECT_TRUE(fit.fell_back);
  EXPECT_FALSE(fit.reason.empty());
  ASSERT_EQ(fit.prior.components(), 1);
  const GaussianBelief prior = build_gaussian_prior(c);
  EXPECT_LE(fixtures::rel_err(fit.prior.covariances[0], prior.covariance.bottomRightCorner(12, 12)),
            1e-12);
}

TEST(DirectSampling, FullEnsembleIsThePermutedCorpus) {
  const DemonstrationCorpus c = random_corpus(4, 8, 8);
  RandomSource rng(2);
  const Ensemble e = sample_direct(c, 8, rng);
  std::vector<bool> seen(8, false);
  for (int j = 0; j < 8; ++j) {
    EXPECT_EQ(e.members()(kPhase, j), 0.0);
    int match = -1;
    for (int i = 0; i < 8; ++i)
      if (c.weights.col(i) == e.members().col(j).tail(4)) match = i;
    ASSERT_GE(match, 0);
    EXPECT_FALSE(seen[match]);
    seen[match] = true;
    EXPECT_EQ(e.members()(kPhaseVelocity, j), c.reciprocal_lengths[match]);
  }
}

TEST(DirectSampling, SingleDemoSingleMember) {
  const DemonstrationCorpus c = random_corpus(3, 1, 9);
  RandomSource rng(0);
  const Ensemble e = sample_direct(c, 1, rng);
  ASSERT_EQ(e.size(), 1);
  EXPECT_EQ(e.members()(kPhase, 0), 0.0);
  EXPECT_EQ(e.members()(kPhaseVelocity, 0), c.reciprocal_lengths[0]);
  EXPECT_EQ(e.members().col(0).tail(3), c.weights.col(0));
}

TEST(DirectSampling, OversizedEnsembleNeedsReplacementOrGmm) {
  const DemonstrationCorpus c = random_corpus(3, 4, 10);
  RandomSource rng(0);
  try {
    sample_direct(c, 5, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "ensemble_size");
  }
  EXPECT_EQ(sample_direct(c, 9, rng, true).size(), 9);
}

TEST(DirectSampling, ReproducibleBitExactly) {
  const DemonstrationCorpus c = random_corpus(3, 20, 11);
  RandomSource a(42), b(42);
  EXPECT_EQ(sample_direct(c, 10, a).members(), sample_direct(c, 10, b).members());
}

TEST(GmmSampling, StartsAtPhaseZeroWithPositiveVelocity) {
  const DemonstrationCorpus c = random_corpus(3, 20, 12);
  const GmmPrior g = gaussian_gmm(c);
  RandomSource rng(3);
  const Ensemble e = sample_gmm(c, g, 500, rng);
  ASSERT_EQ(e.size(), 500);
  for (int j = 0; j < 500; ++j) {
    EXPECT_EQ(e.members()(kPhase, j), 0.0);
    EXPECT_GT(e.members()(kPhaseVelocity, j), 0.0);
  }
  const GaussianBelief m = ensemble_moments(e);
  EXPECT_LE((m.mean.tail(3) - g.means[0]).norm(), 0.3);
}

TEST(Noise, PerfectlyRepresentableDemosGiveZero) {
  ModalityLayout layout({{"a", 1, Role::observed}, {"b", 1, Role::controlled}});
  std::vector<Demonstration> demos;
  for (int t : {20, 30}) {
    Demonstration d;
    d.layout = layout;
    d.samples.resize(2, t);
    for (int c = 0; c < t; ++c) {
      const double phi = static_cast<double>(c + 1) / t;
      d.samples(0, c) = 1.0 + 2.0 * phi;
      d.samples(1, c) = -phi * phi;
    }
    demos.push_back(d);
  }
  const BasisModel m(layout, {BasisFamily::polynomial(1), BasisFamily::polynomial(2)});
  std::vector<Eigen::VectorXd> w;
  for (const auto& d : demos) w.push_back(fit_demonstration(d, m, 0.0));
  const Eigen::VectorXd r = estimate_measurement_noise(demos, m, w);
  EXPECT_LT(r.maxCoeff(), 1e-25);
}

TEST(Noise, TwoPointExample) {
  ModalityLayout layout({{"a", 1, Role::observed}, {"b", 1, Role::controlled}});
  Demonstration d;
  d.layout = layout;
  d.samples.resize(2, 2);
  d.samples << 1, 3, 5, 5;
  const BasisModel m(layout, {BasisFamily::polynomial(0), BasisFamily::polynomial(0)});
  const Eigen::VectorXd w = fit_demonstration(d, m, 0.0);
  EXPECT_NEAR(w[0], 2.0, 1e-14);
  const Eigen::VectorXd r = estimate_measurement_noise({d}, m, {w});
  EXPECT_NEAR(r[0], 1.0, 1e-14);
  EXPECT_NEAR(r[1], 0.0, 1e-28);
}

TEST(Noise, MatchesResidualOracleAndIgnoresOrder) {
  auto demos = random_demos(5, 13);
  const BasisModel m = rbf_model(7);
  std::vector<Eigen::VectorXd> w;
  for (const auto& d : demos) w.push_back(fit_demonstration(d, m, kDefaultRidge));
  const Eigen::VectorXd r = estimate_measurement_noise(demos, m, w);

  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(3);
  for (const auto& d : demos) {
    const Eigen::VectorXd phases = demonstration_phases(d.duration());
    for (int dof = 0; dof < 3; ++dof) {
      const Eigen::MatrixXd phi = design_matrix(m.family(dof), phases);
      const Eigen::VectorXd y = d.samples.row(dof).transpose();
      const Eigen::MatrixXd gram =
          phi.transpose() * phi + kDefaultRidge * Eigen::MatrixXd::Identity(phi.cols(), phi.cols());
      const Eigen::VectorXd wd = gram.ldlt().solve(phi.transpose() * y);
      oracle[dof] += (y - phi * wd).squaredNorm() / d.duration();
    }
  }
  oracle /= 5.0;
  for (int dof = 0; dof < 3; ++dof) EXPECT_NEAR(r[dof], oracle[dof], 1e-8 * oracle[dof]);
  EXPECT_TRUE((r.array() >= 0.0).all());

  std::reverse(demos.begin(), demos.end());
  std::reverse(w.begin(), w.end());
  EXPECT_LE((estimate_measurement_noise(demos, m, w) - r).norm(), 1e-15);
}

TEST(Training, BundlesModelCorpusAndNoise) {
  const auto demos = random_demos(4, 14);
  const TrainedModel t = train_model(demos, rbf_model(6));
  EXPECT_EQ(t.corpus.size(), 4);
  EXPECT_EQ(t.noise.size(), 3);
  EXPECT_TRUE((t.noise.array() > 0.0).all());
}
