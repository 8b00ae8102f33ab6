#include <gtest/gtest.h>

#include "ebip/error.hpp"
#include "ebip/priors.hpp"
#include "ebip/sim.hpp"

using namespace ebip;

TEST(Scenario, DefaultToyThrowLayout) {
  const ScenarioSpec s = toy_throw_scenario();
  const ModalityLayout l = s.layout();
  EXPECT_EQ(l.total_dofs(), 12);
  EXPECT_EQ(l.controlled_dofs(), 4);
  EXPECT_EQ(l.dofs_of({"ball"}), (std::vector<int>{5, 6, 7}));
  ASSERT_EQ(s.occlusions.size(), 1u);
  EXPECT_EQ(s.occlusions[0].modality, "ball");
  EXPECT_DOUBLE_EQ(s.occlusions[0].end, 0.43);
  EXPECT_DOUBLE_EQ(s.release.lo, 0.43);
}

TEST(Scenario, JsonRoundTripAndValidation) {
  const ScenarioSpec s = toy_throw_scenario();
  const ScenarioSpec back = ScenarioSpec::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
  ScenarioSpec bad = s;
  bad.occlusions[0].end = 1.5;
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.channels[0].noise_std = -1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.min_duration = 1;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Generate, SameSeedSameDemo) {
  const ScenarioSpec s = toy_throw_scenario();
  const Demonstration a = generate_demo(s, 12);
  const Demonstration b = generate_demo(s, 12);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(generate_demo(s, 13).samples.sum(), a.samples.sum());
  EXPECT_GE(a.duration(), s.min_duration);
  EXPECT_LE(a.duration(), s.max_duration);
  EXPECT_NO_THROW(a.validate());
}

TEST(Generate, NoiselessChannelsAreTheUnderlyingFunctions) {
  ScenarioSpec s = toy_throw_scenario();
  for (auto& c : s.channels) c.noise_std = 0.0;
  TaskParameters task;
  const Demonstration d = generate_demo(s, 3, &task);
  for (int t = 0; t < d.duration(); ++t) {
    const Eigen::VectorXd y = scenario_signal(s, task, static_cast<double>(t + 1) / d.duration());
    EXPECT_EQ(d.samples.col(t), y);
  }
}

TEST(Generate, ControlledChannelsDependOnTask) {
  const ScenarioSpec s = toy_throw_scenario();
  const auto joints = s.layout().controlled_dof_indices();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RandomSource rng(seed);
    const TaskParameters a = sample_task(s, rng);
    const TaskParameters b = sample_task(s, rng);
    double sup = 0.0;
    for (double phi = 0.0; phi <= 1.0; phi += 0.01) {
      const Eigen::VectorXd ya = scenario_signal(s, a, phi);
      const Eigen::VectorXd yb = scenario_signal(s, b, phi);
      for (int d : joints) sup = std::max(sup, std::abs(ya[d] - yb[d]));
    }
    EXPECT_GT(sup, 0.0);
  }
}

TEST(Streams, TruncationAndOcclusion) {
  const ScenarioSpec s = toy_throw_scenario();
  const Demonstration d = generate_demo(s, 5);
  const int t = d.duration();
  EXPECT_TRUE(stream_from_demo(d, s.occlusions, 0.0).empty());
  for (double frac : {0.1, 0.43, 0.82, 1.0}) {
    const auto stream = stream_from_demo(d, s.occlusions, frac);
    ASSERT_EQ(static_cast<int>(stream.size()), observed_ticks(t, frac));
    EXPECT_EQ(observed_ticks(t, frac), static_cast<int>(std::floor(frac * t + 1e-9)));
  }
  const auto stream = stream_from_demo(d, s.occlusions, 1.0);
  const auto ball = s.layout().dofs_of({"ball"});
  const auto joints = s.layout().controlled_dof_indices();
  for (const auto& rec : stream) {
    const double phi = static_cast<double>(rec.tick) / t;
    for (int dof = 0; dof < 12; ++dof) {
      const bool is_ball = std::find(ball.begin(), ball.end(), dof) != ball.end();
      const bool is_joint = std::find(joints.begin(), joints.end(), dof) != joints.end();
      const bool expected = !is_joint && !(is_ball && phi <= 0.43);
      EXPECT_EQ(rec.observation.mask[dof], expected) << "tick " << rec.tick << " dof " << dof;
    }
    EXPECT_EQ(rec.observation.values, d.samples.col(rec.tick - 1));
  }
}

TEST(Streams, SubsetMasksOtherModalities) {
  const ScenarioSpec s = toy_throw_scenario();
  const Demonstration d = generate_demo(s, 6);
  const auto stream = stream_from_demo(d, {}, 1.0, {"pose"});
  for (const auto& rec : stream) {
    for (int dof = 0; dof < 12; ++dof) EXPECT_EQ(rec.observation.mask[dof], dof < 2);
  }
  EXPECT_THROW(stream_from_demo(d, {}, 1.0, {"tail"}), Error);
}

TEST(Streams, GenerateStreamKeepsGroundTruth) {
  const ScenarioSpec s = toy_throw_scenario();
  const GeneratedStream g = generate_stream(s, 8, 0.0);
  EXPECT_TRUE(g.observations.empty());
  EXPECT_EQ(g.truth.samples, generate_demo(s, 8).samples);
}

TEST(Learnability, FittedNoiseStaysBelowTwiceConfiguredVariance) {
  const ScenarioSpec s = toy_throw_scenario();
  const ModalityLayout layout = s.layout();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::vector<Demonstration> demos;
    for (int i = 0; i < 4; ++i) demos.push_back(generate_demo(s, derive_seed(seed, 900 + i)));
    const BasisModel m = select_basis(demos, {default_candidates()});
    const TrainedModel t = train_model(demos, m);
    for (int d = 0; d < 12; ++d) {
      const double sigma = s.channels[layout.modality_of(d)].noise_std;
      EXPECT_LT(t.noise[d], 2.0 * sigma * sigma) << "seed " << seed << " dof " << d;
    }
  }
}
