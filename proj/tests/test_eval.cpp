#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "ebip/error.hpp"
#include "ebip/eval.hpp"
#include "ebip/sim.hpp"

using namespace ebip;

namespace {

struct Corpus {
  ScenarioSpec spec = toy_throw_scenario();
  std::vector<Demonstration> demos;
  BasisModel model;

  explicit Corpus(int n) {
    for (int i = 0; i < n; ++i) demos.push_back(generate_demo(spec, derive_seed(21, static_cast<std::uint64_t>(i))));
    model = select_basis(demos, {default_candidates()});
  }
};

const Corpus& corpus() {
  static const Corpus c(12);
  return c;
}

EvalOptions options() {
  EvalOptions o;
  o.folds = 4;
  o.seed = 3;
  o.occlusions = corpus().spec.occlusions;
  o.threads = 1;
  return o;
}

}  // namespace

TEST(Folds, PartitionAndSizes) {
  for (int n : {10, 11, 19, 50}) {
    const auto folds = make_folds(n, 10, 7);
    ASSERT_EQ(folds.size(), 10u);
    std::set<int> seen;
    int total = 0;
    int lo = n;
    int hi = 0;
    for (const auto& f : folds) {
      total += static_cast<int>(f.size());
      lo = std::min(lo, static_cast<int>(f.size()));
      hi = std::max(hi, static_cast<int>(f.size()));
      EXPECT_TRUE(std::is_sorted(f.begin(), f.end()));
      seen.insert(f.begin(), f.end());
    }
    EXPECT_EQ(total, n);
    EXPECT_EQ(static_cast<int>(seen.size()), n);
    EXPECT_LE(hi - lo, 1);
  }
  for (const auto& f : make_folds(10, 10, 1)) EXPECT_EQ(f.size(), 1u);
  EXPECT_EQ(make_folds(30, 10, 5), make_folds(30, 10, 5));
  EXPECT_NE(make_folds(30, 10, 5), make_folds(30, 10, 6));
  EXPECT_THROW(make_folds(5, 10, 0), Error);
  EXPECT_THROW(make_folds(5, 1, 0), Error);
}

TEST(Folds, EnsembleCap) {
  EXPECT_EQ(ensemble_cap(221, 10), 198);
  EXPECT_EQ(ensemble_cap(50, 10), 45);
}

TEST(Evaluate, PerfectPredictorScoresZero) {
  const auto& c = corpus();
  const auto report = kfold_evaluate(c.demos, c.model, {perfect_method()}, options());
  ASSERT_EQ(report.cells.size(), 2u);
  for (const auto& cell : report.cells) {
    EXPECT_EQ(cell.joint_mean, 0.0);
    EXPECT_EQ(cell.target_mean, 0.0);
    EXPECT_EQ(cell.failures, 0);
    EXPECT_EQ(cell.joint_mse.size(), c.demos.size());
  }
  EXPECT_EQ(std::accumulate(report.fold_sizes.begin(), report.fold_sizes.end(), 0), 12);
}

TEST(Evaluate, CellCountIsMethodsTimesSubsetsTimesFractions) {
  const auto& c = corpus();
  EvalOptions o = options();
  o.fractions = {0.82};
  auto report = kfold_evaluate(c.demos, c.model, {filter_method(FilterKind::bip)}, o);
  EXPECT_EQ(report.cells.size(), 1u);
  o.subsets = {{}, {"pose"}, {"pose", "ball"}};
  o.fractions = {0.43, 0.82};
  report = kfold_evaluate(c.demos, c.model,
                          {filter_method(FilterKind::bip), filter_method(FilterKind::ebip)}, o);
  EXPECT_EQ(report.cells.size(), 12u);
  EXPECT_NO_THROW(report.cell("ebip", {"pose"}, 0.43));
}

TEST(Evaluate, SameSeedSameReport) {
  const auto& c = corpus();
  const std::vector<EvalMethod> methods{filter_method(FilterKind::ebip),
                                        filter_method(FilterKind::pf)};
  EvalOptions serial = options();
  EvalOptions threaded = options();
  threaded.threads = 3;
  const auto a = report_to_json(kfold_evaluate(c.demos, c.model, methods, serial));
  const auto b = report_to_json(kfold_evaluate(c.demos, c.model, methods, threaded));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Evaluate, MeanIsMeanOfFoldMeans) {
  const auto& c = corpus();
  const auto report = kfold_evaluate(c.demos, c.model, {filter_method(FilterKind::bip)}, options());
  const auto& cell = report.cells.front();
  ASSERT_EQ(cell.fold_joint_mse.size(), 4u);
  double m = 0.0;
  for (double v : cell.fold_joint_mse) m += v / 4.0;
  EXPECT_NEAR(cell.joint_mean, m, 1e-15);
  EXPECT_GT(cell.joint_se, 0.0);
}

TEST(Evaluate, ConfigErrors) {
  const auto& c = corpus();
  EvalOptions o = options();
  o.subsets = {{"joints"}};
  try {
    kfold_evaluate(c.demos, c.model, {perfect_method()}, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_EQ(e.code(), "subset_mismatch");
  }
  o = options();
  o.fractions = {1.5};
  EXPECT_THROW(kfold_evaluate(c.demos, c.model, {perfect_method()}, o), Error);
  o = options();
  o.scored_joints = 9;
  EXPECT_THROW(kfold_evaluate(c.demos, c.model, {perfect_method()}, o), Error);
}

TEST(Evaluate, TableAndJsonCarryLabels) {
  const auto& c = corpus();
  const auto report = kfold_evaluate(c.demos, c.model, {perfect_method()}, options());
  std::ostringstream table;
  write_report_table(table, report);
  EXPECT_NE(table.str().find("@43%"), std::string::npos);
  EXPECT_NE(table.str().find("@82%"), std::string::npos);
  const auto j = report_to_json(report);
  EXPECT_EQ(j.at("demos").get<int>(), 12);
  EXPECT_FALSE(j.dump().find("tick_seconds") != std::string::npos);
}

TEST(Curve, HighlightsDefaultEnsembleSize) {
  const auto& c = corpus();
  InteractionConfig base;
  base.with_replacement = true;
  EvalOptions o = options();
  o.fractions = {0.82};
  const auto curve = accuracy_vs_ensemble(c.demos, c.model, {4, 80}, o, FilterKind::ebip, base);
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_FALSE(curve[0].highlighted);
  EXPECT_TRUE(curve[1].highlighted);
  EXPECT_EQ(curve[1].ensemble_size, 80);
  EXPECT_THROW(accuracy_vs_ensemble(c.demos, c.model, {80}, o), Error);
  EXPECT_THROW(accuracy_vs_ensemble(c.demos, c.model, {4}, o, FilterKind::bip), Error);
}

TEST(Bench, NeedsFourIncreasingDimensions) {
  BenchOptions b;
  b.dims = {64, 128};
  try {
    runtime_benchmark(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "too_few_dims");
  }
  b.dims = {64, 128, 128, 256};
  EXPECT_THROW(runtime_benchmark(b), Error);
}

TEST(Bench, SmallRunProducesFiniteSlope) {
  BenchOptions b;
  b.dims = {32, 48, 64, 96};
  b.trials = 3;
  b.ensemble_size = 8;
  const auto r = runtime_benchmark(b);
  ASSERT_EQ(r.points.size(), 4u);
  EXPECT_TRUE(std::isfinite(r.slope));
  for (const auto& p : r.points) EXPECT_GT(p.median_seconds, 0.0);
  EXPECT_FALSE(scaling_to_json(r, false).dump().find("median_seconds") != std::string::npos);
}
