#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ebip/basis.hpp"
#include "ebip/error.hpp"
#include "ebip/eval.hpp"
#include "ebip/interaction.hpp"
#include "ebip/io.hpp"

namespace ebip::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";

std::string demo_file_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "demo_%04d.csv", i);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw data_error("io", "cannot create directory " + dir.string());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

ScenarioSpec load_scenario(const std::string& path) {
  ScenarioSpec spec = path.empty() ? toy_throw_scenario() : ScenarioSpec::from_json(load_json(path));
  spec.validate();
  return spec;
}

std::vector<std::vector<BasisFamily>> load_candidates(const std::string& path,
                                                      const ModalityLayout& layout) {
  if (path.empty()) return {default_candidates()};
  return candidates_from_json(load_json(path), layout);
}

// "all" (or an empty string) selects every observed modality.
std::vector<std::string> parse_subset(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty() && item != "all") out.push_back(item);
  }
  return out;
}

struct FilterFlags {
  std::string filter = "ebip";
  int ensemble_size = 0;
  double q = TransitionModel{}.q;
  double dt = TransitionModel{}.dt;
  bool with_replacement = false;
  double phase_variance = 1e-6;

  void add(CLI::App* app) {
    app->add_option("--filter", filter, "bip | ebip | ebip_minus | pf")->capture_default_str();
    app->add_option("--ensemble-size,-E", ensemble_size,
                    "ensemble size (0: N for direct sampling, 80 for the mixture prior)")
        ->capture_default_str();
    app->add_option("--q", q, "process-noise intensity")->capture_default_str();
    app->add_option("--dt", dt, "tick length")->capture_default_str();
    app->add_flag("--with-replacement", with_replacement,
                  "sample the direct ensemble with replacement (allows E > N)");
    app->add_option("--phase-variance", phase_variance, "prior phase variance (BIP)")
        ->capture_default_str();
  }

  InteractionConfig config(std::uint64_t seed) const {
    InteractionConfig c;
    c.filter = filter_kind_from_string(filter);
    c.ensemble_size = ensemble_size;
    if (ensemble_size != 0 && ensemble_size < 2) {
      throw config_error("ensemble_size", "ensemble size must be >= 2");
    }
    c.seed = seed;
    c.transition.q = q;
    c.transition.dt = dt;
    if (!(q >= 0.0) || !(dt > 0.0)) throw config_error("bad_transition", "need q >= 0 and dt > 0");
    c.with_replacement = with_replacement;
    c.phase_variance = phase_variance;
    return c;
  }
};

void cmd_simulate(const std::string& spec_path, int count, const std::string& out,
                  std::uint64_t seed) {
  if (count < 0) throw config_error("bad_count", "demo count must be >= 0");
  write_corpus_dir(out, load_scenario(spec_path), count, seed);
}

void cmd_stream(const std::string& spec_path, std::uint64_t seed, double fraction,
                const std::string& subset, const std::string& out, const std::string& truth) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw config_error("bad_fraction", "fraction must lie in (0, 1]");
  }
  const ScenarioSpec spec = load_scenario(spec_path);
  const Demonstration demo = generate_demo(spec, seed);
  const auto stream = stream_from_demo(demo, spec.occlusions, fraction, parse_subset(subset));
  std::ostringstream s;
  for (const auto& rec : stream) write_observation(s, rec);
  write_text_file(out, s.str());
  if (!truth.empty()) save_demonstration(truth, demo);
}

void cmd_train(const std::string& corpus_dir, const std::string& candidates, double ridge,
               const std::string& out) {
  const CorpusDir corpus = load_corpus_dir(corpus_dir);
  if (corpus.demos.size() < 2) {
    throw data_error("too_few_demos", "training needs at least 2 demonstrations, found " +
                                          std::to_string(corpus.demos.size()));
  }
  const ModalityLayout& layout = corpus.demos.front().layout;
  std::vector<CandidateScore> scores;
  const BasisModel model =
      select_basis(corpus.demos, load_candidates(candidates, layout), ridge, &scores);
  const TrainedModel trained = train_model(corpus.demos, model, ridge);
  nlohmann::json j = trained_to_json(trained);
  j["ridge"] = ridge;
  nlohmann::json sel = nlohmann::json::array();
  for (int d = 0; d < model.dofs(); ++d) {
    double bic = 0.0;
    const auto cands = load_candidates(candidates, layout);
    const auto& list = cands.size() == 1 ? cands[0] : cands[d];
    for (const auto& sc : scores) {
      if (sc.dof == d && list[sc.candidate] == model.family(d)) bic = sc.bic;
    }
    sel.push_back({{"dof", d}, {"family", model.family(d).describe()}, {"bic", bic}});
  }
  j["selection"] = std::move(sel);
  write_json(out, j);
}

void cmd_infer(const std::string& model_path, const std::string& stream_path,
               const FilterFlags& flags, std::uint64_t seed, int horizon, const std::string& out) {
  InteractionConfig config = flags.config(seed);
  config.horizon = horizon;
  const TrainedModel trained = trained_from_json(load_json(model_path));
  std::vector<TimedObservation> stream;
  if (!stream_path.empty()) {
    std::ifstream in(stream_path);
    if (!in) throw data_error("io", "cannot open " + stream_path);
    stream = read_observation_stream(in, trained.model.dofs());
  }
  std::ostringstream s;
  run_interaction(trained, config, stream,
                  [&](const TickEstimate& est) { write_tick_estimate(s, est); });
  write_text_file(out, s.str());
}

struct EvaluateArgs {
  std::string corpus;
  std::string candidates;
  std::string methods = "bip,ebip,ebip_minus,pf";
  std::vector<std::string> subsets;
  std::vector<double> fractions;
  int folds = 10;
  std::string target = "ball";
  int joints = 3;
  double ridge = kDefaultRidge;
  int threads = 0;
  std::vector<int> curve;
  std::string out;
};

void cmd_evaluate(const EvaluateArgs& a, const FilterFlags& flags, std::uint64_t seed) {
  const CorpusDir corpus = load_corpus_dir(a.corpus);
  if (corpus.demos.size() < 2) {
    throw data_error("too_few_demos", "evaluation needs at least 2 demonstrations");
  }
  const ModalityLayout& layout = corpus.demos.front().layout;
  const BasisModel model =
      select_basis(corpus.demos, load_candidates(a.candidates, layout), a.ridge);

  EvalOptions opt;
  opt.folds = a.folds;
  opt.seed = seed;
  opt.target_modality = a.target;
  opt.scored_joints = a.joints;
  opt.ridge = a.ridge;
  opt.threads = a.threads;
  if (corpus.scenario) opt.occlusions = corpus.scenario->occlusions;
  if (!a.fractions.empty()) opt.fractions = a.fractions;
  if (!a.subsets.empty()) {
    opt.subsets.clear();
    for (const auto& s : a.subsets) opt.subsets.push_back(parse_subset(s));
  }
  const InteractionConfig base = flags.config(seed);
  std::vector<EvalMethod> methods;
  for (const auto& name : parse_subset(a.methods)) {
    methods.push_back(filter_method(filter_kind_from_string(name), base));
  }

  ensure_dir(a.out);
  const InferenceReport report = kfold_evaluate(corpus.demos, model, methods, opt);
  write_json(fs::path(a.out) / "report.json", report_to_json(report));
  write_json(fs::path(a.out) / "timing.json", report_timing_json(report));
  std::ostringstream table;
  write_report_table(table, report);
  write_text_file(fs::path(a.out) / "report.txt", table.str());
  std::cout << table.str();

  if (!a.curve.empty()) {
    const FilterKind kind = base.filter == FilterKind::ebip_minus ? FilterKind::ebip_minus
                                                                   : FilterKind::ebip;
    const auto curve = accuracy_vs_ensemble(corpus.demos, model, a.curve, opt, kind, base);
    std::ostringstream c;
    write_curve_csv(c, curve);
    write_text_file(fs::path(a.out) / "curve.csv", c.str());
    std::ostringstream l;
    write_curve_latency_csv(l, curve);
    write_text_file(fs::path(a.out) / "curve_latency.csv", l.str());
  }
}

void cmd_bench(const BenchOptions& opt, int doubling_dim, const std::string& out) {
  const ScalingReport report = runtime_benchmark(opt);
  write_scaling_table(std::cout, report);
  nlohmann::json timing = scaling_to_json(report, true);
  if (doubling_dim > 0) {
    const double ratio = ensemble_doubling_ratio(doubling_dim, opt.ensemble_size, opt.trials,
                                                 opt.observed_dofs, opt.seed);
    timing["doubling"] = {{"dim", doubling_dim}, {"ensemble_size", opt.ensemble_size}, {"ratio", ratio}};
    std::cout << "E " << opt.ensemble_size << " -> " << 2 * opt.ensemble_size << " at n="
              << doubling_dim << ": x" << ratio << "\n";
  }
  if (!out.empty()) {
    ensure_dir(out);
    write_json(fs::path(out) / "bench.json", scaling_to_json(report, false));
    write_json(fs::path(out) / "bench_timing.json", timing);
  }
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerical: return 4;
  }
  return 4;
}

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

int report_error(const std::string& kind, const std::string& code, const std::string& message,
                 int status) {
  const nlohmann::json line = {{"error", code}, {"kind", kind}, {"message", message}};
  std::cerr << line.dump() << std::endl;
  return status;
}

}  // namespace

void write_corpus_dir(const fs::path& dir, const ScenarioSpec& spec, int count,
                      std::uint64_t seed) {
  ensure_dir(dir);
  nlohmann::json demos = nlohmann::json::array();
  for (int i = 0; i < count; ++i) {
    TaskParameters task;
    const Demonstration demo = generate_demo(spec, derive_seed(seed, static_cast<std::uint64_t>(i)), &task);
    const std::string file = demo_file_name(i);
    save_demonstration(dir / file, demo);
    demos.push_back({{"file", file},
                     {"duration", demo.samples.cols()},
                     {"task",
                      {{"release", task.release},
                       {"target", task.target},
                       {"apex", task.apex},
                       {"windup", task.windup}}}});
  }
  nlohmann::json manifest = {{"format", "ebip-corpus"},
                             {"version", 1},
                             {"seed", seed},
                             {"count", count},
                             {"layout", layout_to_json(spec.layout())},
                             {"scenario", spec.to_json()},
                             {"demos", std::move(demos)}};
  write_json(dir / kManifest, manifest);
}

CorpusDir load_corpus_dir(const fs::path& dir) {
  const nlohmann::json manifest = load_json(dir / kManifest);
  CorpusDir out;
  try {
    if (manifest.value("format", std::string()) != "ebip-corpus") {
      throw data_error("bad_manifest", dir.string() + " is not a corpus directory");
    }
    const ModalityLayout layout = layout_from_json(manifest.at("layout"));
    if (manifest.contains("scenario")) out.scenario = ScenarioSpec::from_json(manifest.at("scenario"));
    for (const auto& d : manifest.at("demos")) {
      Demonstration demo = load_demonstration(dir / d.at("file").get<std::string>());
      if (!(demo.layout == layout)) {
        throw data_error("layout_mismatch", d.at("file").get<std::string>() +
                                                " does not match the manifest layout");
      }
      out.demos.push_back(std::move(demo));
    }
    if (manifest.at("count").get<std::size_t>() != out.demos.size()) {
      throw data_error("bad_manifest", "manifest count disagrees with its demo list");
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error("bad_manifest", e.what());
  }
  return out;
}

nlohmann::json trained_to_json(const TrainedModel& trained) {
  const DemonstrationCorpus& c = trained.corpus;
  nlohmann::json weights = nlohmann::json::array();
  for (int i = 0; i < c.size(); ++i) {
    weights.push_back(std::vector<double>(c.weights.col(i).data(),
                                          c.weights.col(i).data() + c.weight_count()));
  }
  return {{"format", "ebip-model"},
          {"version", 1},
          {"basis", trained.model.to_json()},
          {"noise", std::vector<double>(trained.noise.data(),
                                        trained.noise.data() + trained.noise.size())},
          {"corpus",
           {{"layout_hash", hex64(c.layout_hash)},
            {"reciprocal_lengths",
             std::vector<double>(c.reciprocal_lengths.data(),
                                 c.reciprocal_lengths.data() + c.reciprocal_lengths.size())},
            {"weights", std::move(weights)}}}};
}

TrainedModel trained_from_json(const nlohmann::json& j) {
  TrainedModel t;
  try {
    if (j.value("format", std::string()) != "ebip-model") {
      throw data_error("bad_model", "not a model file");
    }
    t.model = BasisModel::from_json(j.at("basis"));
    const auto noise = j.at("noise").get<std::vector<double>>();
    t.noise = Eigen::Map<const Eigen::VectorXd>(noise.data(), static_cast<Eigen::Index>(noise.size()));
    const auto& c = j.at("corpus");
    t.corpus.layout_hash = std::stoull(c.at("layout_hash").get<std::string>(), nullptr, 16);
    const auto l = c.at("reciprocal_lengths").get<std::vector<double>>();
    t.corpus.reciprocal_lengths =
        Eigen::Map<const Eigen::VectorXd>(l.data(), static_cast<Eigen::Index>(l.size()));
    const auto w = c.at("weights").get<std::vector<std::vector<double>>>();
    t.corpus.weights.resize(t.model.weight_count(), static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (static_cast<int>(w[i].size()) != t.model.weight_count()) {
        throw data_error("bad_model", "weight vector " + std::to_string(i) + " has the wrong size");
      }
      t.corpus.weights.col(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::VectorXd>(w[i].data(), t.model.weight_count());
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error("bad_model", e.what());
  } catch (const std::invalid_argument&) {
    throw data_error("bad_model", "layout_hash is not hexadecimal");
  }
  if (t.corpus.layout_hash != t.model.layout().hash()) {
    throw data_error("layout_mismatch", "corpus layout hash does not match the basis model");
  }
  if (t.noise.size() != t.model.dofs()) {
    throw data_error("bad_model", "noise has the wrong number of DoFs");
  }
  t.corpus.validate();
  return t;
}

int run(int argc, char** argv) {
  CLI::App app{"Ensemble Bayesian Interaction Primitives"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for every random draw")->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "generate a synthetic demonstration corpus");
  std::string spec_path;
  int count = 50;
  std::string out;
  sim->add_option("--spec", spec_path, "scenario JSON (default: built-in toy throw)");
  sim->add_option("--count,-n", count, "number of demonstrations")->capture_default_str();
  sim->add_option("--out", out, "output directory")->required();
  sim->add_option("--seed", seed, "seed");

  auto* stream = app.add_subcommand("stream", "generate one held-out observation stream");
  double fraction = 1.0;
  std::string subset;
  std::string truth;
  stream->add_option("--spec", spec_path, "scenario JSON (default: built-in toy throw)");
  stream->add_option("--fraction", fraction, "observed fraction")->capture_default_str();
  stream->add_option("--subset", subset, "observed modalities, comma separated (default all)");
  stream->add_option("--out", out, "NDJSON stream path")->required();
  stream->add_option("--truth", truth, "also write the full demonstration here");
  stream->add_option("--seed", seed, "seed");

  auto* train = app.add_subcommand("train", "select bases and fit the latent model");
  std::string corpus_dir;
  std::string candidates;
  double ridge = kDefaultRidge;
  train->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train->add_option("--candidates", candidates, "basis candidates JSON");
  train->add_option("--ridge", ridge, "ridge penalty")->capture_default_str();
  train->add_option("--out", out, "model JSON path")->required();

  auto* infer = app.add_subcommand("infer", "filter an observation stream");
  FilterFlags infer_flags;
  std::string model_path;
  std::string stream_path;
  int horizon = -1;
  infer->add_option("--model", model_path, "model JSON")->required();
  infer->add_option("--stream", stream_path, "NDJSON observations (omit for prior only)");
  infer->add_option("--horizon", horizon,
                    "ticks to emit: -1 nominal duration, 0 stop with the stream")
      ->capture_default_str();
  infer->add_option("--out", out, "NDJSON predictions path")->required();
  infer->add_option("--seed", seed, "seed");
  infer_flags.add(infer);

  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validated accuracy");
  FilterFlags eval_flags;
  EvaluateArgs ea;
  evaluate->add_option("--corpus", ea.corpus, "corpus directory")->required();
  evaluate->add_option("--candidates", ea.candidates, "basis candidates JSON");
  evaluate->add_option("--methods", ea.methods, "comma-separated filters")->capture_default_str();
  evaluate->add_option("--subset", ea.subsets,
                       "observed modalities, comma separated; repeat for more cells");
  evaluate->add_option("--fraction", ea.fractions, "observed fraction; repeatable (default 0.43, 0.82)");
  evaluate->add_option("--folds,-k", ea.folds, "fold count")->capture_default_str();
  evaluate->add_option("--target", ea.target, "modality scored by MAE")->capture_default_str();
  evaluate->add_option("--joints", ea.joints, "leading controlled DoFs scored by MSE")
      ->capture_default_str();
  evaluate->add_option("--ridge", ea.ridge, "ridge penalty")->capture_default_str();
  evaluate->add_option("--threads", ea.threads, "worker threads (0: all cores)")
      ->capture_default_str();
  evaluate->add_option("--curve", ea.curve, "ensemble sizes for the accuracy curve")
      ->delimiter(',');
  evaluate->add_option("--out", ea.out, "output directory")->required();
  evaluate->add_option("--seed", seed, "seed");
  eval_flags.add(evaluate);

  auto* bench = app.add_subcommand("bench", "runtime scaling against state dimension");
  BenchOptions bo;
  std::string bench_filter = "ebip";
  int doubling_dim = 0;
  bench->add_option("--dims", bo.dims, "state dimensions, strictly increasing")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--filter", bench_filter, "bip | ebip | ebip_minus | pf")->capture_default_str();
  bench->add_option("--ensemble-size,-E", bo.ensemble_size, "ensemble size")->capture_default_str();
  bench->add_option("--trials", bo.trials, "timed samples per dimension")->capture_default_str();
  bench->add_option("--dofs", bo.observed_dofs, "observed DoFs")->capture_default_str();
  bench->add_option("--doubling", doubling_dim, "also time E vs 2E at this dimension");
  bench->add_option("--out", out, "output directory");
  bench->add_option("--seed", seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("config", "usage", e.what(), 2);
  }

  try {
    if (*sim) {
      cmd_simulate(spec_path, count, out, seed);
    } else if (*stream) {
      cmd_stream(spec_path, seed, fraction, subset, out, truth);
    } else if (*train) {
      cmd_train(corpus_dir, candidates, ridge, out);
    } else if (*infer) {
      cmd_infer(model_path, stream_path, infer_flags, seed, horizon, out);
    } else if (*evaluate) {
      cmd_evaluate(ea, eval_flags, seed);
    } else if (*bench) {
      bo.filter = filter_kind_from_string(bench_filter);
      bo.seed = seed;
      cmd_bench(bo, doubling_dim, out);
    }
  } catch (const Error& e) {
    return report_error(kind_name(e.kind()), e.code(), e.what(), exit_code(e.kind()));
  } catch (const fs::filesystem_error& e) {
    return report_error("data", "io", e.what(), 3);
  } catch (const nlohmann::json::exception& e) {
    return report_error("data", "bad_json", e.what(), 3);
  } catch (const std::exception& e) {
    return report_error("numerical", "internal", e.what(), 4);
  }
  return 0;
}

}  // namespace ebip::cli
