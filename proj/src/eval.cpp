#include "ebip/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "ebip/error.hpp"
#include "ebip/io.hpp"
#include "ebip/stats.hpp"

namespace ebip {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index
// writes only its own result slot, so output does not depend on scheduling.
void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = next++; i < count; i = next++) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<double> finite_only(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v)
    if (std::isfinite(x)) out.push_back(x);
  return out;
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json numbers_or_null(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

std::string subset_label(const std::vector<std::string>& subset) {
  if (subset.empty()) return "all";
  std::string s;
  for (const auto& name : subset) s += (s.empty() ? "" : "+") + name;
  return s;
}

bool is_direct(FilterKind kind) { return kind == FilterKind::ebip || kind == FilterKind::pf; }

}  // namespace

EvalMethod filter_method(FilterKind kind, InteractionConfig base) {
  EvalMethod m;
  m.name = std::string(to_string(kind));
  m.predict = [kind, base](const FoldContext& ctx, const EvalCase& c, MethodTrace& trace) {
    InteractionConfig cfg = base;
    cfg.filter = kind;
    cfg.seed = ctx.seed;
    if (is_direct(kind) && !cfg.with_replacement &&
        (cfg.ensemble_size == 0 || cfg.ensemble_size > ctx.train_size)) {
      cfg.ensemble_size = ctx.train_size;
    }
    InteractionSession session(*ctx.trained, cfg);
    trace.ensemble_size = session.ensemble_size();
    using clock = std::chrono::steady_clock;
    for (const auto& rec : c.stream) {
      while (session.tick() + 1 < rec.tick) {
        const auto t0 = clock::now();
        session.step(nullptr);
        trace.tick_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
      }
      const auto t0 = clock::now();
      session.step(&rec.observation);
      trace.tick_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }
    return session.forecast(c.terminal_tick);
  };
  return m;
}

EvalMethod perfect_method() {
  EvalMethod m;
  m.name = "perfect";
  m.predict = [](const FoldContext&, const EvalCase& c, MethodTrace&) -> Eigen::VectorXd {
    return c.truth->samples.col(c.terminal_tick - 1);
  };
  return m;
}

std::vector<std::vector<int>> make_folds(int n, int k, std::uint64_t seed) {
  if (k < 2) throw config_error("bad_folds", "k-fold evaluation needs k >= 2");
  if (n < k) {
    throw config_error("bad_folds", "k-fold evaluation needs at least k demonstrations (N=" +
                                        std::to_string(n) + ", k=" + std::to_string(k) + ")");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RandomSource rng(derive_seed(seed, 0x666f6c64));
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(0, i)]);
  std::vector<std::vector<int>> folds(k);
  int begin = 0;
  for (int f = 0; f < k; ++f) {
    const int size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + begin, order.begin() + begin + size);
    std::sort(folds[f].begin(), folds[f].end());
    begin += size;
  }
  return folds;
}

int ensemble_cap(int n, int k) { return n * (k - 1) / k; }

const CellResult& InferenceReport::cell(const std::string& method,
                                        const std::vector<std::string>& subset,
                                        double fraction) const {
  for (const auto& c : cells)
    if (c.method == method && c.subset == subset && c.fraction == fraction) return c;
  throw config_error("no_cell", "report has no cell " + method + "/" + subset_label(subset));
}

InferenceReport kfold_evaluate(const std::vector<Demonstration>& demos, const BasisModel& model,
                               const std::vector<EvalMethod>& methods,
                               const EvalOptions& options) {
  const int n = static_cast<int>(demos.size());
  const auto folds = make_folds(n, options.folds, options.seed);
  if (methods.empty()) throw config_error("no_methods", "evaluation needs at least one method");
  const ModalityLayout& layout = model.layout();
  for (const auto& d : demos) {
    if (!(d.layout == layout)) {
      throw data_error("layout_mismatch", "demonstration layout differs from the model");
    }
  }
  for (const auto& subset : options.subsets) {
    for (const auto& name : subset) {
      auto idx = layout.find(name);
      if (!idx || layout[*idx].role != Role::observed) {
        throw config_error("subset_mismatch",
                           "subset modality '" + name + "' is not an observed modality");
      }
    }
  }
  for (double f : options.fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw config_error("bad_fraction", "fractions must lie in (0, 1]");
  }
  const std::vector<int> target_dofs = layout.dofs_of({options.target_modality});
  std::vector<int> joint_dofs = layout.controlled_dof_indices();
  if (options.scored_joints < 1 || options.scored_joints > static_cast<int>(joint_dofs.size())) {
    throw config_error("bad_scored_joints", "scored joint count exceeds the controlled DoFs");
  }
  joint_dofs.resize(options.scored_joints);

  const int k = options.folds;
  const int cap = ensemble_cap(n, k);
  std::vector<int> fold_of(n);
  for (int f = 0; f < k; ++f)
    for (int i : folds[f]) fold_of[i] = f;

  std::vector<TrainedModel> trained(k);
  parallel_for(k, options.threads, [&](int f) {
    std::vector<Demonstration> train;
    for (int i = 0; i < n; ++i)
      if (fold_of[i] != f) train.push_back(demos[i]);
    trained[f] = train_model(train, model, options.ridge);
  });

  const int n_sub = static_cast<int>(options.subsets.size());
  const int n_frac = static_cast<int>(options.fractions.size());
  const int n_cells = static_cast<int>(methods.size()) * n_sub * n_frac;
  struct Slot {
    double joint = kNaN;
    double target = kNaN;
    int ensemble = 0;
    std::string failure;
    std::vector<double> ticks;
  };
  // slots[demo][cell]
  std::vector<std::vector<Slot>> slots(n, std::vector<Slot>(n_cells));

  parallel_for(n, options.threads, [&](int i) {
    const int f = fold_of[i];
    FoldContext ctx;
    ctx.trained = &trained[f];
    ctx.fold = f;
    ctx.train_size = std::min(cap, n - static_cast<int>(folds[f].size()));
    ctx.seed = derive_seed(options.seed, 0x6576616c, static_cast<std::uint64_t>(i));
    const Demonstration& demo = demos[i];
    for (int s = 0; s < n_sub; ++s) {
      for (int r = 0; r < n_frac; ++r) {
        EvalCase c;
        c.truth = &demo;
        c.fraction = options.fractions[r];
        c.subset = &options.subsets[s];
        c.terminal_tick = static_cast<int>(demo.samples.cols());
        c.stream = stream_from_demo(demo, options.occlusions, c.fraction, options.subsets[s]);
        const Eigen::VectorXd truth = demo.samples.col(c.terminal_tick - 1);
        for (std::size_t m = 0; m < methods.size(); ++m) {
          Slot& slot = slots[i][(static_cast<int>(m) * n_sub + s) * n_frac + r];
          MethodTrace trace;
          try {
            const Eigen::VectorXd y = methods[m].predict(ctx, c, trace);
            if (y.size() != truth.size()) {
              throw config_error("method_mismatch",
                                 "method '" + methods[m].name + "' returned the wrong DoF count");
            }
            double se = 0.0;
            for (int d : joint_dofs) se += (y[d] - truth[d]) * (y[d] - truth[d]);
            double ae = 0.0;
            for (int d : target_dofs) ae += std::abs(y[d] - truth[d]);
            slot.joint = se / static_cast<double>(joint_dofs.size());
            slot.target = ae / static_cast<double>(target_dofs.size());
            if (!std::isfinite(slot.joint) || !std::isfinite(slot.target)) {
              slot.joint = slot.target = kNaN;
              slot.failure = "non_finite_prediction";
            }
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::numerical) throw;
            slot.failure = e.code();
          }
          slot.ensemble = trace.ensemble_size;
          slot.ticks = std::move(trace.tick_seconds);
        }
      }
    }
  });

  InferenceReport report;
  report.demos = n;
  report.folds = k;
  report.seed = options.seed;
  report.target_modality = options.target_modality;
  report.scored_joints = options.scored_joints;
  for (const auto& f : folds) report.fold_sizes.push_back(static_cast<int>(f.size()));

  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (int s = 0; s < n_sub; ++s) {
      for (int r = 0; r < n_frac; ++r) {
        const int idx = (static_cast<int>(m) * n_sub + s) * n_frac + r;
        CellResult cell;
        cell.method = methods[m].name;
        cell.subset = options.subsets[s];
        cell.fraction = options.fractions[r];
        for (int i = 0; i < n; ++i) {
          const Slot& slot = slots[i][idx];
          cell.joint_mse.push_back(slot.joint);
          cell.target_mae.push_back(slot.target);
          cell.ensemble_size = std::max(cell.ensemble_size, slot.ensemble);
          if (!slot.failure.empty()) {
            ++cell.failures;
            cell.failure_codes.push_back(slot.failure);
          }
          cell.tick_seconds.insert(cell.tick_seconds.end(), slot.ticks.begin(), slot.ticks.end());
        }
        for (int f = 0; f < k; ++f) {
          std::vector<double> j;
          std::vector<double> t;
          for (int i : folds[f]) {
            if (std::isfinite(cell.joint_mse[i])) j.push_back(cell.joint_mse[i]);
            if (std::isfinite(cell.target_mae[i])) t.push_back(cell.target_mae[i]);
          }
          cell.fold_joint_mse.push_back(j.empty() ? kNaN : mean(j));
          cell.fold_target_mae.push_back(t.empty() ? kNaN : mean(t));
        }
        const auto fj = finite_only(cell.fold_joint_mse);
        const auto ft = finite_only(cell.fold_target_mae);
        cell.joint_mean = fj.empty() ? kNaN : mean(fj);
        cell.target_mean = ft.empty() ? kNaN : mean(ft);
        cell.joint_se = sample_std(fj) / std::sqrt(static_cast<double>(std::max<std::size_t>(1, fj.size())));
        cell.target_se = sample_std(ft) / std::sqrt(static_cast<double>(std::max<std::size_t>(1, ft.size())));
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

nlohmann::json report_to_json(const InferenceReport& report) {
  nlohmann::json j;
  j["demos"] = report.demos;
  j["folds"] = report.folds;
  j["seed"] = report.seed;
  j["fold_sizes"] = report.fold_sizes;
  j["joint_metric"] = "mean squared error averaged over the first " +
                      std::to_string(report.scored_joints) +
                      " controlled DoFs at the final ground-truth tick";
  j["target_metric"] = "mean absolute error averaged over the '" + report.target_modality +
                       "' DoFs at the final ground-truth tick";
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json jc;
    jc["method"] = c.method;
    jc["subset"] = c.subset;
    jc["fraction"] = c.fraction;
    jc["ensemble_size"] = c.ensemble_size;
    jc["joint_mse"] = {{"mean", number_or_null(c.joint_mean)},
                       {"se", number_or_null(c.joint_se)},
                       {"folds", numbers_or_null(c.fold_joint_mse)},
                       {"demos", numbers_or_null(c.joint_mse)}};
    jc["target_mae"] = {{"mean", number_or_null(c.target_mean)},
                        {"se", number_or_null(c.target_se)},
                        {"folds", numbers_or_null(c.fold_target_mae)},
                        {"demos", numbers_or_null(c.target_mae)}};
    jc["failures"] = c.failures;
    jc["failure_codes"] = c.failure_codes;
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  return j;
}

nlohmann::json report_timing_json(const InferenceReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    std::vector<double> us;
    for (double s : c.tick_seconds) us.push_back(s * 1e6);
    std::sort(us.begin(), us.end());
    nlohmann::json jc;
    jc["method"] = c.method;
    jc["subset"] = c.subset;
    jc["fraction"] = c.fraction;
    jc["ticks"] = us.size();
    if (!us.empty()) {
      jc["median_us"] = median(us);
      jc["p90_us"] = us[static_cast<std::size_t>(0.9 * static_cast<double>(us.size() - 1))];
      jc["max_us"] = us.back();
      jc["mean_us"] = mean(us);
    }
    cells.push_back(std::move(jc));
  }
  return {{"tick_latency", std::move(cells)}};
}

void write_report_table(std::ostream& out, const InferenceReport& report) {
  std::vector<double> fractions;
  for (const auto& c : report.cells)
    if (std::find(fractions.begin(), fractions.end(), c.fraction) == fractions.end())
      fractions.push_back(c.fraction);

  auto fmt = [](double mean_v, double se) {
    if (!std::isfinite(mean_v)) return std::string("failed");
    std::ostringstream s;
    s << std::setprecision(4) << mean_v << " +/- " << std::setprecision(2) << se;
    return s.str();
  };

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"method", "subset"};
  for (double f : fractions) {
    const std::string pct = std::to_string(static_cast<int>(std::lround(f * 100))) + "%";
    header.push_back("joint MSE @" + pct);
    header.push_back("target MAE @" + pct);
  }
  rows.push_back(header);
  for (const auto& c : report.cells) {
    if (c.fraction != fractions.front()) continue;
    std::vector<std::string> row{c.method, subset_label(c.subset)};
    for (double f : fractions) {
      const CellResult& cf = report.cell(c.method, c.subset, f);
      row.push_back(fmt(cf.joint_mean, cf.joint_se));
      row.push_back(fmt(cf.target_mean, cf.target_se));
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      out << std::left << std::setw(static_cast<int>(width[i])) << rows[r][i]
          << (i + 1 < rows[r].size() ? "  " : "\n");
    }
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out << std::string(total - 2, '-') << "\n";
    }
  }
}

std::vector<CurvePoint> accuracy_vs_ensemble(const std::vector<Demonstration>& demos,
                                             const BasisModel& model,
                                             const std::vector<int>& ensemble_sizes,
                                             const EvalOptions& options, FilterKind kind,
                                             InteractionConfig base) {
  if (kind == FilterKind::bip) {
    throw config_error("bad_filter", "the ensemble curve needs an ensemble filter");
  }
  const int cap = ensemble_cap(static_cast<int>(demos.size()), options.folds);
  std::vector<CurvePoint> curve;
  for (int e : ensemble_sizes) {
    if (e < 2) throw config_error("ensemble_size", "ensemble sizes must be >= 2");
    if (is_direct(kind) && !base.with_replacement && e > cap) {
      throw config_error("ensemble_size", "ensemble size " + std::to_string(e) +
                                              " exceeds the fold training size " +
                                              std::to_string(cap));
    }
    InteractionConfig cfg = base;
    cfg.ensemble_size = e;
    const InferenceReport r = kfold_evaluate(demos, model, {filter_method(kind, cfg)}, options);
    CurvePoint p;
    p.ensemble_size = e;
    p.highlighted = e == kDefaultEnsembleSize;
    std::vector<double> j;
    std::vector<double> t;
    std::vector<double> ticks;
    for (const auto& c : r.cells) {
      j.push_back(c.joint_mean);
      t.push_back(c.target_mean);
      ticks.insert(ticks.end(), c.tick_seconds.begin(), c.tick_seconds.end());
    }
    p.joint_mse = mean(j);
    p.target_mae = mean(t);
    p.median_tick_seconds = median(std::move(ticks));
    curve.push_back(p);
  }
  return curve;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "ensemble_size,joint_mse,target_mae,highlighted\n";
  for (const auto& p : curve) {
    out << p.ensemble_size << ',' << format_double(p.joint_mse) << ','
        << format_double(p.target_mae) << ',' << (p.highlighted ? 1 : 0) << '\n';
  }
}

void write_curve_latency_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "ensemble_size,median_tick_seconds\n";
  for (const auto& p : curve) {
    out << p.ensemble_size << ',' << format_double(p.median_tick_seconds) << '\n';
  }
}

}  // namespace ebip
