#include "ebip/priors.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ebip/error.hpp"
#include "ebip/io.hpp"

namespace ebip {

void DemonstrationCorpus::validate() const {
  if (weights.cols() != reciprocal_lengths.size()) {
    throw data_error("bad_corpus", "weight columns and reciprocal lengths differ in count");
  }
  if ((reciprocal_lengths.array() <= 0.0).any()) {
    throw data_error("bad_corpus", "reciprocal lengths must be positive");
  }
}

DemonstrationCorpus build_corpus(const std::vector<Demonstration>& demos, const BasisModel& model,
                                 double ridge) {
  DemonstrationCorpus corpus;
  corpus.weights.resize(model.weight_count(), static_cast<Eigen::Index>(demos.size()));
  corpus.reciprocal_lengths.resize(static_cast<Eigen::Index>(demos.size()));
  corpus.layout_hash = model.layout().hash();
  for (std::size_t i = 0; i < demos.size(); ++i) {
    demos[i].validate();
    corpus.weights.col(i) = fit_demonstration(demos[i], model, ridge);
    corpus.reciprocal_lengths[i] = 1.0 / demos[i].duration();
  }
  return corpus;
}

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::string csv_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  std::string line;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (i) line += ',';
    line += format_double(row[i]);
  }
  return line;
}

std::vector<double> parse_csv_row(const std::string& line) {
  std::vector<double> out;
  if (line.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(parse_double(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& cols) {
  const Eigen::VectorXd mean = cols.rowwise().mean();
  const Eigen::MatrixXd dev = cols.colwise() - mean;
  return dev * dev.transpose() / static_cast<double>(cols.cols() - 1);
}

double sample_variance(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

void write_corpus(std::ostream& out, const DemonstrationCorpus& corpus) {
  nlohmann::json header{{"B", corpus.weight_count()},
                        {"N", corpus.size()},
                        {"layout_hash", hex64(corpus.layout_hash)}};
  out << header.dump() << '\n';
  for (Eigen::Index b = 0; b < corpus.weights.rows(); ++b) {
    out << csv_row(corpus.weights.row(b)) << '\n';
  }
  out << csv_row(corpus.reciprocal_lengths.transpose()) << '\n';
}

DemonstrationCorpus read_corpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw data_error("bad_corpus", "missing corpus header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("bad_corpus", std::string("malformed corpus header: ") + e.what());
  }
  const int b = header.at("B").get<int>();
  const int n = header.at("N").get<int>();
  DemonstrationCorpus corpus;
  corpus.layout_hash = std::stoull(header.at("layout_hash").get<std::string>(), nullptr, 16);
  corpus.weights.resize(b, n);
  corpus.reciprocal_lengths.resize(n);
  for (int r = 0; r <= b; ++r) {
    if (!std::getline(in, line)) throw data_error("bad_corpus", "truncated corpus body");
    const auto values = parse_csv_row(line);
    if (static_cast<int>(values.size()) != n) {
      throw data_error("bad_corpus", "corpus row " + std::to_string(r) + " has wrong length");
    }
    for (int i = 0; i < n; ++i) {
      if (r < b) {
        corpus.weights(r, i) = values[i];
      } else {
        corpus.reciprocal_lengths[i] = values[i];
      }
    }
  }
  corpus.validate();
  return corpus;
}

GaussianBelief build_gaussian_prior(const DemonstrationCorpus& corpus, double phase_variance) {
  corpus.validate();
  if (corpus.size() < 2) {
    throw data_error("insufficient_data", "Gaussian prior needs at least two demonstrations");
  }
  const int b = corpus.weight_count();
  GaussianBelief prior;
  prior.mean.resize(kWeightOffset + b);
  prior.mean[kPhase] = 0.0;
  prior.mean[kPhaseVelocity] = corpus.reciprocal_lengths.mean();
  prior.mean.tail(b) = corpus.weights.rowwise().mean();
  prior.covariance = Eigen::MatrixXd::Zero(kWeightOffset + b, kWeightOffset + b);
  prior.covariance(kPhase, kPhase) = phase_variance;
  prior.covariance(kPhaseVelocity, kPhaseVelocity) = sample_variance(corpus.reciprocal_lengths);
  prior.covariance.bottomRightCorner(b, b) = sample_covariance(corpus.weights);
  return prior;
}

namespace {

struct ComponentFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det = 0.0;
};

void require_positive_definite(const Eigen::MatrixXd& cov, double tolerance, int component) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= tolerance * hi) {
    std::ostringstream os;
    os << "component " << component << " covariance is not positive semi-definite within "
       << "tolerance (min eigenvalue " << lo << ", max " << hi << ")";
    throw numerical_error("non_psd_prior", os.str());
  }
}

ComponentFactor factor(const Eigen::MatrixXd& cov, double tolerance, int component) {
  require_positive_definite(cov, tolerance, component);
  ComponentFactor f;
  f.llt.compute(cov);
  if (f.llt.info() != Eigen::Success) {
    throw numerical_error("non_psd_prior",
                          "component " + std::to_string(component) + " Cholesky failed");
  }
  f.log_det = 2.0 * f.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return f;
}

// Log responsibilities (unnormalised) for every point and component; returns
// the total log-likelihood.
double e_step(const Eigen::MatrixXd& x, const GmmPrior& g, double tolerance,
              Eigen::MatrixXd& resp) {
  const Eigen::Index n = x.cols();
  const Eigen::Index dim = x.rows();
  const int k = g.components();
  resp.resize(n, k);
  const double log_norm = -0.5 * dim * std::log(2.0 * std::numbers::pi);
  for (int c = 0; c < k; ++c) {
    const ComponentFactor f = factor(g.covariances[c], tolerance, c);
    const Eigen::MatrixXd dev = x.colwise() - g.means[c];
    const Eigen::MatrixXd z = f.llt.matrixL().solve(dev);
    const double base = std::log(g.mixing[c]) + log_norm - 0.5 * f.log_det;
    for (Eigen::Index i = 0; i < n; ++i) resp(i, c) = base - 0.5 * z.col(i).squaredNorm();
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = resp.row(i).maxCoeff();
    const double lse = m + std::log((resp.row(i).array() - m).exp().sum());
    resp.row(i) = (resp.row(i).array() - lse).exp();
    total += lse;
  }
  return total;
}

void m_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp, GmmPrior& g) {
  const Eigen::Index n = x.cols();
  const int k = static_cast<int>(resp.cols());
  g.mixing.assign(k, 0.0);
  g.means.assign(k, Eigen::VectorXd());
  g.covariances.assign(k, Eigen::MatrixXd());
  for (int c = 0; c < k; ++c) {
    const double nk = resp.col(c).sum();
    g.mixing[c] = nk / static_cast<double>(n);
    if (nk <= 0.0) {
      g.means[c] = Eigen::VectorXd::Zero(x.rows());
      g.covariances[c] = Eigen::MatrixXd::Zero(x.rows(), x.rows());
      continue;
    }
    g.means[c] = x * resp.col(c) / nk;
    const Eigen::MatrixXd dev = x.colwise() - g.means[c];
    g.covariances[c] = dev * resp.col(c).asDiagonal() * dev.transpose() / nk;
    g.covariances[c] = 0.5 * (g.covariances[c] + g.covariances[c].transpose()).eval();
  }
}

// k-means++ seeding followed by a few Lloyd iterations; returns hard
// responsibilities.
Eigen::MatrixXd kmeans_init(const Eigen::MatrixXd& x, int k, int iterations, RandomSource& rng) {
  const Eigen::Index n = x.cols();
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(x.col(static_cast<Eigen::Index>(rng.index(0, n - 1))));
  Eigen::VectorXd d2(n);
  while (static_cast<int>(centers.size()) < k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (x.col(i) - c).squaredNorm());
      d2[i] = best;
    }
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(0, n - 1));
    }
    centers.push_back(x.col(pick));
  }
  std::vector<int> label(n, 0);
  for (int it = 0; it < std::max(1, iterations); ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.col(i) - centers[c]).squaredNorm();
        if (d < best) {
          best = d;
          label[i] = c;
        }
      }
    }
    for (int c = 0; c < k; ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
      int count = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (label[i] == c) {
          sum += x.col(i);
          ++count;
        }
      }
      if (count > 0) centers[c] = sum / count;
    }
  }
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) resp(i, label[i]) = 1.0;
  return resp;
}

GmmPrior run_em(const Eigen::MatrixXd& x, int k, const GmmOptions& options, RandomSource& rng) {
  GmmPrior g;
  m_step(x, kmeans_init(x, k, options.kmeans_iterations, rng), g);
  Eigen::MatrixXd resp;
  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iterations; ++it) {
    const double ll = e_step(x, g, options.psd_tolerance, resp);
    g.log_likelihood = ll;
    g.iterations = it;
    if (std::abs(ll - previous) < options.tolerance) break;
    previous = ll;
    m_step(x, resp, g);
  }
  const double dim = static_cast<double>(x.rows());
  const double params = (k - 1) + k * dim + k * dim * (dim + 1.0) / 2.0;
  g.bic = -2.0 * g.log_likelihood + params * std::log(static_cast<double>(x.cols()));
  return g;
}

}  // namespace

GmmPrior fit_gmm(const DemonstrationCorpus& corpus, const GmmOptions& options,
                 std::uint64_t seed) {
  corpus.validate();
  if (corpus.size() < 2) {
    throw data_error("insufficient_data", "GMM prior needs at least two demonstrations");
  }
  if (options.component_candidates.empty()) {
    throw config_error("bad_gmm", "no candidate component counts");
  }
  RandomSource rng(seed);
  std::optional<GmmPrior> best;
  std::string last_failure;
  for (int k : options.component_candidates) {
    if (k < 1) throw config_error("bad_gmm", "component count must be >= 1");
    if (k > corpus.size()) continue;
    try {
      GmmPrior g = run_em(corpus.weights, k, options, rng);
      if (!best || g.bic < best->bic) best = std::move(g);
    } catch (const Error& e) {
      if (e.code() != "non_psd_prior") throw;
      last_failure = e.what();
    }
  }
  if (!best) {
    throw numerical_error("non_psd_prior",
                          last_failure.empty() ? "no usable component count" : last_failure);
  }
  return *best;
}

GmmPrior gaussian_gmm(const DemonstrationCorpus& corpus) {
  corpus.validate();
  if (corpus.size() < 2) {
    throw data_error("insufficient_data", "Gaussian prior needs at least two demonstrations");
  }
  GmmPrior g;
  g.mixing = {1.0};
  g.means = {corpus.weights.rowwise().mean()};
  g.covariances = {sample_covariance(corpus.weights)};
  return g;
}

GmmFit fit_gmm_or_fallback(const DemonstrationCorpus& corpus, const GmmOptions& options,
                           std::uint64_t seed) {
  try {
    return {fit_gmm(corpus, options, seed), false, {}};
  } catch (const Error& e) {
    if (e.code() != "non_psd_prior") throw;
    return {gaussian_gmm(corpus), true, e.what()};
  }
}

Ensemble sample_direct(const DemonstrationCorpus& corpus, int members, RandomSource& rng,
                       bool with_replacement) {
  corpus.validate();
  const int n = corpus.size();
  if (members < 1) throw config_error("ensemble_size", "ensemble needs at least one member");
  if (n < 1) throw data_error("insufficient_data", "corpus is empty");
  if (!with_replacement && members > n) {
    throw config_error("ensemble_size",
                       "direct sampling draws at most N = " + std::to_string(n) +
                           " members without replacement (requested " +
                           std::to_string(members) + "); use the gmm prior mode");
  }
  std::vector<std::size_t> pick(members);
  if (with_replacement) {
    for (auto& p : pick) p = rng.index(0, n - 1);
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int j = 0; j < members; ++j) {
      std::swap(order[j], order[rng.index(j, n - 1)]);
      pick[j] = order[j];
    }
  }
  Eigen::MatrixXd x(kWeightOffset + corpus.weight_count(), members);
  for (int j = 0; j < members; ++j) {
    x(kPhase, j) = 0.0;
    x(kPhaseVelocity, j) = corpus.reciprocal_lengths[pick[j]];
    x.col(j).tail(corpus.weight_count()) = corpus.weights.col(pick[j]);
  }
  return Ensemble(std::move(x));
}

Ensemble sample_gmm(const DemonstrationCorpus& corpus, const GmmPrior& gmm, int members,
                    RandomSource& rng) {
  corpus.validate();
  if (members < 2) throw config_error("ensemble_size", "gmm ensemble needs at least two members");
  if (gmm.components() < 1) throw config_error("bad_gmm", "mixture has no components");
  const int b = corpus.weight_count();
  // Square-root factors via eigendecomposition so singular fallback
  // covariances still sample.
  std::vector<Eigen::MatrixXd> roots;
  for (const auto& cov : gmm.covariances) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    roots.push_back(eig.eigenvectors() *
                    eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
  }
  const double rate_mean = corpus.reciprocal_lengths.mean();
  const double rate_std =
      corpus.size() > 1 ? std::sqrt(sample_variance(corpus.reciprocal_lengths)) : 0.0;

  Eigen::MatrixXd x(kWeightOffset + b, members);
  Eigen::VectorXd z(b);
  for (int j = 0; j < members; ++j) {
    double u = rng.uniform();
    int c = 0;
    for (; c + 1 < gmm.components(); ++c) {
      u -= gmm.mixing[c];
      if (u < 0.0) break;
    }
    for (int i = 0; i < b; ++i) z[i] = rng.gaussian();
    x(kPhase, j) = 0.0;
    double rate = 0.0;
    for (int attempt = 0; attempt < 64 && rate <= 0.0; ++attempt) {
      rate = rate_mean + rate_std * rng.gaussian();
    }
    x(kPhaseVelocity, j) = rate > 0.0 ? rate : rate_mean;
    x.col(j).tail(b) = gmm.means[c] + roots[c] * z;
  }
  return Ensemble(std::move(x));
}

Eigen::VectorXd estimate_measurement_noise(const std::vector<Demonstration>& demos,
                                           const BasisModel& model,
                                           const std::vector<Eigen::VectorXd>& weights) {
  if (demos.size() != weights.size()) {
    throw config_error("bad_noise", "need one weight vector per demonstration");
  }
  Eigen::VectorXd r = Eigen::VectorXd::Zero(model.dofs());
  if (demos.empty()) return r;
  Eigen::VectorXd state(model.state_dim());
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const Demonstration& demo = demos[i];
    if (!(demo.layout == model.layout())) {
      throw data_error("layout_mismatch", "demonstration layout does not match the model");
    }
    state.tail(model.weight_count()) = weights[i];
    const int t_count = demo.duration();
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(model.dofs());
    for (int t = 0; t < t_count; ++t) {
      const Eigen::VectorXd y = observe_at(compute_phase(t + 1, t_count), state, model);
      sq += (demo.samples.col(t) - y).cwiseAbs2();
    }
    r += sq / static_cast<double>(t_count);
  }
  return r / static_cast<double>(demos.size());
}

TrainedModel train_model(const std::vector<Demonstration>& demos, const BasisModel& model,
                         double ridge) {
  TrainedModel out{model, build_corpus(demos, model, ridge), {}};
  std::vector<Eigen::VectorXd> w;
  w.reserve(demos.size());
  for (Eigen::Index i = 0; i < out.corpus.weights.cols(); ++i) w.push_back(out.corpus.weights.col(i));
  out.noise = estimate_measurement_noise(demos, model, w);
  return out;
}

}  // namespace ebip
