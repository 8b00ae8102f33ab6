#include "ebip/basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ebip/error.hpp"
#include "ebip/io.hpp"

namespace ebip {

std::string_view to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::gaussian_rbf: return "gaussian_rbf";
    case BasisKind::polynomial: return "polynomial";
    case BasisKind::sigmoid: return "sigmoid";
  }
  return "unknown";
}

BasisKind basis_kind_from_string(std::string_view text) {
  if (text == "gaussian_rbf" || text == "gaussian") return BasisKind::gaussian_rbf;
  if (text == "polynomial") return BasisKind::polynomial;
  if (text == "sigmoid") return BasisKind::sigmoid;
  throw config_error("bad_basis", "unknown basis kind '" + std::string(text) + "'");
}

namespace {

std::vector<double> uniform_centers(int count) {
  std::vector<double> c(count);
  if (count == 1) {
    c[0] = 0.5;
    return c;
  }
  for (int i = 0; i < count; ++i) c[i] = static_cast<double>(i) / (count - 1);
  return c;
}

double default_width(int count) { return count > 1 ? 1.0 / (count - 1) : 0.5; }

}  // namespace

BasisFamily::BasisFamily(BasisKind kind, int size, std::vector<double> centers, double width)
    : kind_(kind), size_(size), centers_(std::move(centers)), width_(width) {
  if (kind_ != BasisKind::gaussian_rbf || size_ < 2) return;
  const double step = (centers_.back() - centers_.front()) / (size_ - 1);
  for (int i = 1; i < size_; ++i) {
    if (std::abs(centers_[i] - centers_[0] - i * step) > 1e-12) return;
  }
  spacing_ = step;
}

// On a uniform grid consecutive Gaussians differ by a factor that itself
// changes geometrically, so the row costs four exp calls. The walk starts at
// the nearest center and moves outward, where values only shrink.
void BasisFamily::rbf_values(double phase, double* out) const {
  const double inv = 1.0 / (2.0 * width_ * width_);
  if (spacing_ <= 0.0 || !std::isfinite(phase)) {
    for (int i = 0; i < size_; ++i) {
      const double d = phase - centers_[i];
      out[i] = std::exp(-d * d * inv);
    }
    return;
  }
  const double h = spacing_;
  const double pos = std::clamp((phase - centers_[0]) / h, 0.0, static_cast<double>(size_ - 1));
  const int k = static_cast<int>(std::lround(pos));
  const double d = phase - centers_[k];
  const double q = std::exp(-2.0 * h * h * inv);
  out[k] = std::exp(-d * d * inv);
  double up = std::exp((2.0 * h * d - h * h) * inv);
  for (int i = k + 1; i < size_; ++i) {
    out[i] = out[i - 1] * up;
    up *= q;
  }
  double down = std::exp((-2.0 * h * d - h * h) * inv);
  for (int i = k - 1; i >= 0; --i) {
    out[i] = out[i + 1] * down;
    down *= q;
  }
}

BasisFamily BasisFamily::gaussian_rbf(int count) {
  if (count < 1) throw config_error("bad_basis", "gaussian_rbf needs at least one center");
  return gaussian_rbf(uniform_centers(count), default_width(count));
}

BasisFamily BasisFamily::gaussian_rbf(std::vector<double> centers, double width) {
  if (centers.empty()) throw config_error("bad_basis", "gaussian_rbf needs at least one center");
  if (!(width > 0.0)) throw config_error("bad_basis", "gaussian_rbf width must be positive");
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (centers[i] < 0.0 || centers[i] > 1.0 || (i > 0 && centers[i] <= centers[i - 1])) {
      throw config_error("bad_basis",
                         "gaussian_rbf centers must be strictly increasing in [0, 1]");
    }
  }
  const int n = static_cast<int>(centers.size());
  return BasisFamily(BasisKind::gaussian_rbf, n, std::move(centers), width);
}

BasisFamily BasisFamily::polynomial(int degree) {
  if (degree < 0) throw config_error("bad_basis", "polynomial degree must be >= 0");
  return BasisFamily(BasisKind::polynomial, degree + 1, {}, 0.0);
}

BasisFamily BasisFamily::sigmoid(int count) {
  if (count < 1) throw config_error("bad_basis", "sigmoid needs at least one center");
  return sigmoid(uniform_centers(count), default_width(count));
}

BasisFamily BasisFamily::sigmoid(std::vector<double> centers, double width) {
  if (centers.empty()) throw config_error("bad_basis", "sigmoid needs at least one center");
  if (!(width > 0.0)) throw config_error("bad_basis", "sigmoid slope must be positive");
  for (double c : centers) {
    if (c < 0.0 || c > 1.0) throw config_error("bad_basis", "sigmoid centers must lie in [0, 1]");
  }
  const int n = static_cast<int>(centers.size());
  return BasisFamily(BasisKind::sigmoid, n, std::move(centers), width);
}

void BasisFamily::evaluate(double phase, double* out) const {
  switch (kind_) {
    case BasisKind::gaussian_rbf:
      rbf_values(phase, out);
      break;
    case BasisKind::polynomial: {
      double p = 1.0;
      for (int i = 0; i < size_; ++i) {
        out[i] = p;
        p *= phase;
      }
      break;
    }
    case BasisKind::sigmoid:
      for (int i = 0; i < size_; ++i) {
        out[i] = 1.0 / (1.0 + std::exp(-(phase - centers_[i]) / width_));
      }
      break;
  }
}

void BasisFamily::derivative(double phase, double* out) const {
  switch (kind_) {
    case BasisKind::gaussian_rbf: {
      rbf_values(phase, out);
      const double w2 = width_ * width_;
      for (int i = 0; i < size_; ++i) out[i] *= -(phase - centers_[i]) / w2;
      break;
    }
    case BasisKind::polynomial: {
      out[0] = 0.0;
      double p = 1.0;  // phase^(i-1)
      for (int i = 1; i < size_; ++i) {
        out[i] = i * p;
        p *= phase;
      }
      break;
    }
    case BasisKind::sigmoid:
      for (int i = 0; i < size_; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-(phase - centers_[i]) / width_));
        out[i] = s * (1.0 - s) / width_;
      }
      break;
  }
}

Eigen::RowVectorXd BasisFamily::evaluate(double phase) const {
  Eigen::RowVectorXd row(size_);
  evaluate(phase, row.data());
  return row;
}

Eigen::RowVectorXd BasisFamily::derivative(double phase) const {
  Eigen::RowVectorXd row(size_);
  derivative(phase, row.data());
  return row;
}

double BasisFamily::combine(double phase, const double* weights) const {
  double sum = 0.0;
  switch (kind_) {
    case BasisKind::gaussian_rbf: {
      double buf[64];
      std::vector<double> heap;
      double* g = buf;
      if (size_ > 64) {
        heap.resize(size_);
        g = heap.data();
      }
      rbf_values(phase, g);
      for (int i = 0; i < size_; ++i) sum += weights[i] * g[i];
      break;
    }
    case BasisKind::polynomial:
      // Horner form.
      for (int i = size_; i-- > 0;) sum = sum * phase + weights[i];
      break;
    case BasisKind::sigmoid:
      for (int i = 0; i < size_; ++i) {
        sum += weights[i] / (1.0 + std::exp(-(phase - centers_[i]) / width_));
      }
      break;
  }
  return sum;
}

double BasisFamily::combine_derivative(double phase, const double* weights) const {
  if (kind_ == BasisKind::polynomial) {
    double sum = 0.0;
    for (int i = size_; i-- > 1;) sum = sum * phase + i * weights[i];
    return sum;
  }
  double buf[64];
  std::vector<double> heap;
  double* d = buf;
  if (size_ > 64) {
    heap.resize(size_);
    d = heap.data();
  }
  derivative(phase, d);
  double sum = 0.0;
  for (int i = 0; i < size_; ++i) sum += weights[i] * d[i];
  return sum;
}

std::string BasisFamily::describe() const {
  std::ostringstream os;
  os << to_string(kind_);
  if (kind_ == BasisKind::polynomial) {
    os << "(degree=" << degree() << ")";
  } else {
    os << "(count=" << size_ << ", width=" << width_ << ")";
  }
  return os.str();
}

nlohmann::json BasisFamily::to_json() const {
  nlohmann::json j{{"kind", to_string(kind_)}, {"count", size_}};
  if (kind_ == BasisKind::polynomial) {
    j["degree"] = degree();
  } else {
    j["centers"] = centers_;
    j["width"] = width_;
  }
  return j;
}

BasisFamily BasisFamily::from_json(const nlohmann::json& j) {
  const BasisKind kind = basis_kind_from_string(j.at("kind").get<std::string>());
  if (kind == BasisKind::polynomial) {
    if (j.contains("degree")) return polynomial(j.at("degree").get<int>());
    return polynomial(j.at("count").get<int>() - 1);
  }
  if (j.contains("centers")) {
    auto centers = j.at("centers").get<std::vector<double>>();
    const int count = static_cast<int>(centers.size());
    const double width = j.contains("width") ? j.at("width").get<double>() : default_width(count);
    return kind == BasisKind::gaussian_rbf ? gaussian_rbf(std::move(centers), width)
                                           : sigmoid(std::move(centers), width);
  }
  const int count = j.at("count").get<int>();
  BasisFamily f = kind == BasisKind::gaussian_rbf ? gaussian_rbf(count) : sigmoid(count);
  if (j.contains("width")) {
    f = kind == BasisKind::gaussian_rbf ? gaussian_rbf(f.centers(), j.at("width").get<double>())
                                        : sigmoid(f.centers(), j.at("width").get<double>());
  }
  return f;
}

BasisModel::BasisModel(ModalityLayout layout, std::vector<BasisFamily> families)
    : layout_(std::move(layout)), families_(std::move(families)) {
  if (static_cast<int>(families_.size()) != layout_.total_dofs()) {
    throw config_error("bad_model", "basis model needs exactly one family per DoF");
  }
  offsets_.reserve(families_.size());
  for (const auto& f : families_) {
    offsets_.push_back(total_);
    total_ += f.size();
  }
}

nlohmann::json BasisModel::to_json() const {
  nlohmann::json dofs = nlohmann::json::array();
  for (int d = 0; d < this->dofs(); ++d) {
    nlohmann::json f = families_[d].to_json();
    f["offset"] = offsets_[d];
    dofs.push_back(std::move(f));
  }
  return {{"layout", layout_to_json(layout_)}, {"B", total_}, {"dofs", std::move(dofs)}};
}

BasisModel BasisModel::from_json(const nlohmann::json& j) {
  ModalityLayout layout = layout_from_json(j.at("layout"));
  std::vector<BasisFamily> families;
  for (const auto& f : j.at("dofs")) families.push_back(BasisFamily::from_json(f));
  BasisModel model(std::move(layout), std::move(families));
  if (j.contains("B") && j.at("B").get<int>() != model.weight_count()) {
    throw data_error("bad_model", "model B does not match its families");
  }
  if (j.contains("dofs")) {
    for (int d = 0; d < model.dofs(); ++d) {
      const auto& f = j.at("dofs")[d];
      if (f.contains("offset") && f.at("offset").get<int>() != model.block_offset(d)) {
        throw data_error("bad_model", "block offsets are inconsistent");
      }
    }
  }
  return model;
}

double compute_phase(int tick, int duration) {
  if (duration <= 0) throw config_error("invalid_duration", "duration must be positive");
  return static_cast<double>(tick) / duration;
}

Eigen::VectorXd demonstration_phases(int duration) {
  Eigen::VectorXd phases(duration);
  for (int t = 0; t < duration; ++t) phases[t] = compute_phase(t + 1, duration);
  return phases;
}

Eigen::MatrixXd design_matrix(const BasisFamily& family, const Eigen::VectorXd& phases) {
  Eigen::MatrixXd phi(phases.size(), family.size());
  Eigen::RowVectorXd row(family.size());
  for (Eigen::Index t = 0; t < phases.size(); ++t) {
    family.evaluate(phases[t], row.data());
    phi.row(t) = row;
  }
  return phi;
}

Eigen::VectorXd fit_weights(const Eigen::VectorXd& values, const Eigen::VectorXd& phases,
                            const BasisFamily& family, double ridge) {
  if (values.size() != phases.size()) {
    throw config_error("bad_fit", "values and phases differ in length");
  }
  if (ridge < 0.0) throw config_error("bad_fit", "ridge must be non-negative");
  const Eigen::MatrixXd phi = design_matrix(family, phases);
  const Eigen::Index b = family.size();
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
    if (qr.rank() < b) {
      throw numerical_error("singular_fit", "rank-deficient basis fit for " + family.describe() +
                                                " (rank " + std::to_string(qr.rank()) + " < " +
                                                std::to_string(b) + "); use ridge > 0");
    }
    return qr.solve(values);
  }
  Eigen::MatrixXd aug(phi.rows() + b, b);
  aug << phi, std::sqrt(ridge) * Eigen::MatrixXd::Identity(b, b);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(phi.rows() + b);
  rhs.head(phi.rows()) = values;
  return aug.householderQr().solve(rhs);
}

Eigen::VectorXd fit_demonstration(const Demonstration& demo, const BasisModel& model,
                                  double ridge) {
  if (!(demo.layout == model.layout())) {
    throw data_error("layout_mismatch", "demonstration layout does not match the basis model");
  }
  const Eigen::VectorXd phases = demonstration_phases(demo.duration());
  Eigen::VectorXd w(model.weight_count());
  for (int d = 0; d < model.dofs(); ++d) {
    const BasisFamily& f = model.family(d);
    w.segment(model.block_offset(d), f.size()) =
        fit_weights(demo.samples.row(d).transpose(), phases, f, ridge);
  }
  return w;
}

double bic_score(double rss, double signal_power, int samples, int parameters) {
  const double n = samples;
  const double floor = 1e-24 * std::max(signal_power, 1e-300);
  const double mse = std::max(rss / n, floor);
  return n * std::log(mse) + parameters * std::log(n);
}

BasisModel select_basis(const std::vector<Demonstration>& demos,
                        const std::vector<std::vector<BasisFamily>>& candidates, double ridge,
                        std::vector<CandidateScore>* scores) {
  if (demos.empty()) throw config_error("no_demos", "basis selection needs a demonstration");
  const ModalityLayout& layout = demos.front().layout;
  const int dofs = layout.total_dofs();
  if (candidates.size() != 1 && static_cast<int>(candidates.size()) != dofs) {
    throw config_error("bad_candidates", "need one candidate list or one per DoF");
  }
  int samples = 0;
  std::vector<Eigen::VectorXd> phases;
  for (const auto& demo : demos) {
    if (!(demo.layout == layout)) throw data_error("layout_mismatch", "demos differ in layout");
    samples += demo.duration();
    phases.push_back(demonstration_phases(demo.duration()));
  }

  std::vector<BasisFamily> chosen;
  for (int d = 0; d < dofs; ++d) {
    const auto& list = candidates.size() == 1 ? candidates[0] : candidates[d];
    if (list.empty()) {
      throw config_error("empty_candidates", "no basis candidates for DoF " + std::to_string(d));
    }
    double power = 0.0;
    for (const auto& demo : demos) power += demo.samples.row(d).squaredNorm();
    power /= samples;

    std::size_t best = 0;
    double best_bic = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < list.size(); ++c) {
      double rss = 0.0;
      for (std::size_t i = 0; i < demos.size(); ++i) {
        const Eigen::VectorXd y = demos[i].samples.row(d).transpose();
        const Eigen::VectorXd w = fit_weights(y, phases[i], list[c], ridge);
        rss += (y - design_matrix(list[c], phases[i]) * w).squaredNorm();
      }
      const double bic = bic_score(rss, power, samples, list[c].size());
      if (scores) scores->push_back({d, c, rss, bic});
      const bool better = bic < best_bic ||
                          (bic == best_bic && list[c].size() < list[best].size());
      if (c == 0 || better) {
        best = c;
        best_bic = bic;
      }
    }
    chosen.push_back(list[best]);
  }
  return BasisModel(layout, std::move(chosen));
}

Eigen::VectorXd observe_at(double phase, const Eigen::Ref<const Eigen::VectorXd>& state,
                           const BasisModel& model) {
  Eigen::VectorXd y(model.dofs());
  const double* w = state.data() + kWeightOffset;
  for (int d = 0; d < model.dofs(); ++d) {
    y[d] = model.family(d).combine(phase, w + model.block_offset(d));
  }
  return y;
}

Eigen::VectorXd observe(const Eigen::Ref<const Eigen::VectorXd>& state, const BasisModel& model) {
  return observe_at(state[kPhase], state, model);
}

Eigen::VectorXd observe(const Eigen::Ref<const Eigen::VectorXd>& state, const BasisModel& model,
                        const std::vector<int>& dofs) {
  Eigen::VectorXd y(dofs.size());
  const double phase = state[kPhase];
  const double* w = state.data() + kWeightOffset;
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    y[i] = model.family(dofs[i]).combine(phase, w + model.block_offset(dofs[i]));
  }
  return y;
}

Eigen::MatrixXd observation_jacobian(const Eigen::Ref<const Eigen::VectorXd>& state,
                                     const BasisModel& model) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(model.dofs(), model.state_dim());
  const double phase = state[kPhase];
  const double* w = state.data() + kWeightOffset;
  Eigen::RowVectorXd row;
  for (int d = 0; d < model.dofs(); ++d) {
    const BasisFamily& f = model.family(d);
    const int off = model.block_offset(d);
    h(d, kPhase) = f.combine_derivative(phase, w + off);
    row.resize(f.size());
    f.evaluate(phase, row.data());
    h.block(d, kWeightOffset + off, 1, f.size()) = row;
  }
  return h;
}

namespace {

std::vector<BasisFamily> families_from_json(const nlohmann::json& arr) {
  std::vector<BasisFamily> out;
  for (const auto& item : arr) out.push_back(BasisFamily::from_json(item));
  return out;
}

}  // namespace

std::vector<std::vector<BasisFamily>> candidates_from_json(const nlohmann::json& j,
                                                           const ModalityLayout& layout) {
  std::vector<BasisFamily> shared =
      j.contains("default") ? families_from_json(j.at("default")) : default_candidates();
  if (!j.contains("modalities")) return {shared};
  std::vector<std::vector<BasisFamily>> per_dof(layout.total_dofs(), shared);
  for (const auto& [name, arr] : j.at("modalities").items()) {
    auto idx = layout.find(name);
    if (!idx) throw config_error("unknown_modality", "no modality named '" + name + "'");
    auto list = families_from_json(arr);
    for (int k = 0; k < layout[*idx].dof_count; ++k) per_dof[layout.offset(*idx) + k] = list;
  }
  return per_dof;
}

std::vector<BasisFamily> default_candidates() {
  return {BasisFamily::polynomial(3),    BasisFamily::polynomial(5),
          BasisFamily::polynomial(7),    BasisFamily::gaussian_rbf(6),
          BasisFamily::gaussian_rbf(9),  BasisFamily::gaussian_rbf(12),
          BasisFamily::gaussian_rbf(16), BasisFamily::sigmoid(6),
          BasisFamily::sigmoid(10)};
}

}  // namespace ebip
