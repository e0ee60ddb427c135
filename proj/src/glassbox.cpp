#include "safe/glassbox.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"
#include "safe/error.hpp"
#include "safe/util.hpp"

namespace safe {

using ojson = nlohmann::ordered_json;

LogisticModel::LogisticModel(double intercept, std::vector<std::string> names, std::vector<double> coefficients,
                             double ridge, FitDiagnostics diagnostics)
    : intercept_(intercept),
      names_(std::move(names)),
      coefficients_(std::move(coefficients)),
      ridge_(ridge),
      diagnostics_(diagnostics) {
  if (names_.size() != coefficients_.size())
    throw Error(ErrorCode::InvalidArgument, "coefficient names and values differ in length");
  if (!std::isfinite(intercept_)) throw Error(ErrorCode::InvalidArgument, "non-finite intercept");
  for (double c : coefficients_)
    if (!std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "non-finite coefficient");
  std::vector<std::string> sorted = names_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorCode::InvalidArgument, "duplicate coefficient name");
  if (!(ridge_ >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge must be non-negative");
}

double LogisticModel::coefficient(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(ErrorCode::ColumnMismatch, "model has no coefficient '" + name + "'");
  return coefficients_[static_cast<std::size_t>(it - names_.begin())];
}

std::string LogisticModel::to_json_text() const {
  ojson coefs = ojson::object();
  for (std::size_t j = 0; j < names_.size(); ++j) coefs[names_[j]] = coefficients_[j];
  ojson doc = {{"format", 1},
               {"model", "logistic"},
               {"intercept", intercept_},
               {"ridge", ridge_},
               {"coefficients", coefs},
               {"diagnostics",
                {{"iterations", diagnostics_.iterations},
                 {"grad_norm", diagnostics_.grad_norm},
                 {"converged", diagnostics_.converged}}}};
  return doc.dump(2) + "\n";
}

LogisticModel LogisticModel::from_json_text(const std::string& text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("logistic model is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format")) throw Error(ErrorCode::CorruptFile, "not a logistic model file");
  if (doc["format"] != 1) throw Error(ErrorCode::FormatVersionMismatch, "unsupported logistic model format");
  try {
    std::vector<std::string> names;
    std::vector<double> values;
    for (const auto& [name, value] : doc.at("coefficients").items()) {
      names.push_back(name);
      values.push_back(value.get<double>());
    }
    FitDiagnostics diag;
    if (doc.contains("diagnostics")) {
      const auto& d = doc["diagnostics"];
      diag.iterations = d.at("iterations").get<std::size_t>();
      diag.grad_norm = d.at("grad_norm").get<double>();
      diag.converged = d.at("converged").get<bool>();
    }
    return LogisticModel(doc.at("intercept").get<double>(), std::move(names), std::move(values),
                         doc.value("ridge", 0.0), diag);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("malformed logistic model: ") + e.what());
  }
}

std::string LogisticModel::coefficients_tsv() const {
  std::string out = "feature\tcoefficient\n(Intercept)\t" + format_double(intercept_) + "\n";
  for (std::size_t j = 0; j < names_.size(); ++j) out += names_[j] + "\t" + format_double(coefficients_[j]) + "\n";
  return out;
}

bool LogisticModel::same_parameters(const LogisticModel& other) const {
  if (intercept_ != other.intercept_ || names_.size() != other.names_.size()) return false;
  std::map<std::string, double> mine;
  for (std::size_t j = 0; j < names_.size(); ++j) mine[names_[j]] = coefficients_[j];
  for (std::size_t j = 0; j < other.names_.size(); ++j) {
    auto it = mine.find(other.names_[j]);
    if (it == mine.end() || it->second != other.coefficients_[j]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

void check_inputs(const DesignMatrix& design, std::span<const std::uint8_t> target) {
  if (design.n_rows() != target.size())
    throw Error(ErrorCode::InvalidArgument, "design has " + std::to_string(design.n_rows()) + " rows but target has " +
                                                std::to_string(target.size()));
  bool zero = false, one = false;
  for (auto y : target) {
    if (y > 1) throw Error(ErrorCode::NonBinaryTarget, "target must be 0/1");
    (y ? one : zero) = true;
  }
  if (!zero || !one) throw Error(ErrorCode::SingleClassTarget, "target has a single class");
  for (double v : design.values())
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite design value");
}

// log(1 + exp(eta)) - y * eta without overflow.
double point_loss(double eta, std::uint8_t y) {
  return std::log1p(std::exp(-std::abs(eta))) + std::max(eta, 0.0) - (y ? eta : 0.0);
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> as_matrix(
    const DesignMatrix& design) {
  return {design.values().data(), static_cast<Eigen::Index>(design.n_rows()),
          static_cast<Eigen::Index>(design.n_cols())};
}

struct Problem {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> x;  // with leading ones column
  Eigen::VectorXd y;
  double ridge;

  double objective(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd eta = x * beta;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) loss += point_loss(eta[i], y[i] > 0.5);
    return loss / static_cast<double>(y.size()) + 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
  }

  Eigen::VectorXd probabilities(const Eigen::VectorXd& beta) const {
    return (x * beta).unaryExpr([](double e) { return sigmoid(e); });
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& beta, const Eigen::VectorXd& p) const {
    Eigen::VectorXd g = x.transpose() * (p - y) / static_cast<double>(y.size());
    g.tail(g.size() - 1) += ridge * beta.tail(beta.size() - 1);
    return g;
  }
};

Problem make_problem(const DesignMatrix& design, std::span<const std::uint8_t> target, double ridge) {
  const auto n = static_cast<Eigen::Index>(design.n_rows());
  const auto p = static_cast<Eigen::Index>(design.n_cols());
  Problem prob{Eigen::MatrixXd(n, p + 1), Eigen::VectorXd(n), ridge};
  prob.x.col(0).setOnes();
  if (p > 0) prob.x.rightCols(p) = as_matrix(design);
  for (Eigen::Index i = 0; i < n; ++i) prob.y[i] = target[static_cast<std::size_t>(i)];
  return prob;
}

}  // namespace

double logistic_objective(const DesignMatrix& design, std::span<const std::uint8_t> target, double ridge,
                          std::span<const double> params) {
  check_inputs(design, target);
  if (params.size() != design.n_cols() + 1) throw Error(ErrorCode::InvalidArgument, "wrong parameter count");
  const Problem prob = make_problem(design, target, ridge);
  return prob.objective(Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size())));
}

std::vector<double> logistic_gradient(const DesignMatrix& design, std::span<const std::uint8_t> target,
                                      double ridge, std::span<const double> params) {
  check_inputs(design, target);
  if (params.size() != design.n_cols() + 1) throw Error(ErrorCode::InvalidArgument, "wrong parameter count");
  const Problem prob = make_problem(design, target, ridge);
  const Eigen::VectorXd beta =
      Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size()));
  const Eigen::VectorXd g = prob.gradient(beta, prob.probabilities(beta));
  return {g.data(), g.data() + g.size()};
}

LogisticModel fit_logistic(const DesignMatrix& design, std::span<const std::uint8_t> target,
                           const LogisticOptions& opts) {
  check_inputs(design, target);
  if (!(opts.ridge >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge must be non-negative");
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  const Problem prob = make_problem(design, target, opts.ridge);
  const Eigen::Index dim = prob.x.cols();
  const double n = static_cast<double>(target.size());

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim);
  const double pbar = prob.y.mean();
  beta[0] = std::log(pbar / (1.0 - pbar));

  FitDiagnostics diag;
  Eigen::VectorXd p = prob.probabilities(beta);
  Eigen::VectorXd grad = prob.gradient(beta, p);
  double obj = prob.objective(beta);
  while (true) {
    diag.grad_norm = grad.cwiseAbs().maxCoeff();
    if (diag.grad_norm < opts.tol) {
      diag.converged = true;
      break;
    }
    if (diag.iterations >= opts.max_iter) break;
    ++diag.iterations;

    const Eigen::VectorXd w = p.cwiseProduct(Eigen::VectorXd::Ones(p.size()) - p);
    Eigen::MatrixXd hessian = prob.x.transpose() * w.asDiagonal() * prob.x / n;
    hessian.diagonal().tail(dim - 1).array() += opts.ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      // Singular curvature: fall back to a lightly damped system.
      hessian.diagonal().array() += 1e-10 + 1e-8 * hessian.diagonal().cwiseAbs().maxCoeff();
      step = hessian.ldlt().solve(grad);
      if (!step.allFinite()) step = grad;
    }

    double scale = 1.0;
    Eigen::VectorXd candidate = beta - step;
    double candidate_obj = prob.objective(candidate);
    for (int halving = 0; halving < 30 && !(candidate_obj <= obj); ++halving) {
      scale *= 0.5;
      candidate = beta - scale * step;
      candidate_obj = prob.objective(candidate);
    }
    if (!(candidate_obj <= obj)) break;  // no descent possible in floating point

    const double change = (scale * step).cwiseAbs().maxCoeff();
    beta = candidate;
    obj = candidate_obj;
    p = prob.probabilities(beta);
    grad = prob.gradient(beta, p);
    if (change < opts.tol) {
      diag.grad_norm = grad.cwiseAbs().maxCoeff();
      diag.converged = true;
      break;
    }
  }

  std::vector<double> coefs(beta.data() + 1, beta.data() + beta.size());
  return LogisticModel(beta[0], design.names(), std::move(coefs), opts.ridge, diag);
}

std::vector<double> predict_logistic(const LogisticModel& model, const DesignMatrix& design) {
  if (design.n_cols() != model.names().size())
    throw Error(ErrorCode::ColumnMismatch, "design has " + std::to_string(design.n_cols()) + " columns, model has " +
                                               std::to_string(model.names().size()));
  std::vector<double> weights(design.n_cols());
  for (std::size_t c = 0; c < design.n_cols(); ++c) weights[c] = model.coefficient(design.names()[c]);
  std::vector<double> out(design.n_rows());
  for (std::size_t r = 0; r < design.n_rows(); ++r) {
    double eta = model.intercept();
    const auto row = design.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) eta += weights[c] * row[c];
    out[r] = sigmoid(eta);
  }
  return out;
}

std::size_t param_count(const LogisticModel& model) { return model.coefficients().size() + 1; }
std::size_t param_count(const GbmModel& model) { return model.trees().size() * 4; }

DesignMatrix raw_design(const Dataset& data) {
  std::vector<std::string> names;
  struct Source {
    std::size_t feature;
    std::int32_t level;  // -1 for numeric passthrough
  };
  std::vector<Source> sources;
  for (std::size_t f = 0; f < data.n_features(); ++f) {
    const auto& spec = data.schema()[f];
    if (spec.kind == ColumnKind::Numeric) {
      names.push_back(spec.name);
      sources.push_back({f, -1});
      continue;
    }
    const auto& levels = *data.categorical(f).levels;
    for (std::size_t l = 1; l < levels.size(); ++l) {
      names.push_back(spec.name + "_{" + levels[l] + "}");
      sources.push_back({f, static_cast<std::int32_t>(l)});
    }
  }
  DesignMatrix design(data.n_rows(), std::move(names));
  for (std::size_t c = 0; c < sources.size(); ++c) {
    const auto [f, level] = sources[c];
    if (level < 0) {
      const auto& values = data.numeric(f).values;
      for (std::size_t r = 0; r < data.n_rows(); ++r) design(r, c) = values[r];
    } else {
      const auto& codes = data.categorical(f).codes;
      for (std::size_t r = 0; r < data.n_rows(); ++r) design(r, c) = codes[r] == level ? 1.0 : 0.0;
    }
  }
  return design;
}

}  // namespace safe
