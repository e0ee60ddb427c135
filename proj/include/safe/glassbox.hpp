#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safe/data.hpp"
#include "safe/surrogate.hpp"
#include "safe/transform.hpp"

namespace safe {

struct LogisticOptions {
  double ridge = 1e-6;
  double tol = 1e-8;
  std::size_t max_iter = 100;
};

struct FitDiagnostics {
  std::size_t iterations = 0;
  double grad_norm = 0.0;  // max-norm of the penalized gradient
  bool converged = false;
  bool operator==(const FitDiagnostics&) const = default;
};

class LogisticModel {
 public:
  LogisticModel(double intercept, std::vector<std::string> names, std::vector<double> coefficients,
                double ridge, FitDiagnostics diagnostics = {});

  double intercept() const { return intercept_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  /// Throws ColumnMismatch for unknown names.
  double coefficient(const std::string& name) const;
  double ridge() const { return ridge_; }
  const FitDiagnostics& diagnostics() const { return diagnostics_; }

  std::string to_json_text() const;
  static LogisticModel from_json_text(const std::string& text);
  /// "feature\tcoefficient" lines, intercept first.
  std::string coefficients_tsv() const;

  /// Equal parameters under the same names, in any order.
  bool same_parameters(const LogisticModel& other) const;
  bool operator==(const LogisticModel&) const = default;

 private:
  double intercept_;
  std::vector<std::string> names_;
  std::vector<double> coefficients_;
  double ridge_;
  FitDiagnostics diagnostics_;
};

/// Minimizes mean log-loss + ridge/2 * |beta|^2 (intercept unpenalized) by
/// Newton steps with step halving. Non-convergence is only flagged in the
/// diagnostics.
LogisticModel fit_logistic(const DesignMatrix& design, std::span<const std::uint8_t> target,
                           const LogisticOptions& opts = {});

/// Penalized objective and gradient (intercept first) at the given
/// parameters, as minimized by fit_logistic.
double logistic_objective(const DesignMatrix& design, std::span<const std::uint8_t> target,
                          double ridge, std::span<const double> params);
std::vector<double> logistic_gradient(const DesignMatrix& design, std::span<const std::uint8_t> target,
                                      double ridge, std::span<const double> params);

/// Columns are matched by name; throws ColumnMismatch unless the name sets agree.
std::vector<double> predict_logistic(const LogisticModel& model, const DesignMatrix& design);

std::size_t param_count(const LogisticModel& model);
std::size_t param_count(const GbmModel& model);

/// Baseline design: numeric columns as is, categoricals one-hot without
/// their first level, named "<feature>_{level}".
DesignMatrix raw_design(const Dataset& data);

}  // namespace safe
