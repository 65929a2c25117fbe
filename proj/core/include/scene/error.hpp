#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scene {

enum class ErrorKind {
  invalid_architecture,
  shape,
  contract_violation,
  training_diverged,
  empty_dataset,
  singular_curve,
  singular_survival,
  undefined_cindex,
  invalid_parameter,
  invalid_spec,
  invalid_quantile,
  non_convergence,
  insufficient_support,
  misaligned_curves,
  parse,
  schema,
  config,
  io,
};

/// Stable, machine-parsable name of an error kind ("training-diverged", ...).
std::string_view kind_name(ErrorKind kind) noexcept;

/// Every failure raised by the library. `what()` carries the detail only;
/// the kind is kept separately so front ends can format `<kind>: <detail>`.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Error raised when a gradient, loss, or network output stops being finite.
/// `where` is a layer index or an iteration index depending on the raiser.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& detail, long where)
      : Error(ErrorKind::training_diverged, detail), where_(where) {}

  long where() const noexcept { return where_; }

 private:
  long where_;
};

/// Raised by the fixed-point solver; keeps the last sup-norm change.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& detail, double last_residual)
      : Error(ErrorKind::non_convergence, detail), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace scene
