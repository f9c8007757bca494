#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nalin {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Failure categories shared by every module; the C API maps them to status codes.
enum class ErrorCode {
  invalid_argument = 1,
  numerical_failure,
  escape,
  degenerate_cocycle,
  non_hyperbolic,
  resolution,
  splitting,
  orbit,
  inverse,
  budget_violation,
  domain,
  tail,
  config,
  io,
};

const char* to_string(ErrorCode code);

/// Spectral norm (largest singular value).
inline double operator_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Integration failure on [s, t]; carries the offending interval.
class NumericalFailure : public Error {
 public:
  NumericalFailure(double s, double t, const std::string& what)
      : Error(ErrorCode::numerical_failure, what), s_(s), t_(t) {}

  double start() const noexcept { return s_; }
  double end() const noexcept { return t_; }

 private:
  double s_;
  double t_;
};

/// Orbit left the configured escape ball.
class EscapeError : public Error {
 public:
  EscapeError(double time, double norm, const std::string& what)
      : Error(ErrorCode::escape, what), time_(time), norm_(norm) {}

  double time() const noexcept { return time_; }
  double norm() const noexcept { return norm_; }

 private:
  double time_;
  double norm_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::invalid_argument, what);
}

}  // namespace nalin
