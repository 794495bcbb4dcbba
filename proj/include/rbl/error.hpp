#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Core>

namespace rbl {

enum class ErrorCode {
  invalid_argument,
  invalid_conformation,
  invalid_pose,
  missing_twist,
  degenerate_projection,
  invalid_interval,
  invalid_anchors,
  undefined_bearing,
  insufficient_anchors,
  invalid_policy,
  incomplete_input,
  completion_infeasible,
  ambiguous_alignment,
  underdetermined,
  degenerate_embedding,
  invalid_heading,
  singular_fim,
  unobservable_twist,
  config,
  io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_conformation: return "invalid-conformation";
    case ErrorCode::invalid_pose: return "invalid-pose";
    case ErrorCode::missing_twist: return "missing-twist";
    case ErrorCode::degenerate_projection: return "degenerate-projection";
    case ErrorCode::invalid_interval: return "invalid-interval";
    case ErrorCode::invalid_anchors: return "invalid-anchors";
    case ErrorCode::undefined_bearing: return "undefined-bearing";
    case ErrorCode::insufficient_anchors: return "insufficient-anchors";
    case ErrorCode::invalid_policy: return "invalid-policy";
    case ErrorCode::incomplete_input: return "incomplete-input";
    case ErrorCode::completion_infeasible: return "completion-infeasible";
    case ErrorCode::ambiguous_alignment: return "ambiguous-alignment";
    case ErrorCode::underdetermined: return "underdetermined";
    case ErrorCode::degenerate_embedding: return "degenerate-embedding";
    case ErrorCode::invalid_heading: return "invalid-heading";
    case ErrorCode::singular_fim: return "singular-fim";
    case ErrorCode::unobservable_twist: return "unobservable-twist";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }  // without the code prefix

 private:
  ErrorCode code_;
  std::string message_;
};

/// Raised when a linear model is rank deficient; carries an orthonormal
/// basis (one column per direction) of the unobservable subspace.
class RankDeficientError : public Error {
 public:
  RankDeficientError(ErrorCode code, const std::string& message, Eigen::MatrixXd null_space)
      : Error(code, message), null_space_(std::move(null_space)) {}

  const Eigen::MatrixXd& null_space() const noexcept { return null_space_; }

 private:
  Eigen::MatrixXd null_space_;
};

}  // namespace rbl
