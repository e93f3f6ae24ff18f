#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace sublaplace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class Task { kRegression, kClassification };

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNotPositiveDefinite,
  kNotPsd,
  kEmptyDataset,
  kDivergedTraining,
  kInvalidNoiseVariance,
  kInvalidSize,
  kNonPositiveDiagonal,
  kIndexMapMismatch,
  kTaskMismatch,
  kMissingCurvature,
  kTooFewPoints,
  kParseError,
  kMissingColumn,
  kEmptyValidation,
  kIoError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so
// callers (the CLI in particular) can map them to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sublaplace
