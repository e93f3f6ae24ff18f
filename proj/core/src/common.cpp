#include "sublaplace/common.hpp"

namespace sublaplace {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::kRegression:
      return "regression";
    case Task::kClassification:
      return "classification";
  }
  return "unknown";
}

Task task_from_string(std::string_view name) {
  if (name == "regression") return Task::kRegression;
  if (name == "classification") return Task::kClassification;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown task '" + std::string(name) + "'");
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kNotPsd: return "NotPSD";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kDivergedTraining: return "DivergedTraining";
    case ErrorCode::kInvalidNoiseVariance: return "InvalidNoiseVariance";
    case ErrorCode::kInvalidSize: return "InvalidSize";
    case ErrorCode::kNonPositiveDiagonal: return "NonPositiveDiagonal";
    case ErrorCode::kIndexMapMismatch: return "IndexMapMismatch";
    case ErrorCode::kTaskMismatch: return "TaskMismatch";
    case ErrorCode::kMissingCurvature: return "MissingCurvature";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kEmptyValidation: return "EmptyValidation";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace sublaplace
