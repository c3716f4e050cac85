#include "multicfv/error.hpp"

namespace multicfv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonHexInput: return "NonHexInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::MalformedAst: return "MalformedAst";
    case ErrorKind::Duplicate: return "Duplicate";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::ModelMissing: return "ModelMissing";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::CorruptFile: return "CorruptFile";
  }
  return "Unknown";
}

}  // namespace multicfv
