#include "senslab/error.hpp"

namespace senslab {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::ClassOutOfRange: return "ClassOutOfRange";
        case ErrorCode::TraceMismatch: return "TraceMismatch";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionUnsupported: return "DimensionUnsupported";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::UnknownBlock: return "UnknownBlock";
        case ErrorCode::InsufficientImages: return "InsufficientImages";
        case ErrorCode::TargetUnresolvable: return "TargetUnresolvable";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::InsufficientRows: return "InsufficientRows";
        case ErrorCode::UnknownFeature: return "UnknownFeature";
        case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::InconsistentDims: return "InconsistentDims";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace senslab
