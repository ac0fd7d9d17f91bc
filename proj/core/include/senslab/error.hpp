#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace senslab {

enum class ErrorCode {
    ShapeMismatch,
    NonFiniteValue,
    ClassOutOfRange,
    TraceMismatch,
    EmptyDataset,
    InvalidArgument,
    DimensionUnsupported,
    ZeroVariance,
    UnknownBlock,
    InsufficientImages,
    TargetUnresolvable,
    ParseError,
    MissingColumn,
    InsufficientRows,
    UnknownFeature,
    DegenerateCovariance,
    FormatError,
    InconsistentDims,
    IoError,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error code. Every module error in
/// the library is reported through this type.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace senslab
