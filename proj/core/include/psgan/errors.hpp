#pragma once

#include <stdexcept>
#include <string>

namespace psgan {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Geometry / data errors (CLI exit code 2)
struct BoxTooLarge : Error { using Error::Error; };
struct SceneTooSmall : Error { using Error::Error; };
struct OutOfBounds : Error { using Error::Error; };
struct CropTooSmall : Error { using Error::Error; };
struct InvalidBox : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct CorruptCheckpoint : Error { using Error::Error; };

// Numeric failure (CLI exit code 3)
struct NanDetected : Error { using Error::Error; };

}  // namespace psgan
