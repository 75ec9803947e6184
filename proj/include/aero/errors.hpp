#pragma once

#include <stdexcept>
#include <string>

namespace aero {

/// Base class for all domain errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// mesh
struct TruncatedBinary : Error { using Error::Error; };
struct MalformedAscii : Error { using Error::Error; };
struct EmptyMesh : Error { using Error::Error; };

// pointcloud
struct ZeroAreaMesh : Error { using Error::Error; };
struct EmptyCloud : Error { using Error::Error; };
struct TooFewClouds : Error { using Error::Error; };

// knn
struct KTooLarge : Error { using Error::Error; };

// autodiff / model
struct ShapeMismatch : Error { using Error::Error; };
struct BatchTooSmall : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct GraphSizeMismatch : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };

// training
struct TooFewDesigns : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct MissingCache : Error { using Error::Error; };
struct DivergedLoss : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct CorruptFile : Error { using Error::Error; };

// metrics
struct InvalidFlow : Error { using Error::Error; };
struct ZeroVariance : Error { using Error::Error; };
struct NearZeroActual : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };

// manifest
struct MissingColumn : Error { using Error::Error; };
struct DuplicateId : Error { using Error::Error; };
struct MissingStl : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

} // namespace aero
