#pragma once

#include <stdexcept>
#include <string>

namespace specdiff {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Geometry that cannot define a transform or region (coincident eyes, flat boxes).
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

/// A crop box that lies entirely outside the image.
class EmptyRegionError : public Error {
public:
    using Error::Error;
};

/// Shape or length mismatch between two inputs.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Image decode/encode failures.
class ImageIoError : public Error {
public:
    using Error::Error;
};

/// Manifest ingestion failures. `line()` is 1-based, 0 when not tied to a line.
class ManifestError : public Error {
public:
    ManifestError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid split parameters (k out of range, too few subjects).
class SplitError : public Error {
public:
    using Error::Error;
};

/// Training-data problems: one class only, non-finite features, bad dimensions.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Model/descriptor kind or dimension mismatch at inference time.
class ModelMismatchError : public Error {
public:
    using Error::Error;
};

/// Corrupt, truncated or wrong-version serialized artifacts.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Metric evaluation without both classes present, or unknown grouping.
class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace specdiff
