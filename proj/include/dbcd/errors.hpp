#pragma once

#include <stdexcept>
#include <string>

namespace dbcd {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& what) : Error(what) {}
};

struct NotPositiveDefinite : Error {
    explicit NotPositiveDefinite(const std::string& what) : Error(what) {}
};

struct LabelOutOfRange : Error {
    explicit LabelOutOfRange(const std::string& what) : Error(what) {}
};

struct ZeroNormProfile : Error {
    explicit ZeroNormProfile(const std::string& what) : Error(what) {}
};

struct InfeasibleDegree : Error {
    explicit InfeasibleDegree(const std::string& what) : Error(what) {}
};

struct BadMagic : Error {
    explicit BadMagic(const std::string& what) : Error(what) {}
};

struct CountMismatch : Error {
    explicit CountMismatch(const std::string& what) : Error(what) {}
};

struct TruncatedFile : Error {
    explicit TruncatedFile(const std::string& what) : Error(what) {}
};

struct HourOutOfRange : Error {
    explicit HourOutOfRange(const std::string& what) : Error(what) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error(what) {}
};

struct ValueOutOfRange : Error {
    explicit ValueOutOfRange(const std::string& what) : Error(what) {}
};

// Warnings go to stderr; they never interrupt a run.
void warn(const std::string& message);

} // namespace dbcd
