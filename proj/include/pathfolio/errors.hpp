#pragma once

#include <stdexcept>
#include <string>

namespace pathfolio {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidParams : Error {
    using Error::Error;
};

struct InvalidHorizon : InvalidParams {
    using InvalidParams::InvalidParams;
};

struct IndexOutOfRange : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// Wealth factor became nonpositive: the allocation is incompatible with the
// jump size, i.e. the input lies outside the modeled domain.
struct Ruin : Error {
    double time;
    explicit Ruin(double t)
        : Error("wealth factor <= 0 at t = " + std::to_string(t)), time(t) {}
    Ruin(double t, const std::string& detail)
        : Error("wealth factor <= 0 at t = " + std::to_string(t) + " (" + detail + ")"),
          time(t) {}
};

struct OmegaViolation : Error {
    using Error::Error;
};

struct StateCorrupt : Error {
    using Error::Error;
};

struct BoundViolation : Error {
    using Error::Error;
};

struct EmptyScenarioSet : Error {
    using Error::Error;
};

struct SingularSigma : Error {
    using Error::Error;
};

struct UnknownKind : Error {
    using Error::Error;
};

// CSV ingestion errors carry the offending 1-based row number.
struct CsvError : Error {
    std::size_t row;
    CsvError(const std::string& what, std::size_t r)
        : Error(what + " (row " + std::to_string(r) + ")"), row(r) {}
};

struct NonPositivePrice : CsvError {
    explicit NonPositivePrice(std::size_t r) : CsvError("non-positive price", r) {}
};

struct NonMonotoneTime : CsvError {
    explicit NonMonotoneTime(std::size_t r) : CsvError("non-monotone time", r) {}
};

struct MalformedRow : CsvError {
    explicit MalformedRow(std::size_t r) : CsvError("malformed row", r) {}
};

}  // namespace pathfolio
