#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace etrep {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input violates a type invariant (non-orthonormal matrix, non-unit axis, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Argument outside the domain of a formula (||v|| >= 1, radius <= 0, ...).
struct DomainError : Error {
    using Error::Error;
};

// The requested quantity is not uniquely defined for the input.
struct DegenerateError : Error {
    using Error::Error;
};

struct IoError : Error {
    enum class Kind { Read, Write };

    IoError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

// Malformed document. pointer() is an RFC 6901 JSON pointer (or "row:col"
// style location for CSV) to the offending element.
struct SchemaError : Error {
    SchemaError(std::string pointer, const std::string& what)
        : Error(pointer + ": " + what), pointer_(std::move(pointer)) {}

    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

}  // namespace etrep
