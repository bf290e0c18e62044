#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace poai {

// Bad input values: out-of-range fields, malformed rows, empty batches.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// A value that violates a documented range, tagged with the offending field.
class FieldError : public ValidationError {
public:
    FieldError(std::string field, const std::string& what)
        : ValidationError(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Row-level failure while reading a text table. line is 1-based and counts the header.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Parameters that cannot produce a valid result (e.g. an empty pool-size interval).
class ConfigError : public ValidationError {
public:
    explicit ConfigError(const std::string& what) : ValidationError(what) {}
};

// Model layers whose shapes do not chain.
class StructureError : public ValidationError {
public:
    explicit StructureError(const std::string& what) : ValidationError(what) {}
};

// Model payload could not be decoded.
class FormatError : public ValidationError {
public:
    explicit FormatError(const std::string& what) : ValidationError(what) {}
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t epoch, const std::string& what)
        : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace poai
