#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qers {

// Root of every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data (out-of-range fields, malformed files, unusable datasets).
class DataError : public Error {
public:
    using Error::Error;
};

class ValidationError : public DataError {
public:
    ValidationError(std::string field, const std::string& reason)
        : DataError(field + ": " + reason), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class EmptyDataset : public DataError {
public:
    EmptyDataset() : DataError("empty dataset") {}
    explicit EmptyDataset(const std::string& what) : DataError(what) {}
};

class InvalidBounds : public DataError {
public:
    using DataError::DataError;
};

class MissingCriterion : public DataError {
public:
    explicit MissingCriterion(std::string criterion)
        : DataError("missing criterion " + criterion), criterion_(std::move(criterion)) {}

    const std::string& criterion() const noexcept { return criterion_; }

private:
    std::string criterion_;
};

class OutOfRange : public DataError {
public:
    using DataError::DataError;
};

class CsvParseError : public DataError {
public:
    CsvParseError(std::size_t line, const std::string& reason)
        : DataError("line " + std::to_string(line) + ": " + reason), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class UnknownHeader : public DataError {
public:
    using DataError::DataError;
};

class InsufficientData : public DataError {
public:
    using DataError::DataError;
};

class InsufficientGroupData : public DataError {
public:
    using DataError::DataError;
};

class TooFewTrees : public DataError {
public:
    using DataError::DataError;
};

class MissingFeature : public DataError {
public:
    explicit MissingFeature(const std::string& name) : DataError("missing feature " + name) {}
};

class FeatureMismatch : public DataError {
public:
    using DataError::DataError;
};

class UnknownPreset : public DataError {
public:
    explicit UnknownPreset(const std::string& name) : DataError("unknown preset " + name) {}
};

class ConfigError : public DataError {
public:
    using DataError::DataError;
};

class IoError : public Error {
public:
    using Error::Error;
};

class SinkFailure : public Error {
public:
    SinkFailure(std::size_t index, const std::string& reason)
        : Error("sink failed at sample " + std::to_string(index) + ": " + reason), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

} // namespace qers
