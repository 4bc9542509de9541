#pragma once

#include <stdexcept>
#include <string>

namespace pjfnn {

// Exception hierarchy. The three roots map onto CLI exit codes:
// UsageError -> 1, DataError -> 2, RuntimeFailure -> 3.

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// tensor_core / nn_layers
class DimensionError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class ContractError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class SequenceTooShortError : public DataError {
public:
    SequenceTooShortError(std::size_t item, std::size_t length, std::size_t required)
        : DataError("item " + std::to_string(item) + " has length " + std::to_string(length) +
                    ", shorter than required " + std::to_string(required)),
          item_(item) {}
    std::size_t item() const { return item_; }

private:
    std::size_t item_;
};

class DegenerateBatchError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class NumericError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

// embeddings
class EmptyCorpusError : public DataError {
public:
    using DataError::DataError;
};

class InsufficientVocabularyError : public DataError {
public:
    using DataError::DataError;
};

// model / data
class EmptyDocumentError : public DataError {
public:
    using DataError::DataError;
};

class UndefinedDistanceError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& file, std::size_t line, std::size_t column, const std::string& what)
        : DataError(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class ReferentialIntegrityError : public DataError {
public:
    using DataError::DataError;
};

class DuplicateIdError : public DataError {
public:
    using DataError::DataError;
};

class UnderfullSplitError : public DataError {
public:
    using DataError::DataError;
};

class NotFoundError : public DataError {
public:
    using DataError::DataError;
};

class SamplingError : public DataError {
public:
    using DataError::DataError;
};

class UndefinedAucError : public DataError {
public:
    using DataError::DataError;
};

class ConfigError : public UsageError {
public:
    using UsageError::UsageError;
};

// checkpoint persistence
class IoError : public DataError {
public:
    using DataError::DataError;
};

class CheckpointFormatError : public DataError {
public:
    using DataError::DataError;
};

class CheckpointVersionError : public CheckpointFormatError {
public:
    using CheckpointFormatError::CheckpointFormatError;
};

class CheckpointTruncatedError : public CheckpointFormatError {
public:
    using CheckpointFormatError::CheckpointFormatError;
};

class CheckpointChecksumError : public CheckpointFormatError {
public:
    using CheckpointFormatError::CheckpointFormatError;
};

}  // namespace pjfnn
