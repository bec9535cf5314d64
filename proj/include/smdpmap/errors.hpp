#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smdpmap {

// Base of all library errors. Subclasses fall into the exit-code classes
// used by the CLI: config (2), input (3), numerical (4), stale artifact (5).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- input / parsing ----

class InputError : public Error {
public:
    using Error::Error;
};

class MalformedRecord : public InputError {
public:
    MalformedRecord(std::size_t line, const std::string& reason)
        : InputError("line " + std::to_string(line) + ": " + reason), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class InconsistentDimensions : public InputError {
public:
    InconsistentDimensions(std::size_t line, const std::string& field,
                           long expected, long found)
        : InputError("line " + std::to_string(line) + ": " + field + " has length " +
                     std::to_string(found) + ", expected " + std::to_string(expected)) {}
};

class BrokenEpisode : public InputError {
public:
    using InputError::InputError;
};

class MissingInput : public InputError {
public:
    explicit MissingInput(const std::string& path)
        : InputError("missing input: " + path) {}
};

class MissingRawChannel : public InputError {
public:
    MissingRawChannel() : InputError("dataset has no raw channel") {}
};

class InsufficientEpisodes : public InputError {
public:
    InsufficientEpisodes(int k_traj, std::size_t episodes)
        : InputError("k_traj=" + std::to_string(k_traj) + " exceeds episode count " +
                     std::to_string(episodes)) {}
};

// ---- configuration ----

class ConfigError : public Error {
public:
    using Error::Error;
};

// ---- numerical ----

class NumericalError : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class CalibrationFailed : public NumericalError {
public:
    CalibrationFailed(std::size_t row, const std::string& reason)
        : NumericalError("perplexity calibration failed at row " + std::to_string(row) +
                         ": " + reason),
          row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

class NumericalDivergence : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingularSystem : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ZeroNorm : public NumericalError {
public:
    ZeroNorm() : NumericalError("reference value vector has zero norm") {}
};

// ---- artifacts ----

class StaleArtifact : public Error {
public:
    using Error::Error;
};

}  // namespace smdpmap
