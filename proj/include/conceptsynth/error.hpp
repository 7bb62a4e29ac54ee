#pragma once

#include <stdexcept>
#include <string>

namespace csynth {

// Process exit codes surfaced by the CLI.
enum class ExitCode : int {
  kSuccess = 0,
  kValidation = 1,
  kBackend = 2,
  kInterrupted = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kValidation; }
};

// Malformed input records, schema violations, precondition failures.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Checkpoint unusable for the current run (fingerprint mismatch, corrupt file).
class CheckpointError : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kBackend; }
};

// Endpoint unreachable or kept failing after all retry attempts.
class TransportError : public BackendError {
 public:
  TransportError(const std::string& message, int attempts)
      : BackendError(message + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

// Endpoint answered but the payload did not match the wire protocol.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& message, std::string raw_output)
      : Error(message), raw_output_(std::move(raw_output)) {}
  const std::string& raw_output() const noexcept { return raw_output_; }

 private:
  std::string raw_output_;
};

// Raised between work chunks when a stop was requested; the checkpoint is durable.
class Interrupted : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kInterrupted; }
};

}  // namespace csynth
