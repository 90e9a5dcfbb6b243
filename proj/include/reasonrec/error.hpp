#pragma once

#include <stdexcept>
#include <string>

namespace reasonrec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; message names the file and line.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// An upstream pipeline stage has not produced its outputs yet.
class MissingStageError : public Error {
 public:
  MissingStageError(std::string stage, const std::string& what)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Retries exhausted on transient failures.
class TransportError : public Error {
 public:
  TransportError(int attempts, const std::string& what)
      : Error(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

// Non-retryable 4xx from the backend.
class RequestError : public Error {
 public:
  RequestError(int status, const std::string& server_message)
      : Error("request rejected with HTTP " + std::to_string(status) + ": " + server_message),
        status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// The configured backend cannot provide the requested output.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace reasonrec
