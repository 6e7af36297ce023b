#pragma once

#include <stdexcept>
#include <string>

namespace moecap {

// Raised for any input that violates a documented invariant. The CLI maps
// these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Trace parsing/validation failure. `line` is 1-based and 0 when the error is
// not tied to a line (e.g. a sheet built in memory).
class TraceError : public ValidationError {
 public:
  TraceError(std::size_t line, long long pass_id, const std::string& message)
      : ValidationError(describe(line, pass_id), message), line_(line), pass_id_(pass_id) {}

  std::size_t line() const noexcept { return line_; }
  long long pass_id() const noexcept { return pass_id_; }

 private:
  static std::string describe(std::size_t line, long long pass_id) {
    std::string where;
    if (line > 0) where = "line " + std::to_string(line);
    if (pass_id >= 0) where += (where.empty() ? "" : ", ") + std::string("pass_id ") + std::to_string(pass_id);
    return where.empty() ? "trace" : where;
  }

  std::size_t line_;
  long long pass_id_;
};

// A rule table or similar configuration that is internally inconsistent.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace moecap
