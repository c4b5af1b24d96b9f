#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cscpr {

enum class ErrorKind {
  kInvalidArgument,
  kValidation,
  kIo,
  kNumeric,
  kDegenerateGeometry,
};

/// Base for every error thrown by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::kInvalidArgument, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

class DegenerateGeometry : public Error {
 public:
  explicit DegenerateGeometry(const std::string& what)
      : Error(ErrorKind::kDegenerateGeometry, what) {}
};

/// Carries every violated invariant found while validating a structure.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(ErrorKind::kValidation, join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "validation failed";
    for (const auto& issue : issues) {
      out += "; ";
      out += issue;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace cscpr
