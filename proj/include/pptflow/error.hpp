#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace pptflow {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  kSchema,       // malformed input file or column set
  kDomain,       // precondition on values (empty direction, too short series, ...)
  kNumeric,      // non-finite values, divergence
  kArtifact,     // checkpoint / data mismatch, bad magic
  kMissingFile,  // input path does not exist
  kDimension,    // tensor shape mismatch
  kConfig,       // invalid configuration value
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSchema: return 2;
    case ErrorKind::kDomain: return 3;
    case ErrorKind::kNumeric: return 4;
    case ErrorKind::kArtifact: return 5;
    case ErrorKind::kMissingFile: return 66;
    case ErrorKind::kDimension: return 3;
    case ErrorKind::kConfig: return 2;
  }
  return 1;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

// Warnings go through a replaceable sink so tests can observe them.
using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

inline void warn(const std::string& msg) {
  if (warning_sink()) warning_sink()(msg);
}

}  // namespace pptflow
