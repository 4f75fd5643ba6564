#pragma once

#include <stdexcept>
#include <string>

namespace speedbias {

// Malformed input data or files (templates, lexica, corpora, checkpoints).
// CLI maps this family to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid invocation / configuration. CLI maps this to exit code 1.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// A run failed mid-flight (diverged training, I/O trouble, ...). Exit code 3.
struct RunError : std::runtime_error {
  explicit RunError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace speedbias
