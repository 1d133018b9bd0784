#pragma once

#include <stdexcept>
#include <string>

namespace ovclip {

// Error taxonomy. Every failure surfaced by the library derives from Error, so
// callers can distinguish "this library failed" from generic std exceptions.
// The CLI maps these onto process exit codes (usage=2, numeric=3, io=4).

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad value passed to an operation (shape mismatch, out-of-range scalar, ...).
struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

// A configuration struct is internally inconsistent.
struct InvalidConfig : Error {
  explicit InvalidConfig(const std::string& msg) : Error(msg) {}
};

// Computation produced NaN/Inf or an otherwise unusable numeric result.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Filesystem-level failure: cannot open, read, write or rename.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Structural problems in a serialized artifact. Subclasses keep the three
// corruption modes distinguishable in tests and error messages.
struct FormatError : IoError {
  explicit FormatError(const std::string& msg) : IoError(msg) {}
};

struct BadMagicError : FormatError {
  explicit BadMagicError(const std::string& msg) : FormatError(msg) {}
};

struct TruncatedError : FormatError {
  explicit TruncatedError(const std::string& msg) : FormatError(msg) {}
};

struct ChecksumError : FormatError {
  explicit ChecksumError(const std::string& msg) : FormatError(msg) {}
};

// Remote caption backend failed after all retries, or answered garbage.
struct BackendError : Error {
  explicit BackendError(const std::string& msg) : Error(msg) {}
};

struct EmptyCompletionError : BackendError {
  explicit EmptyCompletionError(const std::string& msg) : BackendError(msg) {}
};

}  // namespace ovclip
