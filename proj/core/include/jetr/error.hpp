#pragma once

#include <stdexcept>
#include <string>

namespace jetr {

// Every failure the library reports carries one of these kinds so callers
// (notably the CLI) can map failures onto exit codes without string matching.
enum class ErrorKind {
  DimMismatch,
  UndefinedSimilarity,
  InvalidArgument,
  NonFinite,
  DuplicateId,
  DanglingReference,
  ParseError,
  CorruptCheckpoint,
  EmptyStore,
  EmptyInput,
  DegenerateVariance,
  NotFound,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace jetr
