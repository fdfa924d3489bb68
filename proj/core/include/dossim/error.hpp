#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "dossim/types.hpp"

namespace dossim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments or configuration handed in by a caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Broken internal invariant (e.g. out-of-order handle push, unknown seq).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : Error("line " + std::to_string(line) + ", field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// No instruction committed within the configured cycle budget.
class LivelockError : public Error {
 public:
  LivelockError(Cycle cycle, Cycle stalled_for, const std::string& what)
      : Error(what), cycle_(cycle), stalled_for_(stalled_for) {}

  Cycle cycle() const noexcept { return cycle_; }
  Cycle stalled_for() const noexcept { return stalled_for_; }

 private:
  Cycle cycle_;
  Cycle stalled_for_;
};

class BlobError : public Error {
 public:
  using Error::Error;
};

}  // namespace dossim
