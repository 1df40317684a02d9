#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pwmd {

// Every failure the library reports is one of these. The CLI maps them to exit
// codes: validation problems exit 2, everything else exits 3.
enum class ErrorKind {
  validation,   // malformed input, violated model invariant
  sizing,       // enumeration or dense problem too large
  capability,   // operation not supported for this model / distribution
  range,        // numeric domain violated (e.g. tilt beyond the MGF domain)
  degenerate,   // zero variance model
  dependency,   // a required auxiliary input is missing
  divergence,   // a monotone search never reached its target
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class SizingError : public Error {
 public:
  SizingError(const std::string& what, std::uint64_t cardinality)
      : Error(ErrorKind::sizing, what), cardinality_(cardinality) {}
  std::uint64_t cardinality() const noexcept { return cardinality_; }

 private:
  std::uint64_t cardinality_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::validation, what);
}

}  // namespace pwmd
