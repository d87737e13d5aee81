#pragma once

#include <stdexcept>
#include <string>

namespace dogma {

/// Coarse classification of failures; the CLI maps these onto exit codes.
enum class ErrorKind {
  argument,            // malformed input: shapes, ranges, missing pieces
  unsupported_regime,  // formula not defined for this parameter regime
  out_of_domain,       // formula defined but numerically ill-behaved here
  numeric,             // non-finite values, failed factorizations
  degeneracy,          // near-zero denominators, constant pilots, ...
  identifiability,     // flat block of a linear model is not identified
  insufficient_sample,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error(ErrorKind::argument, w) {}
};
struct UnsupportedRegimeError : Error {
  explicit UnsupportedRegimeError(const std::string& w) : Error(ErrorKind::unsupported_regime, w) {}
};
struct OutOfDomainError : Error {
  explicit OutOfDomainError(const std::string& w) : Error(ErrorKind::out_of_domain, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};
struct DegeneracyError : Error {
  explicit DegeneracyError(const std::string& w) : Error(ErrorKind::degeneracy, w) {}
};
struct IdentifiabilityError : Error {
  explicit IdentifiabilityError(const std::string& w) : Error(ErrorKind::identifiability, w) {}
};
struct InsufficientSampleError : Error {
  explicit InsufficientSampleError(const std::string& w) : Error(ErrorKind::insufficient_sample, w) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ArgumentError(msg);
}

}  // namespace dogma
