#pragma once

#include <stdexcept>
#include <string>

namespace mati {

enum class ErrorKind {
  Domain,
  Convergence,
  SolverStall,
  NoCertificate,
  Ingestion,
  Verification,
  Precondition,
};

/// Single exception type for the library; the kind drives C status codes and
/// CLI exit codes.
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

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::Domain, what);
}

}  // namespace mati
