#pragma once

#include <stdexcept>
#include <string>

namespace qlrg {

enum class ErrorCode {
  invalid_argument = 1,
  ordering_mismatch = 2,
  truncation_overflow = 3,
  unbounded_below = 4,
  non_convergence = 5,
  parse = 6,
  io = 7,
};

// All library failures are reported through this type; the C API maps the
// code onto qlrg_status.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

} // namespace qlrg
