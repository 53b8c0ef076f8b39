#pragma once

#include <stdexcept>
#include <string>

namespace lgc {

/// Malformed or inconsistent user input (bad dimensions, invalid indices,
/// unreadable files). The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine failed (non-convergent eigen-solver, singular system,
/// ill-conditioned block). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

}  // namespace detail
}  // namespace lgc
