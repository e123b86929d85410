#pragma once

#include <stdexcept>
#include <string>

namespace semco {

// Bad input data: unreadable files, malformed rows, unresolvable labels.
// The CLI maps this to exit code 2.
struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: non-finite losses or parameters, degenerate vectors.
// The CLI maps this to exit code 3.
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace semco
