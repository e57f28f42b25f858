#pragma once

#include <stdexcept>
#include <string>

namespace rlcov {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed malformed input: wrong sizes, out-of-range parameters,
/// unreadable files.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A factorization or solve broke down. `node()` names the tree node where it
/// happened, or -1 when the failure is not tied to a node.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, int node = -1)
      : Error(node >= 0 ? what + " (node " + std::to_string(node) + ")" : what), node_(node) {}

  int node() const noexcept { return node_; }

 private:
  int node_;
};

}  // namespace rlcov
