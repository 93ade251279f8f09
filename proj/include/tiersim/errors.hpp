#pragma once

#include <stdexcept>
#include <string>

namespace tiersim {

/// Bad user input: malformed trace, unknown config key, out-of-range value.
/// The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A timing or bookkeeping invariant of the simulator was violated. Always a
/// bug, never an input condition. The CLI maps this to exit code 2.
class InvariantFault : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tiersim
