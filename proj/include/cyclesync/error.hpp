#pragma once

#include <stdexcept>
#include <string>

namespace cyclesync {

/// Raised for precondition violations, malformed input and solver failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CYCLESYNC_CHECK(cond, msg)               \
  do {                                           \
    if (!(cond)) throw ::cyclesync::Error(msg);  \
  } while (false)

}  // namespace cyclesync
