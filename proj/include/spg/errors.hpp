#pragma once

#include <stdexcept>
#include <string>

namespace spg {

// Shape/precondition violations on tensor ops and net forwards.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where the training loop must abort (CLI exit code 3).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset/checkpoint file problems (CLI exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration values (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spg
