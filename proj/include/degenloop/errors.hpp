#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace degenloop {

// Shapes of two operands do not conform.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation (e.g. t > 1).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Invalid experiment or dataset configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A loss or gradient became non-finite during training.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File system or format failure. The message always carries the path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail
}  // namespace degenloop
