#ifndef CHORRNN_ERRORS_HPP
#define CHORRNN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace chorrnn {

// Dimension or length mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input data: sequence files, checkpoints, request bodies.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/inf produced during training or a failed numerical check.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chorrnn

#endif  // CHORRNN_ERRORS_HPP
