#pragma once

#include <stdexcept>
#include <string>

namespace scg {

// Shape disagreement between operands; message names the operation.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite or out-of-domain numeric input (log/softmax on NaN/inf, log of
// a non-positive value).
class NumericDomainError : public std::runtime_error {
 public:
  explicit NumericDomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: non-scalar loss, tau <= 0, missing gradients, bad targets.
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed expression or file content.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace scg
