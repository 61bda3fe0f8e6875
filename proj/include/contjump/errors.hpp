#pragma once

#include <stdexcept>
#include <string>

namespace contjump {

/** @brief A numeric parameter lies outside its admissible range. */
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/** @brief Geometry and kernel supports are incompatible. */
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** @brief A point was expected to belong to a configuration. */
class MembershipError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/** @brief A formula was evaluated outside its domain. */
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/** @brief A derivative of a non-differentiable profile was requested. */
class NotDifferentiable : public DomainError {
 public:
  using DomainError::DomainError;
};

/** @brief Requested operation is not available for this input kind. */
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/** @brief A size budget was exceeded. */
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace contjump
