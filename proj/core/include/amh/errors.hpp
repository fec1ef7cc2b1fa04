#pragma once

#include <stdexcept>
#include <string>

namespace amh {

/// A query parameter (or model input) lies outside its admissible set.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Sizes, bounds or level lists that cannot form a valid model or hierarchy.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an API precondition (stale generation, length mismatch, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A surrogate was asked to do work before it has enough training data.
class NotReadyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}
}  // namespace detail

}  // namespace amh
