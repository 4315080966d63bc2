#pragma once

#include <stdexcept>
#include <string>

namespace sizeseg {

// Precondition violated by an argument value (empty domain, out-of-range id, bad shape).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Inconsistent configuration detected before any work starts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure while running (I/O, non-finite loss, corrupt files).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sizeseg
