#pragma once

#include <stdexcept>
#include <string>

namespace pdisc {

/// Invalid parameter value for a distribution, response, or operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bad or inconsistent configuration (unknown parameter, unstable step, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to reach its accuracy contract.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pdisc
