#pragma once

#include <stdexcept>
#include <string>

namespace fpc {

// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Invalid user configuration. `line` is 0 when no config file line applies.
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& msg, int line = 0)
      : std::invalid_argument(msg), line(line) {}
  int line;
};

struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

struct UnsupportedError : std::logic_error {
  using std::logic_error::logic_error;
};

struct UndefinedQuotientError : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace fpc
