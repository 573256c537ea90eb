#pragma once

#include <stdexcept>
#include <string>

namespace tlf {

/// Violated precondition or invalid value fed to a pure operation.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad configuration, missing/corrupt input file, inconsistent run setup.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric failure during optimization (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch(epoch) {}
  int epoch;
};

}  // namespace tlf
