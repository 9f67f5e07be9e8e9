#pragma once

#include <stdexcept>
#include <string>

namespace disent {

/// Invalid configuration (bad sizes, empty sweep axes, zero anneal steps...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of an operation (shape mismatch, index out of range).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Checkpoint or results file failed validation.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A representation carries no usable signal for a metric.
class DegenerateRepresentation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input rows miss a required column or metric.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(long step, const std::string& what)
      : std::runtime_error("non-finite loss at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace disent
