#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blaircomp {

// Shape or dimension mismatch between inputs.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A scalar parameter outside its admissible range (norms, variances, step sizes).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterate or alignment input that cannot be used (zero block, zero target).
class DegenerateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Sample or node index outside the instance.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Bad experiment configuration; `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// The solver produced a non-finite or exploding loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace blaircomp
