#pragma once

#include <stdexcept>
#include <string>

namespace emomix {

// Base for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or command-line values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A loss term became non-finite during training.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string term, double value, long step)
      : Error("divergence at step " + std::to_string(step) + ": " + term +
              " = " + std::to_string(value)),
        term_(std::move(term)),
        value_(value),
        step_(step) {}

  const std::string& term() const noexcept { return term_; }
  double value() const noexcept { return value_; }
  long step() const noexcept { return step_; }

 private:
  std::string term_;
  double value_;
  long step_;
};

}  // namespace emomix
