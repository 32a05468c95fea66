#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hmmob {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Every emission density vanished (after the log-space guard) at time `index`.
class UnderflowError : public NumericalError {
 public:
  UnderflowError(const std::string& what, std::size_t index)
      : NumericalError(what + " (t=" + std::to_string(index) + ")"), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class SamplerStuckError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Dirichlet hyperparameters too small for the posterior rate to exist.
class RateConditionError : public Error {
 public:
  RateConditionError(const std::string& what, double deficit)
      : Error(what), deficit_(deficit) {}

  double deficit() const noexcept { return deficit_; }

 private:
  double deficit_;
};

}  // namespace hmmob
