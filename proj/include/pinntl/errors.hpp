#pragma once

#include <stdexcept>
#include <string>

namespace pinntl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand or input dimensions do not match what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation was asked to differentiate through a node kind that has no rule.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (non-scalar loss root, misaligned gradient, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint could not be read back.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function (e.g. y outside [0, H]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A relative norm was requested against an all-zero reference.
class UndefinedNormError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class TransferError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Invalid experiment configuration; `key()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string key) : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace pinntl
