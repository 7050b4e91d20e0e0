#pragma once

#include <stdexcept>
#include <string>

namespace dcin {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an API precondition (shape mismatch, empty index, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (bad bin count, malformed option, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written, or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented invariant (zero-norm embedding, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// An external or stub predictor failed to produce a usable mask.
class PredictionError : public Error {
 public:
  using Error::Error;
};

/// Prediction/ground-truth sets cannot be evaluated together.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcin
