#pragma once

#include <stdexcept>
#include <string>

namespace occdist {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape or dimensionality disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid scalar argument (e.g. non-positive temperature).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API precondition (non-scalar loss, double occlusion, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed file content (bad magic, truncated payload).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Two inputs that must agree do not (image/label counts, label vectors).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Checkpoint/network architecture mismatch.
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

// Unusable dataset (empty, missing class candidates).
class DatasetError : public Error {
 public:
  using Error::Error;
};

// Stratified split cannot be formed.
class StratificationError : public Error {
 public:
  using Error::Error;
};

// Training cannot proceed (e.g. single-class SVM input).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Value outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace occdist
