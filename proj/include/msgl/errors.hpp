// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace msgl {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or structural setting.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API called outside its contract (non-scalar loss, bad class index, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A forward op produced NaN or Inf from finite inputs.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent dataset files; message names file and line.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Statistic fitting failed (e.g. a feature with no valid observation).
class FitError : public Error {
 public:
  using Error::Error;
};

/// Artifact or checkpoint could not be written or read back.
class PersistenceError : public Error {
 public:
  using Error::Error;
};

/// ROC/AUC requested for a class that is never (or always) positive.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace msgl
