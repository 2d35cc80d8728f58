#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mi_embed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input vector or parameter shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Not enough users or samples to satisfy a requested split or subsample.
class SizingError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public SizingError {
 public:
  using SizingError::SizingError;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Backward pass given a cache that was produced by a different network revision.
class StaleCacheError : public Error {
 public:
  using Error::Error;
};

class DegenerateBatch : public Error {
 public:
  using Error::Error;
};

class DegenerateSimilarity : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(const std::string& what, long epoch = -1, long shadow = -1)
      : Error(what), epoch_(epoch), shadow_(shadow) {}

  long epoch() const { return epoch_; }
  long shadow_index() const { return shadow_; }

 private:
  long epoch_;
  long shadow_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}

  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

}  // namespace mi_embed
