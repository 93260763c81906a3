#pragma once

#include <stdexcept>
#include <string>

#include "manner/precision.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (model, trainer or run config file).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Problems with input data: WAV files, corpus pairing, sample rates.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, truncated or incompatible checkpoint files.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace MANNER_ABI_NS
}  // namespace manner
