#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "manner/tensor.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

enum class ParamKind : std::uint8_t { kTrainable = 0, kBuffer = 1 };

/// Named tensors of a model in registration order. Buffers (batch-norm
/// running statistics) are stored alongside trainable parameters so that a
/// checkpoint captures the full model state.
class ParameterTree {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    ParamKind kind;
  };

  /// Registers `tensor` under a unique name and returns the stored handle.
  Tensor add(const std::string& name, Tensor tensor, ParamKind kind);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Tensor> trainable() const;

  /// Number of trainable scalars.
  std::int64_t parameter_count() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Creates and registers initialized parameters under a dotted name prefix.
/// Children share the tree and the random stream, so initialization depends
/// only on the seed and the registration order.
class ParamBuilder {
 public:
  ParamBuilder(ParameterTree& tree, std::uint64_t seed);

  ParamBuilder child(const std::string& name);
  std::string path(const std::string& name) const;

  /// Uniform in [-bound, bound].
  Tensor uniform(const std::string& name, Shape shape, double bound);
  Tensor constant(const std::string& name, Shape shape, Scalar value);
  Tensor buffer(const std::string& name, Shape shape, Scalar value);

 private:
  ParamBuilder(ParameterTree* tree, std::mt19937_64* rng, std::string prefix)
      : tree_(tree), rng_(rng), prefix_(std::move(prefix)) {}

  ParameterTree* tree_;
  std::shared_ptr<std::mt19937_64> owned_rng_;
  std::mt19937_64* rng_;
  std::string prefix_;
};

}  // namespace MANNER_ABI_NS
}  // namespace manner
