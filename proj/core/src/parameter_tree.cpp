#include "manner/parameter_tree.hpp"

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

Tensor ParameterTree::add(const std::string& name, Tensor tensor, ParamKind kind) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  tensor.set_requires_grad(kind == ParamKind::kTrainable);
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{name, tensor, kind});
  return tensor;
}

const Tensor& ParameterTree::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

std::vector<Tensor> ParameterTree::trainable() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) {
    if (e.kind == ParamKind::kTrainable) out.push_back(e.tensor);
  }
  return out;
}

std::int64_t ParameterTree::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) {
    if (e.kind == ParamKind::kTrainable) n += e.tensor.numel();
  }
  return n;
}

void ParameterTree::zero_grad() {
  for (auto& e : entries_) {
    if (e.kind == ParamKind::kTrainable) e.tensor.zero_grad();
  }
}

ParamBuilder::ParamBuilder(ParameterTree& tree, std::uint64_t seed)
    : tree_(&tree), owned_rng_(std::make_shared<std::mt19937_64>(seed)), rng_(owned_rng_.get()) {}

ParamBuilder ParamBuilder::child(const std::string& name) {
  ParamBuilder b(tree_, rng_, path(name));
  b.owned_rng_ = owned_rng_;
  return b;
}

std::string ParamBuilder::path(const std::string& name) const {
  return prefix_.empty() ? name : prefix_ + "." + name;
}

Tensor ParamBuilder::uniform(const std::string& name, Shape shape, double bound) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.mutable_data()) v = static_cast<Scalar>(dist(*rng_));
  return tree_->add(path(name), t, ParamKind::kTrainable);
}

Tensor ParamBuilder::constant(const std::string& name, Shape shape, Scalar value) {
  return tree_->add(path(name), Tensor::full(std::move(shape), value), ParamKind::kTrainable);
}

Tensor ParamBuilder::buffer(const std::string& name, Shape shape, Scalar value) {
  return tree_->add(path(name), Tensor::full(std::move(shape), value), ParamKind::kBuffer);
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
