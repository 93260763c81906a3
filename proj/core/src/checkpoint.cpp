#include "manner/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace fs = std::filesystem;
namespace {

constexpr char kMagic[8] = {'M', 'N', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr char kEndMarker[8] = {'M', 'N', 'R', 'C', 'E', 'N', 'D', '\0'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void value(T v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
    bytes(&v, sizeof v);
  }
  void text(const std::string& s) {
    value(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  void bytes(void* p, std::size_t n) {
    if (n > data_.size() - pos_) throw CheckpointError(path_ + ": truncated file");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T value() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string text(std::size_t limit = 1 << 20) {
    const auto n = value<std::uint32_t>();
    if (n > limit) throw CheckpointError(path_ + ": implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::vector<char> data_;
  std::string path_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, TensorKind kind, const Tensor& t) {
  w.text(name);
  w.value(static_cast<std::uint8_t>(kind));
  w.value(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.value(static_cast<std::int64_t>(d));
  w.bytes(t.data().data(), t.data().size_bytes());
}

std::string key(TensorKind kind, const std::string& name) {
  return std::to_string(static_cast<int>(kind)) + ':' + name;
}

}  // namespace

void save_checkpoint(const fs::path& path, const MannerModel& model, const Adam* adam, const TrainerState& trainer) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.value(kCheckpointVersion);
  w.value(static_cast<std::uint32_t>(sizeof(Scalar)));

  std::ostringstream config;
  for (const auto& [k, v] : model.config().to_entries()) config << k << '=' << v << '\n';
  w.text(config.str());
  w.value(trainer.step);
  w.value(trainer.epoch);
  w.value(trainer.best_validation);
  w.value(trainer.best_epoch);
  w.value(static_cast<std::int64_t>(adam ? adam->steps() : 0));

  const auto& entries = model.parameters().entries();
  std::uint32_t count = static_cast<std::uint32_t>(entries.size());
  if (adam) count += static_cast<std::uint32_t>(2 * adam->parameters().size());
  w.value(count);
  for (const auto& e : entries) {
    write_tensor(w, e.name, e.kind == ParamKind::kTrainable ? TensorKind::kParameter : TensorKind::kBuffer, e.tensor);
  }
  if (adam) {
    // Moments are keyed by the name of the parameter they belong to.
    std::map<const TensorImpl*, std::string> names;
    for (const auto& e : entries) names[e.tensor.impl().get()] = e.name;
    for (std::size_t i = 0; i < adam->parameters().size(); ++i) {
      auto it = names.find(adam->parameters()[i].impl().get());
      if (it == names.end()) throw CheckpointError("optimizer holds a tensor that is not a model parameter");
      write_tensor(w, it->second, TensorKind::kAdamFirst, adam->first_moments()[i]);
      write_tensor(w, it->second, TensorKind::kAdamSecond, adam->second_moments()[i]);
    }
  }
  w.bytes(kEndMarker, sizeof kEndMarker);

  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
    if (!out) throw CheckpointError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()), path.string());

  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw CheckpointError(path.string() + ": not a checkpoint file");
  const auto version = r.value<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto scalar_bytes = r.value<std::uint32_t>();
  if (scalar_bytes != 4 && scalar_bytes != 8) throw CheckpointError(path.string() + ": bad scalar width");

  Checkpoint ckpt;
  {
    std::map<std::string, std::string> entries;
    std::istringstream lines(r.text());
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw CheckpointError(path.string() + ": malformed config line '" + line + "'");
      entries[line.substr(0, eq)] = line.substr(eq + 1);
    }
    try {
      ckpt.config = ModelConfig::from_entries(entries);
      ckpt.config.validate();
    } catch (const ConfigError& e) {
      throw CheckpointError(path.string() + ": stored model config is invalid: " + e.what());
    }
  }
  ckpt.trainer.step = r.value<std::int64_t>();
  ckpt.trainer.epoch = r.value<std::int64_t>();
  ckpt.trainer.best_validation = r.value<double>();
  ckpt.trainer.best_epoch = r.value<std::int64_t>();
  ckpt.adam_steps = r.value<std::int64_t>();

  const auto count = r.value<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.text(4096);
    const auto kind = r.value<std::uint8_t>();
    if (kind > 3) throw CheckpointError(path.string() + ": bad tensor kind for " + t.name);
    t.kind = static_cast<TensorKind>(kind);
    const auto rank = r.value<std::uint32_t>();
    if (rank > 8) throw CheckpointError(path.string() + ": bad rank for " + t.name);
    std::int64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.value<std::int64_t>();
      if (dim < 0 || dim > (std::int64_t{1} << 40)) throw CheckpointError(path.string() + ": bad shape for " + t.name);
      t.shape.push_back(dim);
      n *= dim;
    }
    t.values.resize(static_cast<std::size_t>(n));
    for (auto& v : t.values) v = scalar_bytes == 4 ? r.value<float>() : r.value<double>();
    ckpt.tensors.push_back(std::move(t));
  }
  char end[8];
  r.bytes(end, sizeof end);
  if (std::memcmp(end, kEndMarker, sizeof end) != 0 || !r.at_end()) {
    throw CheckpointError(path.string() + ": missing end marker");
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, MannerModel& model, Adam* adam, TrainerState* trainer) {
  if (!(ckpt.config == model.config())) throw CheckpointError("checkpoint model config differs from the target model");
  std::map<std::string, const CheckpointTensor*> stored;
  for (const auto& t : ckpt.tensors) stored[key(t.kind, t.name)] = &t;

  std::vector<std::pair<Tensor, const CheckpointTensor*>> plan;
  const auto want = [&](TensorKind kind, const std::string& name, const Tensor& target) {
    auto it = stored.find(key(kind, name));
    if (it == stored.end()) throw CheckpointError("checkpoint has no entry for '" + name + "'");
    if (it->second->shape != target.shape()) {
      throw CheckpointError("shape mismatch for '" + name + "': stored " + to_string(it->second->shape) +
                            ", expected " + to_string(target.shape()));
    }
    plan.emplace_back(target, it->second);
  };
  std::map<const TensorImpl*, std::string> names;
  for (const auto& e : model.parameters().entries()) {
    want(e.kind == ParamKind::kTrainable ? TensorKind::kParameter : TensorKind::kBuffer, e.name, e.tensor);
    names[e.tensor.impl().get()] = e.name;
  }
  if (adam) {
    for (std::size_t i = 0; i < adam->parameters().size(); ++i) {
      auto it = names.find(adam->parameters()[i].impl().get());
      if (it == names.end()) throw CheckpointError("optimizer holds a tensor that is not a model parameter");
      want(TensorKind::kAdamFirst, it->second, adam->first_moments()[i]);
      want(TensorKind::kAdamSecond, it->second, adam->second_moments()[i]);
    }
  }

  for (auto& [target, source] : plan) {
    auto dst = target.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Scalar>(source->values[i]);
  }
  if (adam) adam->set_steps(ckpt.adam_steps);
  if (trainer) *trainer = ckpt.trainer;
}

MannerModel load_model(const fs::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  MannerModel model(ckpt.config, 0);
  apply_checkpoint(ckpt, model);
  return model;
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
