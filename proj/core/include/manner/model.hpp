#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "manner/attention.hpp"
#include "manner/layers.hpp"
#include "manner/model_config.hpp"
#include "manner/parameter_tree.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

/// Residual Conformer-style block: pointwise (x G0) -> BN -> ReLU ->
/// depthwise -> BN -> ReLU -> pointwise (to out channels), plus a pointwise
/// residual projection in -> out. Length is preserved.
struct ResCon {
  Conv1d expand;
  BatchNorm1d expand_norm;
  Conv1d depthwise;
  BatchNorm1d depthwise_norm;
  Conv1d project;
  Conv1d residual;

  static ResCon create(ParamBuilder& b, std::int64_t in_channels, std::int64_t out_channels, int growth_inner,
                       int depthwise_kernel);
  Tensor forward(const Tensor& x, bool training) const;
};

/// Strided convolution dividing the length by S, then BN and ReLU.
struct DownConv {
  Conv1d conv;
  BatchNorm1d norm;

  static DownConv create(ParamBuilder& b, std::int64_t channels, int kernel, int stride);
  Tensor forward(const Tensor& x, bool training) const;
};

/// Transposed convolution multiplying the length by S, then BN and ReLU.
struct UpConv {
  ConvTranspose1d conv;
  BatchNorm1d norm;

  static UpConv create(ParamBuilder& b, std::int64_t channels, int kernel, int stride);
  Tensor forward(const Tensor& x, bool training) const;
};

/// m = relu(sigmoid(conv_a(d)) * tanh(conv_b(d))), values in [0, 1).
struct MaskGate {
  Conv1d sigmoid_branch;
  Conv1d tanh_branch;

  static MaskGate create(ParamBuilder& b, std::int64_t channels);
  Tensor forward(const Tensor& d) const { return gate(d, sigmoid_branch, tanh_branch); }
};

struct EncoderLayer {
  DownConv down;
  ResCon rescon;
  std::optional<MABlock> attention;
};

struct DecoderLayer {
  ResCon rescon;
  std::optional<MABlock> attention;
  UpConv up;
};

/// Shapes observed during one forward pass.
struct ForwardTrace {
  Shape padded_input;
  std::vector<Shape> encoder_outputs;  // layer 1..L
  Shape bottleneck;
  std::vector<Shape> decoder_outputs;  // in execution order, layer L..1
  Shape output;
};

/// The full encoder-decoder. Parameters live in an owned ParameterTree;
/// layer structs hold shared handles into it.
class MannerModel {
 public:
  MannerModel(const ModelConfig& config, std::uint64_t seed);
  MannerModel(const MannerModel&) = delete;
  MannerModel& operator=(const MannerModel&) = delete;
  MannerModel(MannerModel&&) = default;
  MannerModel& operator=(MannerModel&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterTree& parameters() { return tree_; }
  const ParameterTree& parameters() const { return tree_; }

  /// noisy [B,1,T] -> enhanced [B,1,T]. The input is zero-padded to a
  /// multiple of S^L and the output trimmed back. Evaluation mode
  /// (training == false) does not write any state and may run concurrently.
  Tensor forward(const Tensor& noisy, bool training, ForwardTrace* trace = nullptr) const;

  const std::vector<EncoderLayer>& encoder() const { return encoder_; }
  const std::vector<DecoderLayer>& decoder() const { return decoder_; }
  const MaskGate& mask() const { return mask_; }

 private:
  ModelConfig config_;
  ParameterTree tree_;
  Conv1d input_conv_;
  BatchNorm1d input_norm_;
  std::vector<EncoderLayer> encoder_;
  Conv1d bottleneck_;
  std::vector<DecoderLayer> decoder_;  // decoder_[l] mirrors encoder_[l]
  MaskGate mask_;
  Conv1d output_conv_;
};

/// Validates `config` and builds a freshly initialized model.
MannerModel build_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace MANNER_ABI_NS
}  // namespace manner
