#pragma once

// The seven probe architectures.
//
// Inputs are stacks of 7 sentence embeddings, [B, 7, 768]. 1DxSeq models view
// them as [B, 1, 7, 768] images, 2D models as [B, 1, 7, R, C] volumes. Every
// model predicts one 768-vector per episode; VAE variants also expose the
// latent code and dual variants a reconstruction of the input stack.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "blm/tensor/adam.hpp"
#include "blm/tensor/tensor.hpp"

namespace blm {

enum class ModelKind {
  kBaselineFFNN,
  kBaselineCNN1DxSeq,
  kBaselineCNN2D,
  kVAE1DxSeq,
  kVAE2D,
  kDualVAE1DxSeq,
  kDualVAE2D,
};

inline constexpr ModelKind kAllModelKinds[] = {
    ModelKind::kBaselineFFNN, ModelKind::kBaselineCNN1DxSeq, ModelKind::kBaselineCNN2D,
    ModelKind::kVAE1DxSeq,    ModelKind::kVAE2D,             ModelKind::kDualVAE1DxSeq,
    ModelKind::kDualVAE2D,
};

// "Baseline_FFNN", "Baseline_CNN_1DxSeq", ..., "Dual_VAE_2D".
std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);  // ConfigError on unknown names

bool is_2d(ModelKind kind);
bool is_vae(ModelKind kind);
bool is_dual(ModelKind kind);

struct Reshape {
  int rows = 0;
  int cols = 0;
  friend bool operator==(const Reshape&, const Reshape&) = default;
};

inline constexpr Reshape kAllowedReshapes[] = {{16, 48}, {24, 32}, {32, 24}, {48, 16}};

// "48x16" -> {48, 16}; ConfigError on malformed text.
Reshape parse_reshape(std::string_view text);
std::string to_string(const Reshape& r);

struct ModelSpec {
  ModelKind kind = ModelKind::kBaselineFFNN;
  int embed_dim = 768;
  int seq_len = 7;
  std::optional<Reshape> reshape;
  int latent = 5;
  // Accept any rows×cols = embed_dim large enough for the 15×15 kernels,
  // not only the four standard shapes.
  bool custom_reshape = false;
};

// ConfigError describing the first violated constraint.
void validate(const ModelSpec& spec);

// key=value lines; parse_model_spec reads the same keys back.
std::string serialize(const ModelSpec& spec);
ModelSpec parse_model_spec(std::string_view text);

enum class LayerKind { kLinear, kConv2d, kConv3d, kConvTranspose2d, kConvTranspose3d };

std::string_view layer_kind_name(LayerKind kind);  // "Linear", "Conv3d", ...

template <class T>
struct BasicLayer {
  LayerKind kind = LayerKind::kLinear;
  std::string name;    // e.g. "encoder.conv3d_1"
  Shape input_view;    // per-sample shape the incoming activation is viewed as
  Shape output_shape;  // per-sample
  bool activation = false;
  BasicTensor<T> weight;
  BasicTensor<T> bias;

  std::int64_t parameter_count() const;
};

// Named group of layers ("Encoder", "Decoder_answer", ...). Baselines have a
// single unnamed group.
template <class T>
struct BasicBlock {
  std::string label;
  std::vector<BasicLayer<T>> layers;
  Shape output_shape;  // per-sample, as reported for the group
};

enum class ForwardMode { kTrain, kEval };

template <class T>
struct BasicForwardOutput {
  BasicTensor<T> pred;    // [B, embed_dim]
  BasicTensor<T> mu;      // [B, latent] (VAE kinds)
  BasicTensor<T> logvar;  // [B, latent] (VAE kinds)
  BasicTensor<T> recon;   // [B, seq_len, embed_dim] (dual kinds)
};

struct SummaryRow {
  int depth = 0;
  std::string label;   // "Linear: 1-1", "Encoder: 1-1", ...
  Shape output_shape;  // per-sample
  std::int64_t params = -1;  // -1 for container rows
};

struct ParameterReport {
  std::string model_label;  // "BaselineFFNN", "VariationalAutoencoder", ...
  Shape output_shape;       // per-sample
  std::vector<SummaryRow> rows;
  std::int64_t total_params = 0;
  double mult_adds = 0;  // per sample
  Shape input_shape;     // per-sample
  double forward_backward_values = 0;  // per sample, activations kept for backward

  // Appendix-style table for the given batch size.
  std::string render(std::int64_t batch = 100) const;
};

template <class T>
class BasicModel {
 public:
  // Fan-in-scaled uniform weights, zero biases, drawn in parameter order.
  static BasicModel build(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<BasicBlock<T>>& blocks() const { return blocks_; }
  std::vector<BasicParameter<T>>& parameters() { return params_; }
  const std::vector<BasicParameter<T>>& parameters() const { return params_; }
  std::int64_t parameter_count() const;

  // input: [B, seq_len, embed_dim]. kTrain draws the latent sample from `rng`
  // (required for VAE kinds); kEval uses mu.
  BasicForwardOutput<T> forward(const BasicTensor<T>& input, ForwardMode mode,
                                std::mt19937_64* rng = nullptr) const;

  ParameterReport parameter_report() const;

  // Same architecture and values in another precision, as fresh leaves.
  template <class U>
  BasicModel<U> cast() const;

 private:
  template <class>
  friend class BasicModel;

  BasicTensor<T> run_block(const BasicBlock<T>& block, BasicTensor<T> x) const;
  void collect_parameters();

  ModelSpec spec_;
  std::vector<BasicBlock<T>> blocks_;
  std::vector<BasicParameter<T>> params_;
};

using Model = BasicModel<float>;
using Model64 = BasicModel<double>;
using ForwardOutput = BasicForwardOutput<float>;

template <class T>
template <class U>
BasicModel<U> BasicModel<T>::cast() const {
  BasicModel<U> out;
  out.spec_ = spec_;
  for (const auto& b : blocks_) {
    BasicBlock<U> nb{b.label, {}, b.output_shape};
    for (const auto& l : b.layers) {
      nb.layers.push_back(BasicLayer<U>{l.kind, l.name, l.input_view, l.output_shape, l.activation,
                                        tensor_cast<U>(l.weight, true), tensor_cast<U>(l.bias, true)});
    }
    out.blocks_.push_back(std::move(nb));
  }
  out.collect_parameters();
  return out;
}

}  // namespace blm
