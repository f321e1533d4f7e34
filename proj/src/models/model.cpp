#include "blm/models/model.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "blm/error.hpp"
#include "blm/objectives.hpp"
#include "blm/tensor/ops.hpp"

namespace blm {

namespace {

struct KindInfo {
  ModelKind kind;
  std::string_view name;
};

constexpr KindInfo kKindNames[] = {
    {ModelKind::kBaselineFFNN, "Baseline_FFNN"},   {ModelKind::kBaselineCNN1DxSeq, "Baseline_CNN_1DxSeq"},
    {ModelKind::kBaselineCNN2D, "Baseline_CNN_2D"}, {ModelKind::kVAE1DxSeq, "VAE_1DxSeq"},
    {ModelKind::kVAE2D, "VAE_2D"},                  {ModelKind::kDualVAE1DxSeq, "Dual_VAE_1DxSeq"},
    {ModelKind::kDualVAE2D, "Dual_VAE_2D"},
};

// Spatial extent of the 2D kernels along rows and columns.
constexpr int kPlaneKernel = 15;

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(std::string(what) + ": expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

Shape per_sample(const Shape& with_batch) { return Shape(with_batch.begin() + 1, with_batch.end()); }

Shape with_batch(std::int64_t batch, const Shape& s) {
  Shape out{batch};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

bool is_transposed(LayerKind k) { return k == LayerKind::kConvTranspose2d || k == LayerKind::kConvTranspose3d; }

std::string_view layer_slug(LayerKind k) {
  switch (k) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kConv3d: return "conv3d";
    case LayerKind::kConvTranspose2d: return "conv_transpose2d";
    case LayerKind::kConvTranspose3d: return "conv_transpose3d";
  }
  return "layer";
}

template <class T>
class Builder {
 public:
  explicit Builder(std::uint64_t seed) : rng_(seed) {}

  BasicBlock<T>& block(std::string label, std::string prefix) {
    blocks_.push_back({std::move(label), {}, {}});
    prefix_ = std::move(prefix);
    counters_.clear();
    return blocks_.back();
  }

  void linear(std::int64_t in, std::int64_t out, bool activation) {
    add(LayerKind::kLinear, Shape{in}, Shape{out, in}, in, activation);
  }

  // Kernel layout follows the op: [Cout, Cin, k...] for convolutions and
  // [Cin, Cout, k...] for transposed convolutions.
  void conv(LayerKind kind, Shape input_view, std::int64_t cout, const Shape& kernel, bool activation) {
    const std::int64_t cin = input_view.front();
    Shape w = is_transposed(kind) ? Shape{cin, cout} : Shape{cout, cin};
    w.insert(w.end(), kernel.begin(), kernel.end());
    add(kind, std::move(input_view), std::move(w), cin * numel(kernel), activation);
  }

  // Output shape of the most recent layer.
  const Shape& last_output() const { return blocks_.back().layers.back().output_shape; }

  std::vector<BasicBlock<T>> take() { return std::move(blocks_); }

 private:
  void add(LayerKind kind, Shape input_view, Shape weight_shape, std::int64_t fan_in, bool activation) {
    BasicLayer<T> layer;
    layer.kind = kind;
    layer.name = (prefix_.empty() ? "" : prefix_ + ".") + std::string(layer_slug(kind)) + "_" +
                 std::to_string(++counters_[kind]);
    layer.input_view = std::move(input_view);
    layer.activation = activation;
    const std::int64_t out_channels = is_transposed(kind) ? weight_shape[1] : weight_shape[0];
    if (kind == LayerKind::kLinear) {
      layer.output_shape = {out_channels};
    } else {
      layer.output_shape = per_sample(conv_output_shape(with_batch(1, layer.input_view), weight_shape, is_transposed(kind)));
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> w(static_cast<std::size_t>(numel(weight_shape)));
    for (auto& v : w) v = static_cast<T>(dist(rng_));
    layer.weight = BasicTensor<T>(std::move(weight_shape), std::move(w), true);
    layer.bias = BasicTensor<T>::zeros({out_channels}, true);
    blocks_.back().layers.push_back(std::move(layer));
  }

  std::mt19937_64 rng_;
  std::vector<BasicBlock<T>> blocks_;
  std::string prefix_;
  std::map<LayerKind, int> counters_;
};

// Conv trunk shared by baselines and encoders; returns the flattened width.
template <class T>
std::int64_t add_trunk(Builder<T>& b, const ModelSpec& spec) {
  const std::int64_t seq = spec.seq_len, dim = spec.embed_dim;
  if (is_2d(spec.kind)) {
    const auto& r = *spec.reshape;
    b.conv(LayerKind::kConv3d, {1, seq, r.rows, r.cols}, 32, {3, kPlaneKernel, kPlaneKernel}, true);
  } else {
    b.conv(LayerKind::kConv2d, {1, seq, dim}, 4, {3, 3}, true);
    b.conv(LayerKind::kConv2d, b.last_output(), 8, {3, 3}, true);
    b.conv(LayerKind::kConv2d, b.last_output(), 16, {3, 3}, true);
  }
  return numel(b.last_output());
}

// Decoder from the latent code to `rows` sentences (1 for the answer, seq_len
// for the mirror). The first transposed layer starts from the encoder
// trunk's final extent so the stack grows back to the input size.
template <class T>
void add_decoder(Builder<T>& b, const ModelSpec& spec, std::int64_t rows) {
  const std::int64_t dim = spec.embed_dim, seq = spec.seq_len;
  if (is_2d(spec.kind)) {
    const auto& r = *spec.reshape;
    const std::int64_t h = r.rows - kPlaneKernel + 1, w = r.cols - kPlaneKernel + 1;
    const std::int64_t depth = rows == 1 ? 1 : seq - 2;
    const std::int64_t kd = rows == 1 ? 1 : 3;
    b.linear(spec.latent, 32 * depth * h * w, true);
    b.conv(LayerKind::kConvTranspose3d, {32, depth, h, w}, 1, {kd, kPlaneKernel, kPlaneKernel}, false);
  } else {
    const std::int64_t kh = rows == 1 ? 1 : 3;
    b.linear(spec.latent, 16 * (dim - 6), true);
    b.conv(LayerKind::kConvTranspose2d, {16, 1, dim - 6}, 8, {kh, 3}, true);
    b.conv(LayerKind::kConvTranspose2d, b.last_output(), 4, {kh, 3}, true);
    b.conv(LayerKind::kConvTranspose2d, b.last_output(), 1, {kh, 3}, false);
  }
}

std::string with_commas(std::int64_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  const int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) {
    if (i != 0 && (n - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::string shape_text(std::int64_t batch, const Shape& s) { return to_string(with_batch(batch, s)); }

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& k : kKindNames) {
    if (k.name == name) return k.kind;
  }
  std::string known;
  for (const auto& k : kKindNames) known += (known.empty() ? "" : ", ") + std::string(k.name);
  throw ConfigError("unknown model kind '" + std::string(name) + "' (expected one of " + known + ")");
}

bool is_2d(ModelKind kind) {
  return kind == ModelKind::kBaselineCNN2D || kind == ModelKind::kVAE2D || kind == ModelKind::kDualVAE2D;
}

bool is_vae(ModelKind kind) {
  return kind == ModelKind::kVAE1DxSeq || kind == ModelKind::kVAE2D || is_dual(kind);
}

bool is_dual(ModelKind kind) { return kind == ModelKind::kDualVAE1DxSeq || kind == ModelKind::kDualVAE2D; }

Reshape parse_reshape(std::string_view text) {
  const auto x = text.find('x');
  if (x == std::string_view::npos) {
    throw ConfigError("reshape: expected ROWSxCOLS, got '" + std::string(text) + "'");
  }
  return {parse_int(text.substr(0, x), "reshape rows"), parse_int(text.substr(x + 1), "reshape cols")};
}

std::string to_string(const Reshape& r) { return std::to_string(r.rows) + "x" + std::to_string(r.cols); }

void validate(const ModelSpec& spec) {
  const auto name = std::string(model_kind_name(spec.kind));
  if (spec.embed_dim <= 0 || spec.seq_len <= 0 || spec.latent <= 0) {
    throw ConfigError("model " + name + ": embed_dim, seq_len and latent must be positive");
  }
  if (spec.seq_len != 7) {
    throw ConfigError("model " + name + ": the architectures are defined for 7-sentence contexts, got " +
                      std::to_string(spec.seq_len));
  }
  if (spec.embed_dim <= 6) throw ConfigError("model " + name + ": embed_dim too small for the 3-wide kernels");
  if (is_2d(spec.kind) != spec.reshape.has_value()) {
    throw ConfigError("model " + name + (is_2d(spec.kind) ? " needs a reshape" : " takes no reshape"));
  }
  if (!spec.reshape) return;
  const auto& r = *spec.reshape;
  if (std::int64_t(r.rows) * r.cols != spec.embed_dim) {
    throw ConfigError("reshape " + to_string(r) + " does not cover " + std::to_string(spec.embed_dim) + " values");
  }
  if (spec.custom_reshape) {
    if (r.rows < kPlaneKernel || r.cols < kPlaneKernel) {
      throw ConfigError("reshape " + to_string(r) + " is smaller than the 15x15 kernel");
    }
    return;
  }
  for (const auto& allowed : kAllowedReshapes) {
    if (allowed == r) return;
  }
  throw ConfigError("reshape " + to_string(r) + " is not one of 16x48, 24x32, 32x24, 48x16");
}

std::string serialize(const ModelSpec& spec) {
  std::ostringstream out;
  out << "model=" << model_kind_name(spec.kind) << "\n";
  out << "embed_dim=" << spec.embed_dim << "\n";
  out << "seq_len=" << spec.seq_len << "\n";
  out << "latent=" << spec.latent << "\n";
  if (spec.reshape) out << "reshape=" << to_string(*spec.reshape) << "\n";
  if (spec.custom_reshape) out << "custom_reshape=true\n";
  return out.str();
}

ModelSpec parse_model_spec(std::string_view text) {
  ModelSpec spec;
  bool have_kind = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "model") {
      spec.kind = parse_model_kind(value);
      have_kind = true;
    } else if (key == "embed_dim") {
      spec.embed_dim = parse_int(value, key);
    } else if (key == "seq_len") {
      spec.seq_len = parse_int(value, key);
    } else if (key == "latent") {
      spec.latent = parse_int(value, key);
    } else if (key == "reshape") {
      spec.reshape = parse_reshape(value);
    } else if (key == "custom_reshape") {
      spec.custom_reshape = value == "true";
    }
  }
  if (!have_kind) throw ConfigError("model spec record has no 'model' entry");
  validate(spec);
  return spec;
}

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear: return "Linear";
    case LayerKind::kConv2d: return "Conv2d";
    case LayerKind::kConv3d: return "Conv3d";
    case LayerKind::kConvTranspose2d: return "ConvTranspose2d";
    case LayerKind::kConvTranspose3d: return "ConvTranspose3d";
  }
  return "Layer";
}

template <class T>
std::int64_t BasicLayer<T>::parameter_count() const {
  return static_cast<std::int64_t>(weight.numel() + bias.numel());
}

template <class T>
BasicModel<T> BasicModel<T>::build(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  Builder<T> b(seed);
  const std::int64_t dim = spec.embed_dim, seq = spec.seq_len;
  const std::int64_t stack = dim * seq;

  if (!is_vae(spec.kind)) {
    b.block("", "");
    if (spec.kind == ModelKind::kBaselineFFNN) {
      b.linear(stack, 2 * dim, true);
      b.linear(2 * dim, 2 * dim, true);
      b.linear(2 * dim, dim, false);
    } else {
      const auto flat = add_trunk(b, spec);
      b.linear(flat, dim, false);
    }
  } else {
    b.block("Encoder", "encoder");
    const auto flat = add_trunk(b, spec);
    b.linear(flat, 2 * spec.latent, false);
    if (is_dual(spec.kind)) {
      b.block("Decoder_mirror", "decoder_mirror");
      add_decoder(b, spec, seq);
    }
    b.block("Decoder_answer", "decoder_answer");
    add_decoder(b, spec, 1);
  }

  BasicModel model;
  model.spec_ = spec;
  model.blocks_ = b.take();
  for (auto& block : model.blocks_) block.output_shape = block.layers.back().output_shape;
  if (is_vae(spec.kind)) model.blocks_.front().output_shape = {spec.latent};
  model.collect_parameters();
  return model;
}

template <class T>
void BasicModel<T>::collect_parameters() {
  params_.clear();
  for (auto& block : blocks_) {
    for (auto& layer : block.layers) {
      params_.push_back({layer.name + ".weight", layer.weight});
      params_.push_back({layer.name + ".bias", layer.bias});
    }
  }
}

template <class T>
std::int64_t BasicModel<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += static_cast<std::int64_t>(p.tensor.numel());
  return n;
}

template <class T>
BasicTensor<T> BasicModel<T>::run_block(const BasicBlock<T>& block, BasicTensor<T> x) const {
  const auto batch = x.dim(0);
  for (const auto& layer : block.layers) {
    const Shape view = with_batch(batch, layer.input_view);
    if (x.shape() != view) x = reshape(x, view);
    switch (layer.kind) {
      case LayerKind::kLinear: x = linear(x, layer.weight, layer.bias); break;
      case LayerKind::kConv2d: x = conv2d(x, layer.weight, layer.bias); break;
      case LayerKind::kConv3d: x = conv3d(x, layer.weight, layer.bias); break;
      case LayerKind::kConvTranspose2d: x = conv_transpose2d(x, layer.weight, layer.bias); break;
      case LayerKind::kConvTranspose3d: x = conv_transpose3d(x, layer.weight, layer.bias); break;
    }
    if (layer.activation) x = leaky_relu(x);
  }
  return x;
}

template <class T>
BasicForwardOutput<T> BasicModel<T>::forward(const BasicTensor<T>& input, ForwardMode mode,
                                             std::mt19937_64* rng) const {
  const std::int64_t seq = spec_.seq_len, dim = spec_.embed_dim;
  if (input.rank() != 3 || input.dim(1) != seq || input.dim(2) != dim) {
    throw DimensionError(std::string(model_kind_name(spec_.kind)) + ": input " + to_string(input.shape()) +
                         " does not match [B, " + std::to_string(seq) + ", " + std::to_string(dim) + "]");
  }
  const auto batch = input.dim(0);
  BasicForwardOutput<T> out;
  if (!is_vae(spec_.kind)) {
    out.pred = reshape(run_block(blocks_.front(), input), {batch, dim});
    return out;
  }
  const auto h = run_block(blocks_.front(), input);
  out.mu = slice_columns(h, 0, spec_.latent);
  out.logvar = slice_columns(h, spec_.latent, spec_.latent);
  BasicTensor<T> z = out.mu;
  if (mode == ForwardMode::kTrain) {
    if (rng == nullptr) throw ContractError("training-mode forward of a VAE needs a random generator");
    z = sample_latent(out.mu, out.logvar, *rng);
  }
  if (is_dual(spec_.kind)) out.recon = reshape(run_block(blocks_[1], z), {batch, seq, dim});
  out.pred = reshape(run_block(blocks_.back(), z), {batch, dim});
  return out;
}

template <class T>
ParameterReport BasicModel<T>::parameter_report() const {
  ParameterReport r;
  const bool vae = is_vae(spec_.kind);
  switch (spec_.kind) {
    case ModelKind::kBaselineFFNN: r.model_label = "BaselineFFNN"; break;
    case ModelKind::kBaselineCNN1DxSeq: r.model_label = "BaselineCNN_1DxSeq"; break;
    case ModelKind::kBaselineCNN2D: r.model_label = "BaselineCNN"; break;
    default: r.model_label = "VariationalAutoencoder"; break;
  }
  r.output_shape = vae ? Shape{spec_.latent} : Shape{spec_.embed_dim};
  r.input_shape = {spec_.seq_len, spec_.embed_dim};

  int top_index = 0, leaf_index = 0;
  const int leaf_depth = vae ? 2 : 1;
  auto add_layers = [&](const BasicBlock<T>& block) {
    for (const auto& layer : block.layers) {
      const int idx = vae ? ++leaf_index : ++top_index;
      r.rows.push_back({leaf_depth, fmt::format("{}: {}-{}", layer_kind_name(layer.kind), leaf_depth, idx),
                        layer.output_shape, layer.parameter_count()});
      const auto out_numel = numel(layer.output_shape);
      const auto out_channels = layer.output_shape.front();
      const double spatial = layer.kind == LayerKind::kLinear ? 1.0 : double(out_numel / out_channels);
      r.mult_adds += double(layer.parameter_count()) * spatial;
      r.forward_backward_values += double(out_numel);
      r.total_params += layer.parameter_count();
    }
  };
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& block = blocks_[i];
    if (vae) r.rows.push_back({1, fmt::format("{}: 1-{}", block.label, ++top_index), block.output_shape, -1});
    add_layers(block);
    if (vae && i == 0) {
      r.rows.push_back({1, fmt::format("simpleSampling: 1-{}", ++top_index), Shape{spec_.latent}, -1});
    }
  }
  return r;
}

std::string ParameterReport::render(std::int64_t batch) const {
  const std::string rule(83, '=');
  std::string out;
  auto row = [&](const std::string& label, const std::string& shape, const std::string& params) {
    out += fmt::format("{:<41}{:<26}{}\n", label, shape, params);
  };
  out += rule + "\n";
  row("Layer (type:depth-idx)", "Output Shape", "Param #");
  out += rule + "\n";
  row(model_label, shape_text(batch, output_shape), "--");
  for (const auto& r : rows) {
    const std::string indent = r.depth == 1 ? "--" : std::string(5 * (r.depth - 1), ' ') + "--";
    row(indent + r.label, shape_text(batch, r.output_shape), r.params < 0 ? "--" : with_commas(r.params));
  }
  out += rule + "\n";
  out += fmt::format("Total params: {}\n", with_commas(total_params));
  out += fmt::format("Trainable params: {}\n", with_commas(total_params));
  out += "Non-trainable params: 0\n";
  const double macs = mult_adds * double(batch);
  if (macs >= 1e9) {
    out += fmt::format("Total mult-adds (G): {:.2f}\n", macs / 1e9);
  } else {
    out += fmt::format("Total mult-adds (M): {:.2f}\n", macs / 1e6);
  }
  out += rule + "\n";
  const double input_mb = double(numel(input_shape) * batch) * 4.0 / 1e6;
  const double fb_mb = forward_backward_values * double(batch) * 8.0 / 1e6;
  const double params_mb = double(total_params) * 4.0 / 1e6;
  out += fmt::format("Input size (MB): {:.2f}\n", input_mb);
  out += fmt::format("Forward/backward pass size (MB): {:.2f}\n", fb_mb);
  out += fmt::format("Params size (MB): {:.2f}\n", params_mb);
  out += fmt::format("Estimated Total Size (MB): {:.2f}\n", input_mb + fb_mb + params_mb);
  out += rule + "\n";
  return out;
}

template class BasicModel<float>;
template class BasicModel<double>;
template struct BasicLayer<float>;
template struct BasicLayer<double>;

}  // namespace blm
