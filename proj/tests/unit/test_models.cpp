#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <cstring>
#include <random>
#include <set>

#include "blm/error.hpp"
#include "blm/io/binary.hpp"
#include "blm/models/checkpoint.hpp"
#include "blm/models/model.hpp"
#include "blm/objectives.hpp"
#include "support/goldens.hpp"
#include "support/oracles.hpp"

using blm::ForwardMode;
using blm::Model;
using blm::ModelKind;
using blm::ModelSpec;
using blm::Shape;
using blm::Tensor;
using blm::testing::golden_spec;
using blm::testing::random_tensor;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("blm_test_models_" + name);
}

template <class T>
blm::LossTerms<T> loss_terms(const blm::BasicModel<T>& model, const blm::BasicTensor<T>& input,
                             const blm::BasicTensor<T>& candidates, const std::vector<int>& correct,
                             std::uint64_t sample_seed) {
  std::mt19937_64 rng(sample_seed);
  const auto out = model.forward(input, ForwardMode::kTrain, &rng);
  blm::LossTerms<T> terms{blm::max_margin_loss(out.pred, candidates, correct), {}, {}};
  if (out.mu.defined()) terms.kl = blm::kl_standard_normal(out.mu, out.logvar);
  if (out.recon.defined()) terms.recon = blm::reconstruction_loss(input, out.recon);
  return terms;
}

}  // namespace

TEST_CASE("parameter report reproduces every published summary row") {
  for (const auto& g : blm::testing::golden_summaries()) {
    const auto model = Model::build(golden_spec(g.kind), 1);
    const auto report = model.parameter_report();
    const auto mismatches = blm::testing::golden_mismatches(g, report);
    for (const auto& m : mismatches) FAIL_CHECK(m);
    CHECK(model.parameter_count() == g.total);

    const auto text = report.render(100);
    CHECK(text.find(g.mult_adds) != std::string::npos);
    CHECK(text.find(g.forward_backward) != std::string::npos);
    CHECK(text.find("Input size (MB): 2.15") != std::string::npos);
  }
}

TEST_CASE("rendered table uses the published layout") {
  const auto text = Model::build(golden_spec(ModelKind::kDualVAE2D), 1).parameter_report().render(100);
  CHECK(text.find("Layer (type:depth-idx)                   Output Shape              Param #") !=
        std::string::npos);
  CHECK(text.find("     --Conv3d: 2-1                       [100, 32, 5, 34, 2]       21,632") != std::string::npos);
  CHECK(text.find("--Decoder_mirror: 1-3                    [100, 1, 7, 48, 16]       --") != std::string::npos);
  CHECK(text.find("Total params: 237,580") != std::string::npos);
  CHECK(text.find("Params size (MB): 0.95") != std::string::npos);
}

TEST_CASE("parameter names are unique and dotted") {
  for (const auto kind : blm::kAllModelKinds) {
    const auto model = Model::build(golden_spec(kind), 1);
    std::set<std::string> names;
    for (const auto& p : model.parameters()) {
      CHECK(names.insert(p.name).second);
      CHECK(p.tensor.requires_grad());
    }
  }
  const auto model = Model::build(golden_spec(ModelKind::kDualVAE2D), 1);
  CHECK(model.parameters().front().name == "encoder.conv3d_1.weight");
  CHECK(model.parameters().back().name == "decoder_answer.conv_transpose3d_1.bias");
}

TEST_CASE("initialization: fan-in bounded weights, zero biases, seeded") {
  const auto a = Model::build(golden_spec(ModelKind::kVAE2D), 5);
  const auto b = Model::build(golden_spec(ModelKind::kVAE2D), 5);
  const auto c = Model::build(golden_spec(ModelKind::kVAE2D), 6);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& pa = a.parameters()[i].tensor;
    CHECK(std::equal(pa.data().begin(), pa.data().end(), b.parameters()[i].tensor.data().begin()));
  }
  CHECK_FALSE(std::equal(a.parameters()[0].tensor.data().begin(), a.parameters()[0].tensor.data().end(),
                         c.parameters()[0].tensor.data().begin()));
  for (const auto& block : a.blocks()) {
    for (const auto& layer : block.layers) {
      const auto& s = layer.weight.shape();
      const bool transposed = layer.kind == blm::LayerKind::kConvTranspose3d;
      const double fan_in = double(layer.weight.numel()) / double(transposed ? s[1] : s[0]);
      const double bound = 1.0 / std::sqrt(fan_in);
      for (const float v : layer.weight.data()) CHECK(std::abs(v) <= bound);
      for (const float v : layer.bias.data()) CHECK(v == 0.0f);
    }
  }
}

TEST_CASE("spec validation") {
  ModelSpec spec;
  spec.kind = ModelKind::kVAE2D;
  CHECK_THROWS_AS(Model::build(spec, 1), blm::ConfigError);  // reshape missing
  spec.reshape = blm::Reshape{24, 31};
  CHECK_THROWS_AS(Model::build(spec, 1), blm::ConfigError);  // 744 values
  spec.reshape = blm::Reshape{64, 12};
  CHECK_THROWS_AS(Model::build(spec, 1), blm::ConfigError);  // not a standard shape
  spec.custom_reshape = true;
  CHECK_THROWS_AS(Model::build(spec, 1), blm::ConfigError);  // 12 < kernel
  spec.reshape = blm::Reshape{16, 48};
  CHECK_NOTHROW(Model::build(spec, 1));

  ModelSpec flat;
  flat.kind = ModelKind::kBaselineFFNN;
  flat.reshape = blm::Reshape{48, 16};
  CHECK_THROWS_AS(Model::build(flat, 1), blm::ConfigError);
  CHECK_THROWS_AS(blm::parse_model_kind("Dual_VAE_3D"), blm::ConfigError);
  CHECK_THROWS_AS(blm::parse_reshape("48by16"), blm::ConfigError);

  const auto round = blm::parse_model_spec(blm::serialize(golden_spec(ModelKind::kDualVAE2D)));
  CHECK(round.kind == ModelKind::kDualVAE2D);
  CHECK(round.reshape == blm::Reshape{48, 16});
}

TEST_CASE("flatten width follows the reshape for every standard shape") {
  // conv3d 3×15×15 leaves (R−14)·(C−14) positions per depth slice.
  const std::pair<blm::Reshape, std::int64_t> widths[] = {
      {{16, 48}, 32 * 5 * 2 * 34}, {{24, 32}, 32 * 5 * 10 * 18}, {{32, 24}, 32 * 5 * 18 * 10}, {{48, 16}, 10880}};
  for (const auto& [r, width] : widths) {
    ModelSpec spec;
    spec.kind = ModelKind::kDualVAE2D;
    spec.reshape = r;
    const auto model = Model::build(spec, 1);
    CHECK(model.blocks()[0].layers[1].weight.shape() == Shape{10, width});
    std::mt19937_64 rng(3);
    const auto out = model.forward(random_tensor<float>({2, 7, 768}, rng), ForwardMode::kEval);
    CHECK(out.pred.shape() == Shape{2, 768});
    CHECK(out.recon.shape() == Shape{2, 7, 768});
  }
}

TEST_CASE("forward: documented shapes, finite outputs, deterministic evaluation") {
  std::mt19937_64 rng(4);
  const auto input = random_tensor<float>({3, 7, 768}, rng);
  for (const auto kind : blm::kAllModelKinds) {
    CAPTURE(blm::model_kind_name(kind));
    const auto model = Model::build(golden_spec(kind), 2);
    const auto a = model.forward(input, ForwardMode::kEval);
    const auto b = model.forward(input, ForwardMode::kEval);
    CHECK(a.pred.shape() == Shape{3, 768});
    for (const float v : a.pred.data()) REQUIRE(std::isfinite(v));
    CHECK(std::equal(a.pred.data().begin(), a.pred.data().end(), b.pred.data().begin()));
    CHECK(a.mu.defined() == blm::is_vae(kind));
    CHECK(a.recon.defined() == blm::is_dual(kind));
    if (a.mu.defined()) {
      CHECK(a.mu.shape() == Shape{3, 5});
      CHECK(a.logvar.shape() == Shape{3, 5});
    }
    if (a.recon.defined()) CHECK(a.recon.shape() == input.shape());
  }
  const auto model = Model::build(golden_spec(ModelKind::kBaselineFFNN), 2);
  CHECK_THROWS_AS(model.forward(random_tensor<float>({3, 6, 768}, rng), ForwardMode::kEval), blm::DimensionError);
  const auto vae = Model::build(golden_spec(ModelKind::kVAE2D), 2);
  CHECK_THROWS_AS(vae.forward(input, ForwardMode::kTrain), blm::ContractError);
}

TEST_CASE("training forward samples the latent, evaluation uses mu") {
  std::mt19937_64 rng(5);
  const auto input = random_tensor<float>({2, 7, 768}, rng);
  const auto model = Model::build(golden_spec(ModelKind::kVAE2D), 3);
  std::mt19937_64 s1(9), s2(9), s3(10);
  const auto t1 = model.forward(input, ForwardMode::kTrain, &s1);
  const auto t2 = model.forward(input, ForwardMode::kTrain, &s2);
  const auto t3 = model.forward(input, ForwardMode::kTrain, &s3);
  CHECK(std::equal(t1.pred.data().begin(), t1.pred.data().end(), t2.pred.data().begin()));
  CHECK_FALSE(std::equal(t1.pred.data().begin(), t1.pred.data().end(), t3.pred.data().begin()));
}

TEST_CASE("finite-difference gradients of every full model's composite loss") {
  std::mt19937_64 rng(6);
  for (const auto kind : blm::kAllModelKinds) {
    CAPTURE(blm::model_kind_name(kind));
    const auto model = Model::build(golden_spec(kind), 7).cast<double>();
    const auto input = random_tensor<double>({2, 7, 768}, rng);
    const auto cands = random_tensor<double>({2, 6, 768}, rng);
    const std::vector<int> correct{1, 4};
    std::vector<blm::Tensor64> inputs;
    for (const auto& p : model.parameters()) inputs.push_back(p.tensor);
    const blm::LossWeights weights;
    const auto total = [&] {
      blm::LossBreakdown br;
      return blm::total_loss(loss_terms(model, input, cands, correct, 11), weights, br);
    };
    const auto parts = [&] {
      const auto t = loss_terms(model, input, cands, correct, 11);
      std::vector<std::pair<double, double>> out{{1.0, t.answer.item()}};
      if (t.kl.defined()) out.emplace_back(weights.beta, t.kl.item());
      if (t.recon.defined()) out.emplace_back(weights.alpha, t.recon.item());
      return out;
    };
    const auto rep = blm::testing::check_gradients(total, inputs, rng, 6, 1e-6, parts);
    CHECK_MESSAGE(rep.max_rel_error < 1e-4, rep.worst);
  }
}

TEST_CASE("checkpoint round trip is bit-exact and validated") {
  const auto model = Model::build(golden_spec(ModelKind::kDualVAE2D), 8);
  const auto path = temp_path("dual.blmc");
  blm::write_checkpoint(path, model, "lr=0.001\n");
  const auto ck = blm::read_checkpoint(path);
  CHECK(ck.record.find("model=Dual_VAE_2D") != std::string::npos);
  CHECK(ck.record.find("lr=0.001") != std::string::npos);
  REQUIRE(ck.model.parameters().size() == model.parameters().size());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const auto& a = model.parameters()[i].tensor;
    const auto& b = ck.model.parameters()[i].tensor;
    CHECK(std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0);
  }

  // Second write of the reloaded model gives the same bytes.
  const auto again = temp_path("dual_again.blmc");
  blm::write_checkpoint(again, ck.model, "lr=0.001\n");
  CHECK(blm::io::read_file(path) == blm::io::read_file(again));

  auto bytes = blm::io::read_file(path);
  blm::io::write_file(again, std::string_view(bytes).substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(blm::read_checkpoint(again), blm::FormatError);
  bytes[0] = 'X';
  blm::io::write_file(again, bytes);
  CHECK_THROWS_AS(blm::read_checkpoint(again), blm::FormatError);
  std::filesystem::remove(path);
  std::filesystem::remove(again);
}
