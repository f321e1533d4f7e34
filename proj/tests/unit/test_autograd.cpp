#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "blm/error.hpp"
#include "blm/tensor/adam.hpp"
#include "blm/tensor/ops.hpp"
#include "support/oracles.hpp"

using blm::Shape;
using blm::Tensor;
using blm::Tensor64;
using blm::testing::Dims5;
using blm::testing::random_tensor;
using blm::testing::to_doubles;

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr int kCasesPerOp = 20;

int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Loss Σ y·r for a fixed random r turns any tensor-valued op into a scalar.
Tensor64 project(const Tensor64& y, std::mt19937_64& rng) {
  return blm::inner_product(y, random_tensor<double>(y.shape(), rng));
}

}  // namespace

TEST_CASE("linear: zero weights and bias give zeros") {
  std::mt19937_64 rng(1);
  const auto x = random_tensor<float>({3, 5}, rng);
  const auto y = blm::linear(x, Tensor::zeros({4, 5}), Tensor::zeros({4}));
  CHECK(y.shape() == Shape{3, 4});
  for (const float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("linear: matches triple-loop matmul oracle") {
  std::mt19937_64 rng(2);
  const auto x = random_tensor<float>({2, 3}, rng);
  const auto w = random_tensor<float>({4, 3}, rng);
  const auto b = random_tensor<float>({4}, rng);
  const auto y = blm::linear(x, w, b);
  for (int i = 0; i < 2; ++i)
    for (int o = 0; o < 4; ++o) {
      double expect = b.data()[o];
      for (int k = 0; k < 3; ++k) expect += double(x.data()[i * 3 + k]) * w.data()[o * 3 + k];
      CHECK(std::abs(y.data()[i * 4 + o] - expect) < 1e-6);
    }
}

TEST_CASE("linear: shape mismatch names both operands") {
  try {
    (void)blm::linear(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}), Tensor::zeros({4}));
    FAIL("expected DimensionError");
  } catch (const blm::DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("input [2, 3]") != std::string::npos);
    CHECK(msg.find("weight [4, 5]") != std::string::npos);
  }
}

TEST_CASE("conv2d: output shapes, identity and all-ones cases") {
  CHECK(blm::conv_output_shape({1, 1, 7, 768}, {4, 1, 3, 3}, false) == Shape{1, 4, 5, 766});

  std::mt19937_64 rng(3);
  const auto x = random_tensor<float>({1, 1, 4, 6}, rng);
  const auto id = blm::conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0f), Tensor::zeros({1}));
  CHECK(id.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(id.data()[i] == x.data()[i]);

  const auto ones = blm::conv2d(Tensor::full({1, 1, 3, 3}, 1.0f), Tensor::full({1, 1, 2, 2}, 1.0f),
                                Tensor::zeros({1}));
  CHECK(ones.shape() == Shape{1, 1, 2, 2});
  for (const float v : ones.data()) CHECK(v == 4.0f);

  CHECK_THROWS_AS(blm::conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1})),
                  blm::DimensionError);
  CHECK_THROWS_AS(blm::conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1})),
                  blm::DimensionError);
}

TEST_CASE("conv3d: output shape, identity and nested-loop oracle") {
  CHECK(blm::conv_output_shape({1, 1, 7, 48, 16}, {32, 1, 3, 15, 15}, false) == Shape{1, 32, 5, 34, 2});

  std::mt19937_64 rng(4);
  const auto x = random_tensor<float>({2, 1, 3, 4, 5}, rng);
  const auto id = blm::conv3d(x, Tensor::full({1, 1, 1, 1, 1}, 1.0f), Tensor::zeros({1}));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(id.data()[i] == x.data()[i]);

  const auto xr = random_tensor<float>({1, 1, 4, 5, 5}, rng);
  const auto k = random_tensor<float>({1, 1, 2, 3, 3}, rng);
  const auto b = random_tensor<float>({1}, rng);
  const auto y = blm::conv3d(xr, k, b);
  const auto expect = blm::testing::conv3d_oracle(to_doubles(xr.data()), Dims5{1, 1, 4, 5, 5},
                                                  to_doubles(k.data()), 1, 2, 3, 3, to_doubles(b.data()));
  CHECK(y.shape() == Shape{1, 1, 3, 3, 3});
  CHECK(blm::testing::max_abs_diff(to_doubles(y.data()), expect) < 1e-6);
}

TEST_CASE("conv_transpose2d: shapes and identity") {
  CHECK(blm::conv_output_shape({1, 16, 1, 762}, {16, 8, 1, 3}, true) == Shape{1, 8, 1, 764});
  CHECK(blm::conv_output_shape({1, 16, 1, 762}, {16, 8, 3, 3}, true) == Shape{1, 8, 3, 764});
  const auto y = blm::conv_transpose2d(Tensor::full({1, 1, 1, 1}, 2.5f), Tensor::full({1, 1, 1, 1}, 1.0f),
                                       Tensor::zeros({1}));
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == 2.5f);
  CHECK_THROWS_AS(blm::conv_transpose2d(Tensor::zeros({1, 3, 2, 2}), Tensor::zeros({2, 1, 1, 1}),
                                        Tensor::zeros({1})),
                  blm::DimensionError);
}

TEST_CASE("conv_transpose3d: shapes") {
  CHECK(blm::conv_output_shape({1, 32, 5, 34, 2}, {32, 1, 3, 15, 15}, true) == Shape{1, 1, 7, 48, 16});
  CHECK(blm::conv_output_shape({1, 32, 1, 34, 2}, {32, 1, 1, 15, 15}, true) == Shape{1, 1, 1, 48, 16});
}

TEST_CASE("convolutions match nested-loop oracles on random small shapes in both precisions") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < kCasesPerOp; ++trial) {
    const int n = pick(rng, 1, 2), cin = pick(rng, 1, 3), cout = pick(rng, 1, 4);
    const bool three_d = trial % 2 == 0;
    const int d = three_d ? pick(rng, 1, 4) : 1, h = pick(rng, 1, 6), w = pick(rng, 1, 7);
    const int kd = three_d ? pick(rng, 1, d) : 1, kh = pick(rng, 1, h), kw = pick(rng, 1, w);
    const Dims5 xd{n, cin, d, h, w};
    const auto b = random_tensor<float>({cout}, rng);

    // forward convolution
    Shape xs = three_d ? Shape{n, cin, d, h, w} : Shape{n, cin, h, w};
    Shape ks = three_d ? Shape{cout, cin, kd, kh, kw} : Shape{cout, cin, kh, kw};
    const auto x = random_tensor<float>(xs, rng);
    const auto k = random_tensor<float>(ks, rng);
    const auto y = three_d ? blm::conv3d(x, k, b) : blm::conv2d(x, k, b);
    const auto expect = blm::testing::conv3d_oracle(to_doubles(x.data()), xd, to_doubles(k.data()), cout,
                                                    kd, kh, kw, to_doubles(b.data()));
    CHECK(blm::testing::scaled_max_diff(to_doubles(y.data()), expect) < 1e-6);
    const auto y64 = three_d ? blm::conv3d(blm::tensor_cast<double>(x, false), blm::tensor_cast<double>(k, false),
                                           blm::tensor_cast<double>(b, false))
                             : blm::conv2d(blm::tensor_cast<double>(x, false), blm::tensor_cast<double>(k, false),
                                           blm::tensor_cast<double>(b, false));
    CHECK(blm::testing::max_abs_diff(to_doubles(y64.data()), expect) < 1e-6);

    // transposed convolution
    Shape kts = three_d ? Shape{cin, cout, kd, kh, kw} : Shape{cin, cout, kh, kw};
    const auto kt = random_tensor<float>(kts, rng);
    const auto yt = three_d ? blm::conv_transpose3d(x, kt, b) : blm::conv_transpose2d(x, kt, b);
    const auto expect_t = blm::testing::conv_transpose3d_oracle(to_doubles(x.data()), xd, to_doubles(kt.data()),
                                                                cout, kd, kh, kw, to_doubles(b.data()));
    CHECK(blm::testing::scaled_max_diff(to_doubles(yt.data()), expect_t) < 1e-6);
    const auto yt64 = three_d ? blm::conv_transpose3d(blm::tensor_cast<double>(x, false), blm::tensor_cast<double>(kt, false),
                                                      blm::tensor_cast<double>(b, false))
                              : blm::conv_transpose2d(blm::tensor_cast<double>(x, false), blm::tensor_cast<double>(kt, false),
                                                      blm::tensor_cast<double>(b, false));
    CHECK(blm::testing::max_abs_diff(to_doubles(yt64.data()), expect_t) < 1e-6);
  }
}

TEST_CASE("transposed convolution is the adjoint of convolution") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < kCasesPerOp; ++trial) {
    const bool three_d = trial % 2 == 1;
    const int n = pick(rng, 1, 2), cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
    const int d = three_d ? pick(rng, 2, 4) : 1, h = pick(rng, 2, 6), w = pick(rng, 2, 6);
    const int kd = three_d ? pick(rng, 1, d) : 1, kh = pick(rng, 1, h), kw = pick(rng, 1, w);
    const Shape xs = three_d ? Shape{n, cin, d, h, w} : Shape{n, cin, h, w};
    const Shape ks = three_d ? Shape{cout, cin, kd, kh, kw} : Shape{cout, cin, kh, kw};
    const auto x = random_tensor<float>(xs, rng);
    const auto k = random_tensor<float>(ks, rng);
    const auto zero_out = Tensor::zeros({cout});
    const auto zero_in = Tensor::zeros({cin});
    const auto cx = three_d ? blm::conv3d(x, k, zero_out) : blm::conv2d(x, k, zero_out);
    const auto y = random_tensor<float>(cx.shape(), rng);
    // The conv kernel [Cout,Cin,...] read as a transposed kernel maps Cout -> Cin.
    const auto ty = three_d ? blm::conv_transpose3d(y, k, zero_in) : blm::conv_transpose2d(y, k, zero_in);
    REQUIRE(ty.shape() == x.shape());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < cx.numel(); ++i) lhs += double(cx.data()[i]) * y.data()[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += double(x.data()[i]) * ty.data()[i];
    CHECK(std::abs(lhs - rhs) < 1e-5 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("conv_transpose3d forward equals conv3d input gradient with the same kernel") {
  std::mt19937_64 rng(7);
  auto x = random_tensor<float>({1, 2, 3, 5, 4}, rng, true);
  const auto k = random_tensor<float>({3, 2, 2, 3, 2}, rng);
  const auto y = blm::conv3d(x, k, Tensor::zeros({3}));
  const auto upstream = random_tensor<float>(y.shape(), rng);
  blm::inner_product(y, upstream).backward();
  const auto t = blm::conv_transpose3d(upstream, k, Tensor::zeros({2}));
  REQUIRE(t.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(t.data()[i] == doctest::Approx(x.grad()[i]).epsilon(1e-6));
}

TEST_CASE("activation: zero-preserving, monotone, finite-difference gradient") {
  const auto z = blm::leaky_relu(Tensor::zeros({4}));
  for (const float v : z.data()) CHECK(v == 0.0f);

  std::mt19937_64 rng(8);
  const auto a = random_tensor<float>({200}, rng, false, -3.0, 3.0);
  std::vector<float> bigger(a.data().begin(), a.data().end());
  for (auto& v : bigger) v += 0.1f;
  const auto fa = blm::leaky_relu(a);
  const auto fb = blm::leaky_relu(Tensor({200}, bigger));
  for (std::size_t i = 0; i < 200; ++i) CHECK(fa.data()[i] <= fb.data()[i]);

  for (int trial = 0; trial < kCasesPerOp; ++trial) {
    const auto x = random_tensor<double>({pick(rng, 1, 4), pick(rng, 1, 9)}, rng, true);
    const auto r = random_tensor<double>(x.shape(), rng);
    const auto report = blm::testing::check_gradients(
        [&] { return blm::inner_product(blm::leaky_relu(x), r); }, {x}, rng);
    CHECK_MESSAGE(report.max_rel_error < kGradTolerance, report.worst);
  }
}

TEST_CASE("finite-difference gradients: linear") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < kCasesPerOp; ++trial) {
    const int b = pick(rng, 1, 4), in = pick(rng, 1, 7), out = pick(rng, 1, 6);
    const auto x = random_tensor<double>({b, in}, rng, true);
    const auto w = random_tensor<double>({out, in}, rng, true);
    const auto bias = random_tensor<double>({out}, rng, true);
    const auto r = random_tensor<double>({b, out}, rng);
    const auto report = blm::testing::check_gradients(
        [&] { return blm::inner_product(blm::linear(x, w, bias), r); }, {x, w, bias}, rng);
    CHECK_MESSAGE(report.max_rel_error < kGradTolerance, report.worst);
  }
}

TEST_CASE("finite-difference gradients: convolutions and transposed convolutions") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < kCasesPerOp; ++trial) {
    const int n = pick(rng, 1, 2), cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
    const int d = pick(rng, 1, 3), h = pick(rng, 1, 5), w = pick(rng, 1, 5);
    const int kd = pick(rng, 1, d), kh = pick(rng, 1, h), kw = pick(rng, 1, w);

    const auto x2 = random_tensor<double>({n, cin, h, w}, rng, true);
    const auto k2 = random_tensor<double>({cout, cin, kh, kw}, rng, true);
    const auto b2 = random_tensor<double>({cout}, rng, true);
    auto r2 = random_tensor<double>(blm::conv_output_shape(x2.shape(), k2.shape(), false), rng);
    auto rep = blm::testing::check_gradients(
        [&] { return blm::inner_product(blm::conv2d(x2, k2, b2), r2); }, {x2, k2, b2}, rng);
    CHECK_MESSAGE(rep.max_rel_error < kGradTolerance, "conv2d " << rep.worst);

    const auto x3 = random_tensor<double>({n, cin, d, h, w}, rng, true);
    const auto k3 = random_tensor<double>({cout, cin, kd, kh, kw}, rng, true);
    const auto r3 = random_tensor<double>(blm::conv_output_shape(x3.shape(), k3.shape(), false), rng);
    rep = blm::testing::check_gradients(
        [&] { return blm::inner_product(blm::conv3d(x3, k3, b2), r3); }, {x3, k3, b2}, rng);
    CHECK_MESSAGE(rep.max_rel_error < kGradTolerance, "conv3d " << rep.worst);

    const auto kt2 = random_tensor<double>({cin, cout, kh, kw}, rng, true);
    const auto rt2 = random_tensor<double>(blm::conv_output_shape(x2.shape(), kt2.shape(), true), rng);
    rep = blm::testing::check_gradients(
        [&] { return blm::inner_product(blm::conv_transpose2d(x2, kt2, b2), rt2); }, {x2, kt2, b2}, rng);
    CHECK_MESSAGE(rep.max_rel_error < kGradTolerance, "conv_transpose2d " << rep.worst);

    const auto kt3 = random_tensor<double>({cin, cout, kd, kh, kw}, rng, true);
    const auto rt3 = random_tensor<double>(blm::conv_output_shape(x3.shape(), kt3.shape(), true), rng);
    rep = blm::testing::check_gradients(
        [&] { return blm::inner_product(blm::conv_transpose3d(x3, kt3, b2), rt3); }, {x3, kt3, b2}, rng);
    CHECK_MESSAGE(rep.max_rel_error < kGradTolerance, "conv_transpose3d " << rep.worst);
  }
}

TEST_CASE("finite-difference gradients: reshape, slicing, sums") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < kCasesPerOp; ++trial) {
    const int rows = pick(rng, 1, 4), cols = pick(rng, 2, 8);
    const auto x = random_tensor<double>({rows, cols}, rng, true);
    const auto y = random_tensor<double>({rows, cols}, rng, true);
    const int begin = pick(rng, 0, cols - 1);
    const int count = pick(rng, 1, cols - begin);
    std::mt19937_64 proj_rng(trial);
    auto rep = blm::testing::check_gradients(
        [&] {
          std::mt19937_64 local = proj_rng;
          return project(blm::slice_columns(blm::reshape(x, {rows, cols}), begin, count), local);
        },
        {x}, rng);
    CHECK_MESSAGE(rep.max_rel_error < kGradTolerance, rep.worst);

    rep = blm::testing::check_gradients(
        [&] { return blm::sum(blm::weighted_sum<double>({{x, 0.3}, {y, -1.7}, {x, 2.0}})); }, {x, y}, rng);
    CHECK_MESSAGE(rep.max_rel_error < kGradTolerance, rep.worst);
  }
}

TEST_CASE("backward: quadratic, accumulation, contract errors") {
  // Σ w_i² built from the tape: linear([w], [w]ᵀ) = w·w
  auto x = Tensor64({1, 4}, {0.5, -1.0, 2.0, 3.5}, true);
  auto quad = blm::linear(x, x, Tensor64({1}, {0.0}));
  quad.backward();
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]));

  // Second call without zeroing doubles every leaf gradient exactly.
  std::vector<double> first(x.grad().begin(), x.grad().end());
  quad.backward();
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == 2.0 * first[i]);

  x.zero_grad();
  for (const double g : x.grad()) CHECK(g == 0.0);

  CHECK_THROWS_AS(blm::reshape(x, {2, 2}).backward(), blm::ContractError);
  CHECK_THROWS_AS(Tensor64::scalar(1.0).backward(), blm::ContractError);
}

TEST_CASE("no-grad mode records nothing") {
  auto w = Tensor({2}, {1.0f, 2.0f}, true);
  blm::NoGradGuard guard;
  const auto s = blm::sum(w);
  CHECK_FALSE(s.requires_grad());
}

TEST_CASE("tensor construction validates shapes") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), blm::DimensionError);
  CHECK_THROWS_AS(Tensor({0, 3}, {}), blm::DimensionError);
  CHECK_THROWS_AS(blm::reshape(Tensor::zeros({2, 3}), {4, 2}), blm::DimensionError);
  CHECK_THROWS_AS(blm::slice_columns(Tensor::zeros({2, 3}), 2, 2), blm::DimensionError);
}

TEST_CASE("identical seeds give bit-identical forward and backward results") {
  auto run = [] {
    std::mt19937_64 rng(99);
    auto x = random_tensor<float>({2, 1, 5, 20, 18}, rng);
    auto k = random_tensor<float>({4, 1, 3, 15, 15}, rng, true);
    auto b = random_tensor<float>({4}, rng, true);
    auto y = blm::leaky_relu(blm::conv3d(x, k, b));
    const auto r = random_tensor<float>(y.shape(), rng);
    blm::inner_product(y, r).backward();
    std::vector<float> out(y.data().begin(), y.data().end());
    out.insert(out.end(), k.grad().begin(), k.grad().end());
    out.insert(out.end(), b.grad().begin(), b.grad().end());
    return out;
  };
  CHECK(run() == run());
}

// ---------------------------------------------------------------------------
// Adam

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  std::vector<blm::Parameter> params{{"w", Tensor({3}, {1.0f, -2.0f, 0.5f}, true)}};
  params[0].tensor.zero_grad();
  auto state = blm::make_adam_state(params);
  blm::adam_step(params, state);
  CHECK(params[0].tensor.data()[0] == 1.0f);
  CHECK(params[0].tensor.data()[1] == -2.0f);
  CHECK(params[0].tensor.data()[2] == 0.5f);
}

TEST_CASE("adam: first step moves by lr regardless of gradient scale") {
  for (const double scale : {1e-3, 1.0, 1e4}) {
    std::vector<blm::BasicParameter<double>> params{{"w", Tensor64({2}, {0.0, 0.0}, true)}};
    params[0].tensor.zero_grad();
    params[0].tensor.grad()[0] = scale;
    params[0].tensor.grad()[1] = -scale;
    auto state = blm::make_adam_state(params, {.lr = 1e-3});
    blm::adam_step(params, state);
    CHECK(params[0].tensor.data()[0] == doctest::Approx(-1e-3).epsilon(1e-4));
    CHECK(params[0].tensor.data()[1] == doctest::Approx(1e-3).epsilon(1e-4));
  }
}

TEST_CASE("adam: missing gradient is a contract error") {
  std::vector<blm::Parameter> params{{"encoder.linear.weight", Tensor::zeros({2}, true)}};
  auto state = blm::make_adam_state(params);
  try {
    blm::adam_step(params, state);
    FAIL("expected ContractError");
  } catch (const blm::ContractError& e) {
    CHECK(std::string(e.what()).find("encoder.linear.weight") != std::string::npos);
  }
}

namespace {

// Scalar Adam on f(w) = (w-3)², written out independently of the library.
struct ScalarDescent {
  double w = 0.0;
  int reached_at = -1;
};

ScalarDescent scalar_adam_oracle(double lr, int steps) {
  double w = 0.0, m = 0.0, v = 0.0;
  ScalarDescent out;
  for (int t = 1; t <= steps; ++t) {
    const double g = 2.0 * (w - 3.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    w -= lr * mh / (std::sqrt(vh) + 1e-8);
    if (out.reached_at < 0 && std::abs(w - 3.0) < 1e-2) out.reached_at = t;
  }
  out.w = w;
  return out;
}

ScalarDescent library_adam(double lr, int steps) {
  std::vector<blm::BasicParameter<double>> params{{"w", Tensor64::scalar(0.0, true)}};
  auto state = blm::make_adam_state(params, {.lr = lr});
  ScalarDescent out;
  for (int t = 1; t <= steps; ++t) {
    auto& w = params[0].tensor;
    w.zero_grad();
    w.grad()[0] = 2.0 * (w.item() - 3.0);
    blm::adam_step(params, state);
    if (out.reached_at < 0 && std::abs(w.item() - 3.0) < 1e-2) out.reached_at = t;
  }
  out.w = params[0].tensor.item();
  return out;
}

}  // namespace

TEST_CASE("adam: scalar descent on (w-3)^2 follows the independent oracle") {
  // At lr 0.001 each step moves about lr, so 2,000 steps cover ~1.7 of the
  // distance 3; the 1e-2 neighbourhood is first entered at step 5,791.
  const auto oracle = scalar_adam_oracle(1e-3, 2000);
  const auto lib = library_adam(1e-3, 2000);
  CHECK(lib.w == doctest::Approx(oracle.w).epsilon(1e-9));
  CHECK(oracle.w == doctest::Approx(1.694071698265339).epsilon(1e-9));

  const auto long_run = library_adam(1e-3, 10000);
  CHECK(long_run.reached_at == scalar_adam_oracle(1e-3, 10000).reached_at);
  CHECK(long_run.reached_at == 5791);
  CHECK(std::abs(long_run.w - 3.0) < 1e-2);

  const auto fast = library_adam(1e-2, 2000);
  CHECK(fast.reached_at == 808);
  CHECK(std::abs(fast.w - 3.0) < 1e-2);
}
