#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "blm/error.hpp"
#include "blm/objectives.hpp"
#include "blm/tensor/ops.hpp"
#include "support/oracles.hpp"

using blm::Shape;
using blm::Tensor;
using blm::Tensor64;
using blm::testing::random_tensor;
using blm::testing::random_values;

namespace {

using Vec = std::vector<float>;

std::span<const float> s(const Vec& v) { return v; }

Vec random_vec(std::size_t n, std::mt19937_64& rng) {
  const auto d = random_values(n, rng);
  return Vec(d.begin(), d.end());
}

double cos_oracle(const Vec& a, const Vec& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("cosine_score: identity, orthogonality, scale invariance, degenerate input") {
  const Vec a{1.0f, 2.0f, -3.0f};
  Vec twice(a);
  for (auto& v : twice) v *= 2.0f;
  CHECK(blm::cosine_score(s(a), s(a)) == doctest::Approx(1.0));
  CHECK(blm::cosine_score(s(Vec{1, 0}), s(Vec{0, 1})) == doctest::Approx(0.0));
  CHECK(blm::cosine_score(s(a), s(twice)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(blm::cosine_score(s(a), s(Vec{0, 0, 0})), blm::DegenerateInputError);
  CHECK_THROWS_AS(blm::cosine_score(s(a), s(Vec{1, 0})), blm::DimensionError);
}

TEST_CASE("max_margin_loss: worked examples") {
  const Vec e1{1, 0, 0}, e2{0, 1, 0}, e3{0, 0, 1};
  CHECK(blm::max_margin_loss(s(e1), s(e1), {s(e2), s(e3)}) == doctest::Approx(0.0));

  // cos(correct, pred) = 0.5 and cos(wrong, pred) = 0.7 for pred = e1.
  const Vec correct{0.5f, std::sqrt(0.75f), 0};
  const Vec wrong{0.7f, 0, std::sqrt(1.0f - 0.49f)};
  CHECK(blm::max_margin_loss(s(e1), s(correct), {s(wrong)}) == doctest::Approx(1.2).epsilon(1e-6));
  CHECK_THROWS_AS(blm::max_margin_loss(s(e1), s(e1), {}), blm::ContractError);
}

TEST_CASE("max_margin_loss: batched tensor form equals the per-term loop oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int batch = 1 + trial % 4, dim = 8 + trial;
    const auto pred = random_tensor<float>({batch, dim}, rng);
    const auto cands = random_tensor<float>({batch, 6, dim}, rng);
    std::vector<int> correct(batch);
    for (auto& c : correct) c = std::uniform_int_distribution<int>(0, 5)(rng);

    double expect = 0.0;
    for (int b = 0; b < batch; ++b) {
      Vec p(pred.data().begin() + b * dim, pred.data().begin() + (b + 1) * dim);
      std::vector<Vec> c(6);
      for (int j = 0; j < 6; ++j) {
        c[j].assign(cands.data().begin() + (b * 6 + j) * dim, cands.data().begin() + (b * 6 + j + 1) * dim);
      }
      const double sc = cos_oracle(c[correct[b]], p);
      std::vector<std::span<const float>> wrong;
      double per_episode = 0.0;
      for (int j = 0; j < 6; ++j) {
        if (j == correct[b]) continue;
        per_episode += std::max(0.0, 1.0 - sc + cos_oracle(c[j], p));
        wrong.push_back(c[j]);
      }
      CHECK(blm::max_margin_loss(s(p), s(c[correct[b]]), wrong) == doctest::Approx(per_episode).epsilon(1e-6));
      expect += per_episode;
    }
    expect /= batch;
    const auto loss = blm::max_margin_loss(pred, cands, correct);
    CHECK(std::abs(loss.item() - expect) < 1e-6 * std::max(1.0, expect));
    CHECK(loss.item() >= 0.0f);
  }
}

TEST_CASE("max_margin_loss: zero exactly when every wrong answer trails by the margin") {
  // pred = e1, correct = e1, wrong answers at cos ≤ 0 → all hinges inactive.
  auto pred = Tensor64({1, 3}, {1, 0, 0}, true);
  const auto cands = Tensor64({1, 3, 3}, {1, 0, 0, 0, 1, 0, -1, 0, 0});
  const std::vector<int> correct{0};
  auto loss = blm::max_margin_loss(pred, cands, correct);
  CHECK(loss.item() == 0.0);
  // A wrong answer with cos 0.01 violates the margin by 0.01.
  const auto tight = Tensor64({1, 2, 2}, {1, 0, 0.01, std::sqrt(1 - 0.0001)});
  CHECK(blm::max_margin_loss(Tensor64({1, 2}, {1, 0}), tight, correct).item() == doctest::Approx(0.01));
}

TEST_CASE("finite-difference gradients: max_margin_loss") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const int batch = 1 + trial % 3, dim = 3 + trial % 5;
    const auto pred = random_tensor<double>({batch, dim}, rng, true);
    const auto cands = random_tensor<double>({batch, 6, dim}, rng);
    std::vector<int> correct(batch);
    for (auto& c : correct) c = std::uniform_int_distribution<int>(0, 5)(rng);
    const auto rep = blm::testing::check_gradients(
        [&] { return blm::max_margin_loss(pred, cands, correct); }, {pred}, rng);
    CHECK_MESSAGE(rep.max_rel_error < 1e-4, rep.worst);
  }
}

TEST_CASE("kl_standard_normal: closed-form cases and non-negativity") {
  CHECK(blm::kl_standard_normal(std::vector<double>(5, 0.0), std::vector<double>(5, 0.0)) == 0.0);
  CHECK(blm::kl_standard_normal(std::vector<double>{1, 0, 0, 0, 0}, std::vector<double>(5, 0.0)) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(blm::kl_standard_normal(std::vector<double>{NAN}, std::vector<double>{0.0}), blm::ContractError);

  std::mt19937_64 rng(23);
  for (int i = 0; i < 200; ++i) {
    const auto mu = random_values(5, rng, -2, 2), lv = random_values(5, rng, -3, 3);
    CHECK(blm::kl_standard_normal(mu, lv) > 0.0);
  }

  // Batched: summed over dims, averaged over the batch.
  const auto mu = Tensor64({2, 5}, {1, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto lv = Tensor64::zeros({2, 5});
  CHECK(blm::kl_standard_normal(mu, lv).item() == doctest::Approx(0.25));
  CHECK_THROWS_AS(blm::kl_standard_normal(Tensor64({1, 1}, {INFINITY}), Tensor64::zeros({1, 1})),
                  blm::ContractError);
}

TEST_CASE("kl_standard_normal: closed form within 1% of a Monte-Carlo estimate") {
  std::mt19937_64 rng(24);
  for (int config = 0; config < 10; ++config) {
    const auto mu = random_values(5, rng, -1.5, 1.5), lv = random_values(5, rng, -1.0, 1.0);
    const double closed = blm::kl_standard_normal(mu, lv);
    const double mc = blm::testing::monte_carlo_kl(mu, lv, 1'000'000, rng);
    CHECK_MESSAGE(std::abs(closed - mc) < 0.01 * closed, "closed " << closed << " mc " << mc);
  }
}

TEST_CASE("finite-difference gradients: kl and reconstruction") {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape shape{1 + trial % 3, 5};
    const auto mu = random_tensor<double>(shape, rng, true);
    const auto lv = random_tensor<double>(shape, rng, true);
    auto rep = blm::testing::check_gradients([&] { return blm::kl_standard_normal(mu, lv); }, {mu, lv}, rng);
    CHECK_MESSAGE(rep.max_rel_error < 1e-4, rep.worst);

    const auto x = random_tensor<double>({2, 1 + trial % 4, 3}, rng, true);
    const auto xh = random_tensor<double>(x.shape(), rng, true);
    rep = blm::testing::check_gradients([&] { return blm::reconstruction_loss(x, xh); }, {x, xh}, rng);
    CHECK_MESSAGE(rep.max_rel_error < 1e-4, rep.worst);
  }
}

TEST_CASE("sample_latent: deterministic limit, moments, seeding, gradients") {
  const auto mu = Tensor({1, 5}, {0.3f, -1.0f, 2.0f, 0.0f, 5.0f});
  std::mt19937_64 rng(26);
  const auto z = blm::sample_latent(mu, Tensor::full({1, 5}, -30.0f), rng);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(z.data()[i] - mu.data()[i]) < 1e-6);

  const int n = 100'000;
  const auto draws = blm::sample_latent(Tensor64::zeros({n, 1}), Tensor64::zeros({n, 1}), rng);
  const double mean = std::accumulate(draws.data().begin(), draws.data().end(), 0.0) / n;
  double var = 0.0;
  for (const double v : draws.data()) var += (v - mean) * (v - mean);
  var /= n - 1;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);

  std::mt19937_64 a(7), b(7);
  const auto za = blm::sample_latent(mu, Tensor::zeros({1, 5}), a);
  const auto zb = blm::sample_latent(mu, Tensor::zeros({1, 5}), b);
  CHECK(std::vector<float>(za.data().begin(), za.data().end()) ==
        std::vector<float>(zb.data().begin(), zb.data().end()));

  std::mt19937_64 grng(27);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_tensor<double>({2, 5}, grng, true);
    const auto lv = random_tensor<double>({2, 5}, grng, true);
    const auto r = random_tensor<double>({2, 5}, grng);
    const auto rep = blm::testing::check_gradients(
        [&] {
          std::mt19937_64 fixed(static_cast<unsigned>(trial));
          return blm::inner_product(blm::sample_latent(m, lv, fixed), r);
        },
        {m, lv}, grng);
    CHECK_MESSAGE(rep.max_rel_error < 1e-4, rep.worst);
  }
}

TEST_CASE("reconstruction_loss: worked cases, oracle and shape check") {
  CHECK(blm::reconstruction_loss(Tensor::full({2, 3}, 0.5f), Tensor::full({2, 3}, 0.5f)).item() == 0.0f);
  CHECK(blm::reconstruction_loss(Tensor::zeros({2, 3}), Tensor::full({2, 3}, 1.0f)).item() == 1.0f);
  std::mt19937_64 rng(28);
  const auto x = random_tensor<float>({3, 7, 4}, rng), y = random_tensor<float>({3, 7, 4}, rng);
  double expect = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) expect += std::pow(double(x.data()[i]) - y.data()[i], 2);
  expect /= double(x.numel());
  CHECK(std::abs(blm::reconstruction_loss(x, y).item() - expect) < 1e-6);
  CHECK_THROWS_AS(blm::reconstruction_loss(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), blm::DimensionError);
}

TEST_CASE("select_answer: matches exhaustive comparison, invariant under rescaling") {
  const Vec e1{1, 0, 0}, e2{0, 1, 0}, e3{0, 0, 1};
  CHECK(blm::select_answer(s(e2), {s(e1), s(e3), s(e2), s(e3), s(e1), s(e3)}) == 2);
  // ties go to the lowest index
  CHECK(blm::select_answer(s(e1), {s(e2), s(e1), s(e1), s(e3), s(e1), s(e2)}) == 1);
  CHECK_THROWS_AS(blm::select_answer(s(e1), {s(e2), s(Vec{0, 0, 0})}), blm::DegenerateInputError);

  std::mt19937_64 rng(29);
  std::uniform_real_distribution<float> pos(0.1f, 10.0f);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pred = random_vec(16, rng);
    std::vector<Vec> cands(6);
    for (auto& c : cands) c = random_vec(16, rng);
    std::size_t expect = 0;
    for (std::size_t j = 1; j < 6; ++j) {
      if (cos_oracle(cands[j], pred) > cos_oracle(cands[expect], pred)) expect = j;
    }
    std::vector<std::span<const float>> views(cands.begin(), cands.end());
    CHECK(blm::select_answer(s(pred), views) == expect);

    Vec scaled_pred(pred);
    for (auto& v : scaled_pred) v *= 10.0f;
    std::vector<Vec> scaled(cands);
    for (auto& c : scaled) {
      const float k = pos(rng);
      for (auto& v : c) v *= k;
    }
    std::vector<std::span<const float>> scaled_views(scaled.begin(), scaled.end());
    CHECK(blm::select_answer(s(scaled_pred), scaled_views) == expect);
  }
}

TEST_CASE("total_loss recomposes from its terms and weights") {
  blm::LossBreakdown br;
  blm::LossTerms<double> baseline{Tensor64::scalar(0.8), {}, {}};
  CHECK(blm::total_loss(baseline, {}, br).item() == 0.8);
  CHECK_FALSE(br.has_kl);
  CHECK_FALSE(br.has_recon);

  blm::LossTerms<double> dual{Tensor64::scalar(0.8), Tensor64::scalar(2.5), Tensor64::scalar(0.3)};
  const auto t = blm::total_loss(dual, {.alpha = 0.01, .beta = 1.0}, br);
  CHECK(br.has_kl);
  CHECK(br.has_recon);
  CHECK(t.item() == doctest::Approx(0.8 + 0.01 * 0.3 + 2.5));
  CHECK(br.total == doctest::Approx(br.recomposed()).epsilon(1e-15));
  CHECK(br.answer_loss >= 0.0);
}

TEST_CASE("finite-difference gradients: composite conv -> linear -> cosine loss") {
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    const int batch = 1 + trial % 3;
    const auto x = random_tensor<double>({batch, 1, 4, 6}, rng);
    const auto k = random_tensor<double>({2, 1, 2, 3}, rng, true);
    const auto kb = random_tensor<double>({2}, rng, true);
    const auto w = random_tensor<double>({5, 2 * 3 * 4}, rng, true);
    const auto wb = random_tensor<double>({5}, rng, true);
    const auto cands = random_tensor<double>({batch, 6, 5}, rng);
    std::vector<int> correct(batch);
    for (auto& c : correct) c = std::uniform_int_distribution<int>(0, 5)(rng);
    const auto rep = blm::testing::check_gradients(
        [&] {
          auto h = blm::leaky_relu(blm::conv2d(x, k, kb));
          auto pred = blm::linear(blm::reshape(h, {batch, 24}), w, wb);
          return blm::max_margin_loss(pred, cands, correct);
        },
        {k, kb, w, wb}, rng);
    CHECK_MESSAGE(rep.max_rel_error < 1e-4, rep.worst);
  }
}
