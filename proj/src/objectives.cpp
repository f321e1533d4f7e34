#include "blm/objectives.hpp"

#include <cmath>
#include <string>

#include "blm/error.hpp"
#include "blm/tensor/ops.hpp"

namespace blm {

namespace {

template <class A, class B>
double dot(std::span<A> a, std::span<B> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

template <class A>
double norm(std::span<A> a) {
  return std::sqrt(dot(a, a));
}

void require_same_length(const char* op, std::size_t a, std::size_t b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": lengths " + std::to_string(a) + " and " + std::to_string(b) +
                         " differ");
  }
}

double checked_norm(const char* op, std::span<const float> v) {
  const double n = norm(v);
  if (n == 0.0) throw DegenerateInputError(std::string(op) + ": zero-norm vector");
  return n;
}

template <class T>
void require_finite(const char* op, const BasicTensor<T>& t) {
  for (const T v : t.data()) {
    if (!std::isfinite(v)) throw ContractError(std::string(op) + ": non-finite input");
  }
}

}  // namespace

double cosine_score(std::span<const float> a, std::span<const float> b) {
  require_same_length("cosine_score", a.size(), b.size());
  return dot(a, b) / (checked_norm("cosine_score", a) * checked_norm("cosine_score", b));
}

double max_margin_loss(std::span<const float> pred, std::span<const float> correct,
                       const std::vector<std::span<const float>>& wrong) {
  if (wrong.empty()) throw ContractError("max_margin_loss: no wrong candidates");
  const double sc = cosine_score(correct, pred);
  double loss = 0.0;
  for (const auto& w : wrong) loss += std::max(0.0, 1.0 - sc + cosine_score(w, pred));
  return loss;
}

double kl_standard_normal(std::span<const double> mu, std::span<const double> logvar) {
  require_same_length("kl_standard_normal", mu.size(), logvar.size());
  double kl = 0.0;
  for (std::size_t d = 0; d < mu.size(); ++d) {
    if (!std::isfinite(mu[d]) || !std::isfinite(logvar[d])) {
      throw ContractError("kl_standard_normal: non-finite input");
    }
    kl += mu[d] * mu[d] + std::exp(logvar[d]) - 1.0 - logvar[d];
  }
  return 0.5 * kl;
}

std::size_t select_answer(std::span<const float> pred, const std::vector<std::span<const float>>& candidates) {
  if (candidates.empty()) throw ContractError("select_answer: no candidates");
  std::size_t best = 0;
  double best_score = cosine_score(candidates[0], pred);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = cosine_score(candidates[i], pred);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

template <class T>
BasicTensor<T> max_margin_loss(const BasicTensor<T>& pred, const BasicTensor<T>& candidates,
                               std::span<const int> correct) {
  if (pred.rank() != 2 || candidates.rank() != 3 || candidates.dim(0) != pred.dim(0) ||
      candidates.dim(2) != pred.dim(1)) {
    throw DimensionError("max_margin_loss: pred " + to_string(pred.shape()) + " incompatible with candidates " +
                         to_string(candidates.shape()));
  }
  const auto batch = pred.dim(0), k = candidates.dim(1), dim = pred.dim(1);
  if (static_cast<std::int64_t>(correct.size()) != batch) {
    throw DimensionError("max_margin_loss: " + std::to_string(correct.size()) + " correct indices for batch " +
                         std::to_string(batch));
  }
  if (k < 2) throw ContractError("max_margin_loss: no wrong candidates");

  // d/dp cos(a, p) = a/(|a||p|) − cos·p/|p|², accumulated per row as
  // coeff_a·a + coeff_p·p.
  std::vector<T> coeff_cand(static_cast<std::size_t>(batch * k), T(0));
  std::vector<T> coeff_pred(static_cast<std::size_t>(batch), T(0));
  std::vector<double> inv_norms(static_cast<std::size_t>(batch * k));
  std::vector<double> pred_norms(static_cast<std::size_t>(batch));
  double loss = 0.0;
  const auto pv = pred.data();
  const auto cv = candidates.data();
  for (std::int64_t b = 0; b < batch; ++b) {
    const int c = correct[static_cast<std::size_t>(b)];
    if (c < 0 || c >= k) throw ContractError("max_margin_loss: correct index out of range");
    auto p = pv.subspan(static_cast<std::size_t>(b * dim), static_cast<std::size_t>(dim));
    const double pn = norm(p);
    if (pn == 0.0) throw DegenerateInputError("max_margin_loss: zero-norm prediction");
    pred_norms[b] = pn;
    std::vector<double> cos(static_cast<std::size_t>(k));
    for (std::int64_t j = 0; j < k; ++j) {
      auto a = cv.subspan(static_cast<std::size_t>((b * k + j) * dim), static_cast<std::size_t>(dim));
      const double an = norm(a);
      if (an == 0.0) throw DegenerateInputError("max_margin_loss: zero-norm candidate");
      inv_norms[b * k + j] = 1.0 / an;
      cos[j] = dot(a, p) / (an * pn);
    }
    for (std::int64_t j = 0; j < k; ++j) {
      if (j == c) continue;
      const double hinge = 1.0 - cos[c] + cos[j];
      if (hinge <= 0.0) continue;
      loss += hinge;
      // +cos(w,p) − cos(c,p)
      coeff_cand[b * k + j] += T(inv_norms[b * k + j] / pn);
      coeff_cand[b * k + c] -= T(inv_norms[b * k + c] / pn);
      coeff_pred[b] += T((cos[c] - cos[j]) / (pn * pn));
    }
  }
  const T scale = T(1) / T(batch);
  return autograd::make_result<T>(
      Shape{1}, {T(loss) * scale}, {pred},
      [pred, candidates, coeff_cand, coeff_pred, batch, k, dim, scale](const detail::Node<T>& self) {
        auto dp = autograd::grad_sink(pred);
        const auto pv = pred.data();
        const auto cv = candidates.data();
        const T g = self.grad[0] * scale;
        for (std::int64_t b = 0; b < batch; ++b) {
          T* row = dp.data() + b * dim;
          const T* p = pv.data() + b * dim;
          for (std::int64_t i = 0; i < dim; ++i) row[i] += g * coeff_pred[b] * p[i];
          for (std::int64_t j = 0; j < k; ++j) {
            const T cf = coeff_cand[b * k + j];
            if (cf == T(0)) continue;
            const T* a = cv.data() + (b * k + j) * dim;
            for (std::int64_t i = 0; i < dim; ++i) row[i] += g * cf * a[i];
          }
        }
      });
}

template <class T>
BasicTensor<T> kl_standard_normal(const BasicTensor<T>& mu, const BasicTensor<T>& logvar) {
  if (mu.shape() != logvar.shape() || mu.rank() != 2) {
    throw DimensionError("kl_standard_normal: mu " + to_string(mu.shape()) + " incompatible with logvar " +
                         to_string(logvar.shape()));
  }
  require_finite("kl_standard_normal", mu);
  require_finite("kl_standard_normal", logvar);
  const auto m = mu.data(), lv = logvar.data();
  double kl = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) kl += double(m[i]) * m[i] + std::exp(double(lv[i])) - 1.0 - lv[i];
  const T scale = T(1) / T(mu.dim(0));
  return autograd::make_result<T>(Shape{1}, {T(0.5 * kl) * scale}, {mu, logvar},
                                  [mu, logvar, scale](const detail::Node<T>& self) {
                                    const T g = self.grad[0] * scale;
                                    const auto m = mu.data(), lv = logvar.data();
                                    auto dm = autograd::grad_sink(mu);
                                    auto dl = autograd::grad_sink(logvar);
                                    for (std::size_t i = 0; i < dm.size(); ++i) dm[i] += g * m[i];
                                    for (std::size_t i = 0; i < dl.size(); ++i) {
                                      dl[i] += g * T(0.5) * (std::exp(lv[i]) - T(1));
                                    }
                                  });
}

template <class T>
BasicTensor<T> sample_latent(const BasicTensor<T>& mu, const BasicTensor<T>& logvar, std::mt19937_64& rng) {
  if (mu.shape() != logvar.shape()) {
    throw DimensionError("sample_latent: mu " + to_string(mu.shape()) + " incompatible with logvar " +
                         to_string(logvar.shape()));
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> eps(mu.numel());
  for (auto& e : eps) e = T(normal(rng));
  std::vector<T> sigma(mu.numel());
  std::vector<T> z(mu.numel());
  const auto m = mu.data(), lv = logvar.data();
  for (std::size_t i = 0; i < z.size(); ++i) {
    sigma[i] = std::exp(lv[i] / T(2));
    z[i] = m[i] + sigma[i] * eps[i];
  }
  return autograd::make_result<T>(mu.shape(), std::move(z), {mu, logvar},
                                  [mu, logvar, eps = std::move(eps), sigma = std::move(sigma)](
                                      const detail::Node<T>& self) {
                                    auto dm = autograd::grad_sink(mu);
                                    auto dl = autograd::grad_sink(logvar);
                                    for (std::size_t i = 0; i < dm.size(); ++i) dm[i] += self.grad[i];
                                    for (std::size_t i = 0; i < dl.size(); ++i) {
                                      dl[i] += self.grad[i] * T(0.5) * sigma[i] * eps[i];
                                    }
                                  });
}

template <class T>
BasicTensor<T> reconstruction_loss(const BasicTensor<T>& x, const BasicTensor<T>& x_hat) {
  if (x.shape() != x_hat.shape()) {
    throw DimensionError("reconstruction_loss: input " + to_string(x.shape()) + " incompatible with reconstruction " +
                         to_string(x_hat.shape()));
  }
  const auto a = x.data(), b = x_hat.data();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(b[i]) - a[i];
    s += d * d;
  }
  const T scale = T(1) / T(a.size());
  return autograd::make_result<T>(Shape{1}, {T(s) * scale}, {x, x_hat}, [x, x_hat, scale](const detail::Node<T>& self) {
    const T g = T(2) * self.grad[0] * scale;
    const auto a = x.data(), b = x_hat.data();
    auto dx = autograd::grad_sink(x);
    auto dh = autograd::grad_sink(x_hat);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] -= g * (b[i] - a[i]);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += g * (b[i] - a[i]);
  });
}

double LossBreakdown::recomposed() const {
  double t = answer_loss;
  if (has_recon) t += alpha * recon_loss;
  if (has_kl) t += beta * kl_loss;
  return t;
}

template <class T>
BasicTensor<T> total_loss(const LossTerms<T>& terms, const LossWeights& weights, LossBreakdown& breakdown) {
  if (!terms.answer.defined()) throw ContractError("total_loss: answer term missing");
  breakdown = LossBreakdown{};
  breakdown.alpha = weights.alpha;
  breakdown.beta = weights.beta;
  breakdown.answer_loss = terms.answer.item();
  std::vector<std::pair<BasicTensor<T>, T>> parts{{terms.answer, T(1)}};
  if (terms.recon.defined()) {
    breakdown.has_recon = true;
    breakdown.recon_loss = terms.recon.item();
    parts.emplace_back(terms.recon, T(weights.alpha));
  }
  if (terms.kl.defined()) {
    breakdown.has_kl = true;
    breakdown.kl_loss = terms.kl.item();
    parts.emplace_back(terms.kl, T(weights.beta));
  }
  auto total = weighted_sum(parts);
  breakdown.total = total.item();
  return total;
}

#define BLM_INSTANTIATE_OBJECTIVES(T)                                                                   \
  template BasicTensor<T> max_margin_loss(const BasicTensor<T>&, const BasicTensor<T>&, std::span<const int>); \
  template BasicTensor<T> kl_standard_normal(const BasicTensor<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> sample_latent(const BasicTensor<T>&, const BasicTensor<T>&, std::mt19937_64&); \
  template BasicTensor<T> reconstruction_loss(const BasicTensor<T>&, const BasicTensor<T>&);             \
  template BasicTensor<T> total_loss(const LossTerms<T>&, const LossWeights&, LossBreakdown&);

BLM_INSTANTIATE_OBJECTIVES(float)
BLM_INSTANTIATE_OBJECTIVES(double)

#undef BLM_INSTANTIATE_OBJECTIVES

}  // namespace blm
