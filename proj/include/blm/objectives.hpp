#pragma once

// Answer scoring, the three training losses and latent sampling.
//
// Plain overloads on spans are used for evaluation and as reference values;
// the tensor overloads record gradients.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "blm/tensor/tensor.hpp"

namespace blm {

// cos(a, b). Throws DegenerateInputError on a zero-norm argument.
double cosine_score(std::span<const float> a, std::span<const float> b);

// Σ_w [1 − cos(correct, pred) + cos(w, pred)]^+
double max_margin_loss(std::span<const float> pred, std::span<const float> correct,
                       const std::vector<std::span<const float>>& wrong);

// ½·Σ_d (μ_d² + exp(logvar_d) − 1 − logvar_d) for one latent code.
double kl_standard_normal(std::span<const double> mu, std::span<const double> logvar);

// Index of the highest-cosine candidate; ties go to the lowest index.
std::size_t select_answer(std::span<const float> pred, const std::vector<std::span<const float>>& candidates);

// Batched max-margin loss averaged over the batch.
//   pred:       [B, D]      (differentiable)
//   candidates: [B, K, D]   (constant)
//   correct:    B indices into the K candidates
template <class T>
BasicTensor<T> max_margin_loss(const BasicTensor<T>& pred, const BasicTensor<T>& candidates,
                               std::span<const int> correct);

// KL to N(0, I) summed over latent dims and averaged over the batch.
// mu, logvar: [B, L]. Non-finite inputs throw ContractError.
template <class T>
BasicTensor<T> kl_standard_normal(const BasicTensor<T>& mu, const BasicTensor<T>& logvar);

// mu + exp(logvar/2)·ε with ε ~ N(0, 1) drawn from `rng`.
template <class T>
BasicTensor<T> sample_latent(const BasicTensor<T>& mu, const BasicTensor<T>& logvar, std::mt19937_64& rng);

// Mean squared elementwise difference. Shapes must match exactly.
template <class T>
BasicTensor<T> reconstruction_loss(const BasicTensor<T>& x, const BasicTensor<T>& x_hat);

struct LossWeights {
  double alpha = 0.01;  // reconstruction
  double beta = 1.0;    // KL
};

struct LossBreakdown {
  double answer_loss = 0.0;
  double kl_loss = 0.0;
  double recon_loss = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  bool has_kl = false;
  bool has_recon = false;

  // answer + α·recon + β·kl, using only the present terms.
  double recomposed() const;
};

// Terms produced by one forward pass; kl and recon are left undefined when
// the model kind does not produce them.
template <class T>
struct LossTerms {
  BasicTensor<T> answer;
  BasicTensor<T> kl;
  BasicTensor<T> recon;
};

// Differentiable total plus its scalar breakdown.
template <class T>
BasicTensor<T> total_loss(const LossTerms<T>& terms, const LossWeights& weights, LossBreakdown& breakdown);

}  // namespace blm
