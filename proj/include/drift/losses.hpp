#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace drift {

struct LossConfig {
  double tau_contrastive = 0.01;
  double tau_student = 0.05;
  double tau_teacher = 0.3;
  double contrastive_weight = 0.1;
  double mask_threshold = 0.6;
};

// Student cosine scores for one batch. Row i holds s_de(q_i, .) over all
// batch positives (columns [0, n), column i being q_i's own positive) and
// then every query's hard negatives. mask != 0 excludes an entry from the
// softmax denominator; diagonal positives must stay unmasked.
struct BatchSimilarities {
  std::size_t n = 0;
  std::size_t cols = 0;
  std::vector<double> sims;
  std::vector<std::uint8_t> mask;

  void resize(std::size_t queries, std::size_t columns) {
    n = queries;
    cols = columns;
    sims.assign(n * cols, 0.0);
    mask.assign(n * cols, 0);
  }
  double& sim(std::size_t i, std::size_t j) { return sims[i * cols + j]; }
  double sim(std::size_t i, std::size_t j) const { return sims[i * cols + j]; }
  std::uint8_t& mask_at(std::size_t i, std::size_t j) { return mask[i * cols + j]; }
  bool masked(std::size_t i, std::size_t j) const { return mask[i * cols + j] != 0; }
};

struct BatchLoss {
  double loss = 0.0;
  std::vector<double> grad;  // same shape as the input scores
};

// Softmax with max-subtraction; probabilities are floored at 1e-300 before
// any log taken downstream.
std::vector<double> softmax_distribution(std::span<const double> scores, double tau);

// Eq-style batch contrastive loss: mean over queries of
// -log( exp(s_ii/tau) / sum_unmasked_j exp(s_ij/tau) ), with exact gradient
// with respect to every sims entry.
BatchLoss infonce(const BatchSimilarities& batch, double tau);

// KL(teacher || student) between the temperature-scaled softmax
// distributions over one query's candidate list (positive first, then hard
// negatives). Gradient with respect to the student scores:
// (p_student - p_teacher)/tau_student.
BatchLoss listwise_kl(std::span<const double> student_scores, std::span<const double> teacher_scores,
                      double tau_student, double tau_teacher);

// distill_loss + weight * contrastive_loss.
double combined(double distill_loss, double contrastive_loss, double weight);

}  // namespace drift
