#include "drift/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "drift/errors.hpp"

namespace drift {

namespace {

constexpr double kProbFloor = 1e-300;

}  // namespace

std::vector<double> softmax_distribution(std::span<const double> scores, double tau) {
  if (scores.empty()) throw std::invalid_argument("softmax_distribution needs a nonempty list");
  if (!(tau > 0.0)) throw std::invalid_argument("softmax_distribution needs tau > 0");
  double max_logit = scores[0] / tau;
  for (const double s : scores) max_logit = std::max(max_logit, s / tau);
  std::vector<double> p(scores.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    p[j] = std::exp(scores[j] / tau - max_logit);
    sum += p[j];
  }
  for (double& x : p) x /= sum;
  return p;
}

BatchLoss infonce(const BatchSimilarities& batch, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("infonce needs tau > 0");
  BatchLoss out;
  out.grad.assign(batch.sims.size(), 0.0);
  if (batch.n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(batch.n);
  for (std::size_t i = 0; i < batch.n; ++i) {
    if (batch.masked(i, i)) {
      throw std::invalid_argument("infonce: diagonal positive (" + std::to_string(i) +
                                  ") must not be masked");
    }
    double max_logit = batch.sim(i, i) / tau;
    for (std::size_t j = 0; j < batch.cols; ++j) {
      if (!batch.masked(i, j)) max_logit = std::max(max_logit, batch.sim(i, j) / tau);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < batch.cols; ++j) {
      if (!batch.masked(i, j)) denom += std::exp(batch.sim(i, j) / tau - max_logit);
    }
    out.loss += inv_n * (std::log(denom) + max_logit - batch.sim(i, i) / tau);
    for (std::size_t j = 0; j < batch.cols; ++j) {
      if (batch.masked(i, j)) continue;
      const double p = std::exp(batch.sim(i, j) / tau - max_logit) / denom;
      out.grad[i * batch.cols + j] = inv_n * (p - (j == i ? 1.0 : 0.0)) / tau;
    }
  }
  return out;
}

BatchLoss listwise_kl(std::span<const double> student_scores,
                      std::span<const double> teacher_scores, double tau_student,
                      double tau_teacher) {
  if (student_scores.size() != teacher_scores.size()) {
    throw LengthMismatchError("listwise_kl got " + std::to_string(student_scores.size()) +
                              " student vs " + std::to_string(teacher_scores.size()) +
                              " teacher scores");
  }
  if (student_scores.empty()) {
    throw std::invalid_argument("listwise_kl needs at least one candidate");
  }
  const std::vector<double> p_teacher = softmax_distribution(teacher_scores, tau_teacher);
  const std::vector<double> p_student = softmax_distribution(student_scores, tau_student);
  BatchLoss out;
  out.grad.resize(student_scores.size());
  for (std::size_t j = 0; j < student_scores.size(); ++j) {
    const double pt = std::max(p_teacher[j], kProbFloor);
    const double ps = std::max(p_student[j], kProbFloor);
    if (p_teacher[j] > 0.0) out.loss += p_teacher[j] * (std::log(pt) - std::log(ps));
    out.grad[j] = (p_student[j] - p_teacher[j]) / tau_student;
  }
  return out;
}

double combined(double distill_loss, double contrastive_loss, double weight) {
  return distill_loss + weight * contrastive_loss;
}

}  // namespace drift
