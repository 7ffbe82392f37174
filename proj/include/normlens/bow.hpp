#pragma once

#include <stdexcept>
#include <vector>

#include "normlens/embeddings.hpp"
#include "normlens/lstm.hpp"  // Matrix
#include "normlens/rng.hpp"

namespace normlens {

// Bag-of-word-vectors logistic model: shared per-dimension coefficients over
// positions, so the score is sigma(w . sum_t x_t + c). Padding rows are zero
// and contribute nothing.
class BowWvModel {
 public:
  explicit BowWvModel(int input_dim) : d_(input_dim) {
    params_.assign(d_ + 1, 0.0);
    grads_.assign(d_ + 1, 0.0);
  }

  int input_dim() const { return d_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }
  std::size_t param_count() const { return params_.size(); }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_));
    for (auto& p : params_) p = rng.uniform(-bound, bound);
  }

  double forward(const Matrix& x, bool /*training*/ = false, Rng* /*rng*/ = nullptr) {
    sum_.assign(d_, 0.0);
    for (const auto& row : x) {
      if (static_cast<int>(row.size()) != d_)
        throw std::runtime_error("bow forward: input dimension mismatch");
      for (int i = 0; i < d_; ++i) sum_[i] += row[i];
    }
    t_ = x.size();
    double logit = params_[d_];
    for (int i = 0; i < d_; ++i) logit += params_[i] * sum_[i];
    return sigmoid(logit);
  }

  double predict(const Matrix& x) const {
    std::vector<double> sum(d_, 0.0);
    for (const auto& row : x)
      for (int i = 0; i < d_; ++i) sum[i] += row[i];
    double logit = params_[d_];
    for (int i = 0; i < d_; ++i) logit += params_[i] * sum[i];
    return sigmoid(logit);
  }

  void backward(double grad_logit, Matrix* grad_x = nullptr) {
    for (int i = 0; i < d_; ++i) grads_[i] += grad_logit * sum_[i];
    grads_[d_] += grad_logit;
    if (grad_x) {
      grad_x->assign(t_, std::vector<double>(d_, 0.0));
      for (std::size_t t = 0; t < t_; ++t)
        for (int i = 0; i < d_; ++i) (*grad_x)[t][i] = grad_logit * params_[i];
    }
  }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

 private:
  int d_;
  std::vector<double> params_, grads_;
  std::vector<double> sum_;
  std::size_t t_ = 0;
};

}  // namespace normlens
