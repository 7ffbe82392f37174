#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "normlens/embeddings.hpp"
#include "normlens/rng.hpp"

namespace normlens {

using Matrix = std::vector<std::vector<double>>;  // t x d input sequence

// One-layer LSTM with per-node scalar recurrence: gate m at time t sees
// U[m].x_t + w[m]*h_{t-1}[m] + b[m]. Output is sigma(W_h . relu(h_T) + c_h)
// with dropout on the relu(h_T) features during training and the matching
// (1-p) rescale at inference.
class LstmModel {
 public:
  LstmModel(int input_dim, int nodes, double dropout = 0.0)
      : d_(input_dim), m_(nodes), dropout_(dropout) {
    if (dropout < 0.0 || dropout >= 1.0) throw std::runtime_error("dropout must be in [0,1)");
    const std::size_t n = param_count();
    params_.assign(n, 0.0);
    grads_.assign(n, 0.0);
  }

  int input_dim() const { return d_; }
  int nodes() const { return m_; }
  double dropout() const { return dropout_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }

  std::size_t param_count() const {
    // 4 gates: U (m x d), w (m), b (m); output: W_h (m) + c_h
    return static_cast<std::size_t>(4) * m_ * d_ + 4 * m_ + 4 * m_ + m_ + 1;
  }

  // uniform(-1/sqrt(d), 1/sqrt(d)); forget-gate bias 1.0
  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_));
    for (auto& p : params_) p = rng.uniform(-bound, bound);
    for (int m = 0; m < m_; ++m) params_[off_b(kF) + m] = 1.0;
  }

  // Single cell step, exposed for unit and Jacobian tests.
  void cell_step(const std::vector<double>& x_t, const std::vector<double>& h_prev,
                 const std::vector<double>& c_prev, std::vector<double>& h_t,
                 std::vector<double>& c_t) const {
    if (static_cast<int>(x_t.size()) != d_ || static_cast<int>(h_prev.size()) != m_ ||
        static_cast<int>(c_prev.size()) != m_)
      throw std::runtime_error("lstm_cell_step: shape mismatch");
    StepCache cache;
    step(x_t, h_prev, c_prev, cache);
    h_t = cache.h;
    c_t = cache.c;
  }

  double forward(const Matrix& x, bool training = false, Rng* rng = nullptr) {
    cache_ = {};
    cache_.x = x;
    return run_forward(x, training, rng, cache_);
  }

  double predict(const Matrix& x) const {
    Cache local;
    local.x = x;
    return run_forward(x, false, nullptr, local);
  }

  // grad_logit = dL/da at the output logit. Accumulates parameter gradients;
  // optionally returns dL/dx for embedding retraining.
  void backward(double grad_logit, Matrix* grad_x = nullptr) {
    const Cache& c = cache_;
    const std::size_t T = c.x.size();
    if (T == 0) throw std::runtime_error("backward before forward");
    if (grad_x) grad_x->assign(T, std::vector<double>(d_, 0.0));

    // output layer
    grads_[off_ch()] += grad_logit;
    std::vector<double> dh(m_, 0.0), dc(m_, 0.0);
    for (int m = 0; m < m_; ++m) {
      const double feat = c.out_features[m];  // post-relu, post-dropout/rescale
      grads_[off_wh() + m] += grad_logit * feat;
      double dfeat = grad_logit * params_[off_wh() + m] * c.feature_scale[m];
      // relu
      dh[m] = c.steps[T - 1].h[m] > 0.0 ? dfeat : 0.0;
    }

    for (std::size_t t = T; t-- > 0;) {
      const StepCache& s = c.steps[t];
      const std::vector<double>& h_prev = t == 0 ? c.zeros : c.steps[t - 1].h;
      const std::vector<double>& c_prev = t == 0 ? c.zeros : c.steps[t - 1].c;
      std::vector<double> dh_prev(m_, 0.0), dc_prev(m_, 0.0);
      for (int m = 0; m < m_; ++m) {
        const double tanh_c = std::tanh(s.c[m]);
        const double do_ = dh[m] * tanh_c;
        double dcm = dc[m] + dh[m] * s.o[m] * (1.0 - tanh_c * tanh_c);
        const double df = dcm * c_prev[m];
        const double di = dcm * s.ctilde[m];
        const double dctilde = dcm * s.i[m];
        dc_prev[m] = dcm * s.f[m];
        // pre-activation grads
        const double da_i = di * s.i[m] * (1.0 - s.i[m]);
        const double da_f = df * s.f[m] * (1.0 - s.f[m]);
        const double da_o = do_ * s.o[m] * (1.0 - s.o[m]);
        const double da_c = dctilde * (1.0 - s.ctilde[m] * s.ctilde[m]);
        const double da[4] = {da_i, da_f, da_o, da_c};
        for (int g = 0; g < 4; ++g) {
          for (int j = 0; j < d_; ++j) {
            grads_[off_u(g) + static_cast<std::size_t>(m) * d_ + j] += da[g] * c.x[t][j];
            if (grad_x) (*grad_x)[t][j] += da[g] * params_[off_u(g) + static_cast<std::size_t>(m) * d_ + j];
          }
          grads_[off_w(g) + m] += da[g] * h_prev[m];
          grads_[off_b(g) + m] += da[g];
          dh_prev[m] += da[g] * params_[off_w(g) + m];
        }
      }
      dh = std::move(dh_prev);
      dc = std::move(dc_prev);
    }
  }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

  enum Gate { kI = 0, kF = 1, kO = 2, kC = 3 };
  std::size_t off_u(int g) const { return static_cast<std::size_t>(g) * m_ * d_; }
  std::size_t off_w(int g) const { return static_cast<std::size_t>(4) * m_ * d_ + static_cast<std::size_t>(g) * m_; }
  std::size_t off_b(int g) const { return static_cast<std::size_t>(4) * m_ * d_ + 4 * m_ + static_cast<std::size_t>(g) * m_; }
  std::size_t off_wh() const { return static_cast<std::size_t>(4) * m_ * d_ + 8 * m_; }
  std::size_t off_ch() const { return off_wh() + m_; }

 private:
  struct StepCache {
    std::vector<double> i, f, o, ctilde, c, h;
  };
  struct Cache {
    Matrix x;
    std::vector<StepCache> steps;
    std::vector<double> zeros;
    std::vector<double> out_features;   // relu(h_T) after dropout mask / rescale
    std::vector<double> feature_scale;  // mask value (train) or 1-p (inference)
  };

  void step(const std::vector<double>& x_t, const std::vector<double>& h_prev,
            const std::vector<double>& c_prev, StepCache& s) const {
    s.i.resize(m_);
    s.f.resize(m_);
    s.o.resize(m_);
    s.ctilde.resize(m_);
    s.c.resize(m_);
    s.h.resize(m_);
    for (int m = 0; m < m_; ++m) {
      double a[4];
      for (int g = 0; g < 4; ++g) {
        double acc = params_[off_b(g) + m] + params_[off_w(g) + m] * h_prev[m];
        const double* u = params_.data() + off_u(g) + static_cast<std::size_t>(m) * d_;
        for (int j = 0; j < d_; ++j) acc += u[j] * x_t[j];
        a[g] = acc;
      }
      s.i[m] = sigmoid(a[kI]);
      s.f[m] = sigmoid(a[kF]);
      s.o[m] = sigmoid(a[kO]);
      s.ctilde[m] = std::tanh(a[kC]);
      s.c[m] = c_prev[m] * s.f[m] + s.ctilde[m] * s.i[m];
      s.h[m] = std::tanh(s.c[m]) * s.o[m];
    }
  }

  double run_forward(const Matrix& x, bool training, Rng* rng, Cache& cache) const {
    if (x.empty()) throw std::runtime_error("lstm_forward: empty sequence");
    for (const auto& row : x)
      if (static_cast<int>(row.size()) != d_)
        throw std::runtime_error("lstm_forward: input dimension mismatch");
    cache.zeros.assign(m_, 0.0);
    cache.steps.resize(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
      const auto& h_prev = t == 0 ? cache.zeros : cache.steps[t - 1].h;
      const auto& c_prev = t == 0 ? cache.zeros : cache.steps[t - 1].c;
      step(x[t], h_prev, c_prev, cache.steps[t]);
    }
    cache.out_features.resize(m_);
    cache.feature_scale.resize(m_);
    double logit = params_[off_ch()];
    for (int m = 0; m < m_; ++m) {
      double feat = std::max(cache.steps.back().h[m], 0.0);
      double scale = 1.0;
      if (dropout_ > 0.0) {
        if (training) {
          if (!rng) throw std::runtime_error("training forward with dropout needs an rng");
          scale = rng->uniform() < dropout_ ? 0.0 : 1.0;
        } else {
          scale = 1.0 - dropout_;
        }
      }
      cache.feature_scale[m] = scale;
      cache.out_features[m] = feat * scale;
      logit += params_[off_wh() + m] * cache.out_features[m];
    }
    return sigmoid(logit);
  }

  int d_, m_;
  double dropout_;
  std::vector<double> params_, grads_;
  Cache cache_;
};

}  // namespace normlens
