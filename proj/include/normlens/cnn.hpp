#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "normlens/embeddings.hpp"
#include "normlens/lstm.hpp"  // Matrix
#include "normlens/rng.hpp"

namespace normlens {

inline int conv_output_length(int input_len, int kernel_width) {
  return input_len - kernel_width + 1;
}

struct CnnSpec {
  int input_dim = 0;
  int input_len = 0;
  std::vector<int> layer1_widths = {4, 5};  // one branch per width
  int kernels1 = 50;                        // per branch; 100 total over {4,5}
  int width2 = 3;
  int kernels2 = 50;
  int width3 = 2;
  int kernels3 = 50;
  int fc_units = 100;
  double dropout = 0.0;
};

// Three conv+relu+maxpool stages (window 2, stride 2) per kernel-width branch,
// concatenated into a relu fully connected layer and a logistic output.
// Dropout acts on the concatenated last max-pool features during training;
// at inference the features are rescaled by 1-p.
class CnnModel {
 public:
  explicit CnnModel(CnnSpec spec) : spec_(std::move(spec)) {
    if (spec_.dropout < 0.0 || spec_.dropout >= 1.0)
      throw std::runtime_error("dropout must be in [0,1)");
    build_layout();
    params_.assign(n_params_, 0.0);
    grads_.assign(n_params_, 0.0);
  }

  const CnnSpec& spec() const { return spec_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }
  std::size_t param_count() const { return n_params_; }
  int feature_count() const { return n_features_; }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec_.input_dim));
    for (auto& p : params_) p = rng.uniform(-bound, bound);
  }

  double forward(const Matrix& x, bool training = false, Rng* rng = nullptr) {
    cache_ = {};
    return run_forward(x, training, rng, cache_);
  }

  double predict(const Matrix& x) const {
    Cache local;
    return run_forward(x, false, nullptr, local);
  }

  void backward(double grad_logit, Matrix* grad_x = nullptr) {
    const Cache& c = cache_;
    if (c.features.empty()) throw std::runtime_error("backward before forward");

    // output layer
    grads_[out_b_] += grad_logit;
    std::vector<double> dfc(spec_.fc_units, 0.0);
    for (int u = 0; u < spec_.fc_units; ++u) {
      grads_[out_w_ + u] += grad_logit * c.fc_out[u];
      dfc[u] = c.fc_out[u] > 0.0 ? grad_logit * params_[out_w_ + u] : 0.0;
    }
    // fully connected layer
    std::vector<double> dfeat(n_features_, 0.0);
    for (int u = 0; u < spec_.fc_units; ++u) {
      grads_[fc_b_ + u] += dfc[u];
      for (int j = 0; j < n_features_; ++j) {
        grads_[fc_w_ + static_cast<std::size_t>(u) * n_features_ + j] += dfc[u] * c.features[j];
        dfeat[j] += dfc[u] * params_[fc_w_ + static_cast<std::size_t>(u) * n_features_ + j];
      }
    }
    for (int j = 0; j < n_features_; ++j) dfeat[j] *= c.feature_scale[j];

    if (grad_x)
      grad_x->assign(spec_.input_len, std::vector<double>(spec_.input_dim, 0.0));

    int feat_off = 0;
    for (std::size_t br = 0; br < branches_.size(); ++br) {
      const Branch& branch = branches_[br];
      const BranchCache& bc = c.branches[br];
      // unflatten into last pooled map gradient
      std::vector<std::vector<double>> dpool3(spec_.kernels3,
                                              std::vector<double>(branch.pool_len[2], 0.0));
      for (int k = 0; k < spec_.kernels3; ++k)
        for (int p = 0; p < branch.pool_len[2]; ++p)
          dpool3[k][p] = dfeat[feat_off + k * branch.pool_len[2] + p];
      feat_off += spec_.kernels3 * branch.pool_len[2];

      auto dconv3 = pool_backward(dpool3, bc.argmax[2], branch.conv_len[2]);
      auto dpool2 = conv_backward(dconv3, bc.pooled[1], bc.conv[2], branch.w_off[2],
                                  branch.b_off[2], spec_.width3, spec_.kernels2);
      auto dconv2 = pool_backward(dpool2, bc.argmax[1], branch.conv_len[1]);
      auto dpool1 = conv_backward(dconv2, bc.pooled[0], bc.conv[1], branch.w_off[1],
                                  branch.b_off[1], spec_.width2, spec_.kernels1);
      auto dconv1 = pool_backward(dpool1, bc.argmax[0], branch.conv_len[0]);
      auto dinput = conv_backward(dconv1, bc.input, bc.conv[0], branch.w_off[0],
                                  branch.b_off[0], branch.width1, spec_.input_dim);
      if (grad_x)
        for (int ch = 0; ch < spec_.input_dim; ++ch)
          for (int p = 0; p < spec_.input_len; ++p) (*grad_x)[p][ch] += dinput[ch][p];
    }
  }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

 private:
  using Map = std::vector<std::vector<double>>;  // channel x position

  struct Branch {
    int width1 = 0;
    int conv_len[3] = {0, 0, 0};
    int pool_len[3] = {0, 0, 0};
    std::size_t w_off[3] = {0, 0, 0};
    std::size_t b_off[3] = {0, 0, 0};
  };
  struct BranchCache {
    Map input;                 // d x t (transposed input)
    Map conv[3];               // post-relu maps
    Map pooled[3];
    std::vector<std::vector<int>> argmax[3];
  };
  struct Cache {
    std::vector<BranchCache> branches;
    std::vector<double> features;       // post-dropout/rescale
    std::vector<double> feature_scale;  // mask (train) or 1-p (inference)
    std::vector<double> fc_out;
  };

  void build_layout() {
    if (spec_.input_dim <= 0 || spec_.input_len <= 0)
      throw std::runtime_error("cnn: input dimensions must be positive");
    std::size_t off = 0;
    n_features_ = 0;
    for (int w1 : spec_.layer1_widths) {
      Branch b;
      b.width1 = w1;
      const int widths[3] = {w1, spec_.width2, spec_.width3};
      const int kernels[3] = {spec_.kernels1, spec_.kernels2, spec_.kernels3};
      const int in_ch[3] = {spec_.input_dim, spec_.kernels1, spec_.kernels2};
      int len = spec_.input_len;
      for (int layer = 0; layer < 3; ++layer) {
        b.conv_len[layer] = conv_output_length(len, widths[layer]);
        if (b.conv_len[layer] < 1)
          throw std::runtime_error("cnn: sequence shorter than receptive field");
        // window 2, stride 2; a trailing odd element forms its own window
        b.pool_len[layer] = (b.conv_len[layer] + 1) / 2;
        b.w_off[layer] = off;
        off += static_cast<std::size_t>(kernels[layer]) * widths[layer] * in_ch[layer];
        b.b_off[layer] = off;
        off += kernels[layer];
        len = b.pool_len[layer];
      }
      n_features_ += spec_.kernels3 * b.pool_len[2];
      branches_.push_back(b);
    }
    fc_w_ = off;
    off += static_cast<std::size_t>(spec_.fc_units) * n_features_;
    fc_b_ = off;
    off += spec_.fc_units;
    out_w_ = off;
    off += spec_.fc_units;
    out_b_ = off;
    n_params_ = off + 1;
  }

  Map conv_forward(const Map& in, std::size_t w_off, std::size_t b_off, int width,
                   int kernels, int out_len, const std::vector<double>& p) const {
    const int in_ch = static_cast<int>(in.size());
    Map out(kernels, std::vector<double>(out_len, 0.0));
    for (int k = 0; k < kernels; ++k) {
      const double* kw = p.data() + w_off + static_cast<std::size_t>(k) * width * in_ch;
      for (int pos = 0; pos < out_len; ++pos) {
        double acc = p[b_off + k];
        for (int c = 0; c < in_ch; ++c)
          for (int w = 0; w < width; ++w) acc += kw[static_cast<std::size_t>(c) * width + w] * in[c][pos + w];
        out[k][pos] = std::max(acc, 0.0);
      }
    }
    return out;
  }

  // dL/d(input map) given dL/d(post-relu output map); accumulates kernel grads
  Map conv_backward(const Map& dout, const Map& in, const Map& out, std::size_t w_off,
                    std::size_t b_off, int width, int in_ch) {
    const int kernels = static_cast<int>(dout.size());
    const int out_len = static_cast<int>(dout[0].size());
    Map din(in_ch, std::vector<double>(in[0].size(), 0.0));
    for (int k = 0; k < kernels; ++k) {
      double* kw_grad = grads_.data() + w_off + static_cast<std::size_t>(k) * width * in_ch;
      const double* kw = params_.data() + w_off + static_cast<std::size_t>(k) * width * in_ch;
      for (int pos = 0; pos < out_len; ++pos) {
        if (out[k][pos] <= 0.0) continue;  // relu gate
        const double g = dout[k][pos];
        if (g == 0.0) continue;
        grads_[b_off + k] += g;
        for (int c = 0; c < in_ch; ++c)
          for (int w = 0; w < width; ++w) {
            kw_grad[static_cast<std::size_t>(c) * width + w] += g * in[c][pos + w];
            din[c][pos + w] += g * kw[static_cast<std::size_t>(c) * width + w];
          }
      }
    }
    return din;
  }

  static Map pool_forward(const Map& in, int out_len, std::vector<std::vector<int>>& argmax) {
    Map out(in.size(), std::vector<double>(out_len, 0.0));
    argmax.assign(in.size(), std::vector<int>(out_len, 0));
    const int in_len = static_cast<int>(in[0].size());
    for (std::size_t k = 0; k < in.size(); ++k)
      for (int j = 0; j < out_len; ++j) {
        const int a = 2 * j, b = 2 * j + 1;
        if (b >= in_len || in[k][a] >= in[k][b]) {
          out[k][j] = in[k][a];
          argmax[k][j] = a;
        } else {
          out[k][j] = in[k][b];
          argmax[k][j] = b;
        }
      }
    return out;
  }

  static Map pool_backward(const Map& dout, const std::vector<std::vector<int>>& argmax,
                           int in_len) {
    Map din(dout.size(), std::vector<double>(in_len, 0.0));
    for (std::size_t k = 0; k < dout.size(); ++k)
      for (std::size_t j = 0; j < dout[k].size(); ++j) din[k][argmax[k][j]] += dout[k][j];
    return din;
  }

  double run_forward(const Matrix& x, bool training, Rng* rng, Cache& cache) const {
    if (static_cast<int>(x.size()) != spec_.input_len)
      throw std::runtime_error("cnn_forward: input length mismatch");
    cache.branches.resize(branches_.size());
    cache.features.assign(n_features_, 0.0);
    cache.feature_scale.assign(n_features_, 1.0);

    int feat_off = 0;
    for (std::size_t br = 0; br < branches_.size(); ++br) {
      const Branch& branch = branches_[br];
      BranchCache& bc = cache.branches[br];
      bc.input.assign(spec_.input_dim, std::vector<double>(spec_.input_len, 0.0));
      for (int p = 0; p < spec_.input_len; ++p) {
        if (static_cast<int>(x[p].size()) != spec_.input_dim)
          throw std::runtime_error("cnn_forward: input dimension mismatch");
        for (int c = 0; c < spec_.input_dim; ++c) bc.input[c][p] = x[p][c];
      }
      const int widths[3] = {branch.width1, spec_.width2, spec_.width3};
      const int kernels[3] = {spec_.kernels1, spec_.kernels2, spec_.kernels3};
      const Map* in = &bc.input;
      for (int layer = 0; layer < 3; ++layer) {
        bc.conv[layer] = conv_forward(*in, branch.w_off[layer], branch.b_off[layer],
                                      widths[layer], kernels[layer], branch.conv_len[layer],
                                      params_);
        bc.pooled[layer] = pool_forward(bc.conv[layer], branch.pool_len[layer], bc.argmax[layer]);
        in = &bc.pooled[layer];
      }
      for (int k = 0; k < spec_.kernels3; ++k)
        for (int p = 0; p < branch.pool_len[2]; ++p)
          cache.features[feat_off + k * branch.pool_len[2] + p] = bc.pooled[2][k][p];
      feat_off += spec_.kernels3 * branch.pool_len[2];
    }

    if (spec_.dropout > 0.0) {
      for (int j = 0; j < n_features_; ++j) {
        double scale = 1.0;
        if (training) {
          if (!rng) throw std::runtime_error("training forward with dropout needs an rng");
          scale = rng->uniform() < spec_.dropout ? 0.0 : 1.0;
        } else {
          scale = 1.0 - spec_.dropout;
        }
        cache.feature_scale[j] = scale;
        cache.features[j] *= scale;
      }
    }

    cache.fc_out.assign(spec_.fc_units, 0.0);
    double logit = params_[out_b_];
    for (int u = 0; u < spec_.fc_units; ++u) {
      double acc = params_[fc_b_ + u];
      const double* w = params_.data() + fc_w_ + static_cast<std::size_t>(u) * n_features_;
      for (int j = 0; j < n_features_; ++j) acc += w[j] * cache.features[j];
      cache.fc_out[u] = std::max(acc, 0.0);
      logit += params_[out_w_ + u] * cache.fc_out[u];
    }
    return sigmoid(logit);
  }

  CnnSpec spec_;
  std::vector<Branch> branches_;
  int n_features_ = 0;
  std::size_t n_params_ = 0;
  std::size_t fc_w_ = 0, fc_b_ = 0, out_w_ = 0, out_b_ = 0;
  std::vector<double> params_, grads_;
  Cache cache_;
};

}  // namespace normlens
