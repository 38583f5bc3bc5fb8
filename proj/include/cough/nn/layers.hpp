#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "cough/nn/tensor.hpp"

namespace cough::nn {

template <typename Scalar>
void kaiming_uniform(Tensor<Scalar>& t, int fan_in, std::mt19937& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t.values[i] = static_cast<Scalar>(dist(rng));
}

// 3x3 convolution, stride 1, zero padding 1 (same-size output), computed
// as im2col + GEMM per image.
template <typename Scalar>
class Conv2d3x3 {
 public:
  Conv2d3x3(int in_ch, int out_ch, bool compute_input_grad = true)
      : in_ch_(in_ch),
        out_ch_(out_ch),
        compute_input_grad_(compute_input_grad),
        weight_({out_ch, in_ch, 3, 3}, true),
        bias_({out_ch}, true) {}

  void init(std::mt19937& rng) {
    kaiming_uniform(weight_, in_ch_ * 9, rng);
    bias_.values.setZero();
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    if (x.shape.size() != 4 || x.dim(1) != in_ch_)
      throw std::invalid_argument("conv2d: shape mismatch");
    input_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    Tensor<Scalar> y({n, out_ch_, h, w});
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    const Eigen::Index k = static_cast<Eigen::Index>(in_ch_) * 9;
    Mat<Scalar> cols(hw, k);
    auto wmap = weight_.as_matrix(out_ch_, k);
    for (int i = 0; i < n; ++i) {
      im2col(x.values.data() + i * in_ch_ * hw, h, w, cols);
      Eigen::Map<Mat<Scalar>> ymap(y.values.data() + i * out_ch_ * hw, hw,
                                   out_ch_);
      ymap.noalias() = cols * wmap.transpose();
      ymap.rowwise() += bias_.values.transpose();
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    const Eigen::Index k = static_cast<Eigen::Index>(in_ch_) * 9;
    Tensor<Scalar> dx;
    if (compute_input_grad_) dx = Tensor<Scalar>(input_.shape);
    Mat<Scalar> cols(hw, k);
    Mat<Scalar> dcols(hw, k);
    auto wmap = weight_.as_matrix(out_ch_, k);
    auto gw = weight_.grad_as_matrix(out_ch_, k);
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const Mat<Scalar>> dymap(dy.values.data() + i * out_ch_ * hw,
                                          hw, out_ch_);
      im2col(input_.values.data() + i * in_ch_ * hw, h, w, cols);
      gw.noalias() += dymap.transpose() * cols;
      bias_.grad += dymap.colwise().sum().transpose();
      if (compute_input_grad_) {
        dcols.noalias() = dymap * wmap;
        col2im(dcols, h, w, dx.values.data() + i * in_ch_ * hw);
      }
    }
    return dx;
  }

  Tensor<Scalar>& weight() { return weight_; }
  Tensor<Scalar>& bias() { return bias_; }

  std::vector<NamedParam<Scalar>> params(const std::string& prefix) {
    return {{prefix + ".weight", &weight_}, {prefix + ".bias", &bias_}};
  }

 private:
  // cols(hw, in_ch*9): column c*9 + ky*3 + kx holds the input plane c
  // shifted by (ky-1, kx-1), zero outside the image.
  void im2col(const Scalar* x, int h, int w, Mat<Scalar>& cols) const {
    for (int c = 0; c < in_ch_; ++c) {
      const Scalar* plane = x + static_cast<Eigen::Index>(c) * h * w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          Scalar* col = cols.col(c * 9 + ky * 3 + kx).data();
          const int dy = ky - 1, dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
          for (int y = 0; y < h; ++y) {
            Scalar* dst = col + static_cast<Eigen::Index>(y) * w;
            const int sy = y + dy;
            if (sy < 0 || sy >= h) {
              std::fill(dst, dst + w, Scalar(0));
              continue;
            }
            const Scalar* src = plane + static_cast<Eigen::Index>(sy) * w + dx;
            if (x0 > 0) dst[0] = Scalar(0);
            std::copy(src + x0, src + x1, dst + x0);
            if (x1 < w) dst[w - 1] = Scalar(0);
          }
        }
      }
    }
  }

  void col2im(const Mat<Scalar>& dcols, int h, int w, Scalar* dx) const {
    for (int c = 0; c < in_ch_; ++c) {
      Scalar* plane = dx + static_cast<Eigen::Index>(c) * h * w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const Scalar* col = dcols.col(c * 9 + ky * 3 + kx).data();
          const int dy = ky - 1, dx_off = kx - 1;
          const int x0 = std::max(0, -dx_off), x1 = w - std::max(0, dx_off);
          for (int y = 0; y < h; ++y) {
            const int sy = y + dy;
            if (sy < 0 || sy >= h) continue;
            const Scalar* src = col + static_cast<Eigen::Index>(y) * w;
            Scalar* dst = plane + static_cast<Eigen::Index>(sy) * w + dx_off;
            for (int x = x0; x < x1; ++x) dst[x] += src[x];
          }
        }
      }
    }
  }

  int in_ch_;
  int out_ch_;
  bool compute_input_grad_;
  Tensor<Scalar> weight_;  // [F, C, 3, 3]
  Tensor<Scalar> bias_;    // [F]
  Tensor<Scalar> input_;
};

// Per-channel batch normalization over [N, C, H, W]. Uses batch statistics
// in training mode (batch of 1 rejected) and running statistics in eval
// mode; running variance is updated with the unbiased estimate.
template <typename Scalar>
class BatchNorm2d {
 public:
  explicit BatchNorm2d(int channels, Scalar momentum = Scalar(0.1),
                       Scalar eps = Scalar(1e-5))
      : channels_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma_({channels}, true),
        beta_({channels}, true) {
    gamma_.values.setOnes();
    running_mean_ = Vec<Scalar>::Zero(channels);
    running_var_ = Vec<Scalar>::Ones(channels);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) {
    if (x.shape.size() != 4 || x.dim(1) != channels_)
      throw std::invalid_argument("batchnorm2d: shape mismatch");
    if (training && x.dim(0) < 2)
      throw std::invalid_argument("batchnorm2d: batch of 1 in training mode");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    const Eigen::Index m = static_cast<Eigen::Index>(n) * hw;
    training_ = training;
    xhat_ = Tensor<Scalar>(x.shape);
    inv_std_.resize(channels_);
    Tensor<Scalar> y(x.shape);
    for (int c = 0; c < channels_; ++c) {
      Scalar mean, var;
      if (training) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
          const Scalar* p = plane(x, i, c, hw);
          for (Eigen::Index j = 0; j < hw; ++j) {
            sum += p[j];
            sq += static_cast<double>(p[j]) * p[j];
          }
        }
        mean = static_cast<Scalar>(sum / m);
        var = static_cast<Scalar>(sq / m - (sum / m) * (sum / m));
        var = std::max(var, Scalar(0));
        running_mean_[c] = (1 - momentum_) * running_mean_[c] + momentum_ * mean;
        const Scalar var_unbiased =
            m > 1 ? var * static_cast<Scalar>(m) / static_cast<Scalar>(m - 1)
                  : var;
        running_var_[c] = (1 - momentum_) * running_var_[c] + momentum_ * var_unbiased;
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const Scalar inv_std = Scalar(1) / std::sqrt(var + eps_);
      inv_std_[c] = inv_std;
      for (int i = 0; i < n; ++i) {
        const Scalar* p = plane(x, i, c, hw);
        Scalar* xh = plane(xhat_, i, c, hw);
        Scalar* out = plane(y, i, c, hw);
        for (Eigen::Index j = 0; j < hw; ++j) {
          xh[j] = (p[j] - mean) * inv_std;
          out[j] = gamma_.values[c] * xh[j] + beta_.values[c];
        }
      }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const int n = xhat_.dim(0), h = xhat_.dim(2), w = xhat_.dim(3);
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    const Eigen::Index m = static_cast<Eigen::Index>(n) * hw;
    Tensor<Scalar> dx(xhat_.shape);
    for (int c = 0; c < channels_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int i = 0; i < n; ++i) {
        const Scalar* g = plane(dy, i, c, hw);
        const Scalar* xh = plane(xhat_, i, c, hw);
        for (Eigen::Index j = 0; j < hw; ++j) {
          sum_dy += g[j];
          sum_dy_xhat += static_cast<double>(g[j]) * xh[j];
        }
      }
      gamma_.grad[c] += static_cast<Scalar>(sum_dy_xhat);
      beta_.grad[c] += static_cast<Scalar>(sum_dy);
      const Scalar scale = gamma_.values[c] * inv_std_[c];
      if (training_) {
        const Scalar mean_dy = static_cast<Scalar>(sum_dy / m);
        const Scalar mean_dy_xhat = static_cast<Scalar>(sum_dy_xhat / m);
        for (int i = 0; i < n; ++i) {
          const Scalar* g = plane(dy, i, c, hw);
          const Scalar* xh = plane(xhat_, i, c, hw);
          Scalar* out = plane(dx, i, c, hw);
          for (Eigen::Index j = 0; j < hw; ++j)
            out[j] = scale * (g[j] - mean_dy - xh[j] * mean_dy_xhat);
        }
      } else {
        for (int i = 0; i < n; ++i) {
          const Scalar* g = plane(dy, i, c, hw);
          Scalar* out = plane(dx, i, c, hw);
          for (Eigen::Index j = 0; j < hw; ++j) out[j] = scale * g[j];
        }
      }
    }
    return dx;
  }

  Tensor<Scalar>& gamma() { return gamma_; }
  Tensor<Scalar>& beta() { return beta_; }
  Vec<Scalar>& running_mean() { return running_mean_; }
  Vec<Scalar>& running_var() { return running_var_; }

  std::vector<NamedParam<Scalar>> params(const std::string& prefix) {
    return {{prefix + ".gamma", &gamma_}, {prefix + ".beta", &beta_}};
  }
  std::vector<NamedBuffer<Scalar>> buffers(const std::string& prefix) {
    return {{prefix + ".running_mean", &running_mean_},
            {prefix + ".running_var", &running_var_}};
  }

 private:
  template <typename T>
  static auto* plane(T& t, int i, int c, Eigen::Index hw) {
    return t.values.data() + (static_cast<Eigen::Index>(i) * t.dim(1) + c) * hw;
  }

  int channels_;
  Scalar momentum_;
  Scalar eps_;
  Tensor<Scalar> gamma_;
  Tensor<Scalar> beta_;
  Vec<Scalar> running_mean_;
  Vec<Scalar> running_var_;
  Tensor<Scalar> xhat_;
  std::vector<Scalar> inv_std_;
  bool training_ = true;
};

template <typename Scalar>
class ReLU {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    Tensor<Scalar> y(x.shape);
    y.values = x.values.cwiseMax(Scalar(0));
    output_ = y;
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    Tensor<Scalar> dx(output_.shape);
    dx.values = (output_.values.array() > Scalar(0))
                    .select(dy.values, Vec<Scalar>::Zero(dy.size()));
    return dx;
  }

 private:
  Tensor<Scalar> output_;
};

// 2x2 max pooling with stride 2. Odd trailing rows/columns are treated as
// padded with -inf. Gradient routes to the first maximum in row-major
// window order.
template <typename Scalar>
class MaxPool2 {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int ho = (h + 1) / 2, wo = (w + 1) / 2;
    in_shape_ = x.shape;
    Tensor<Scalar> y({n, c, ho, wo});
    argmax_.resize(y.size());
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    Eigen::Index o = 0;
    for (int i = 0; i < n * c; ++i) {
      const Scalar* p = x.values.data() + i * hw;
      for (int yo = 0; yo < ho; ++yo) {
        for (int xo = 0; xo < wo; ++xo, ++o) {
          Scalar best{};
          Eigen::Index best_idx = -1;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int yi = yo * 2 + dy, xi = xo * 2 + dx;
              if (yi >= h || xi >= w) continue;
              const Eigen::Index idx = static_cast<Eigen::Index>(yi) * w + xi;
              if (best_idx < 0 || p[idx] > best) {
                best = p[idx];
                best_idx = idx;
              }
            }
          }
          y.values[o] = best;
          argmax_[o] = i * hw + best_idx;
        }
      }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    Tensor<Scalar> dx(in_shape_);
    for (Eigen::Index o = 0; o < dy.size(); ++o)
      dx.values[argmax_[o]] += dy.values[o];
    return dx;
  }

 private:
  std::vector<int> in_shape_;
  std::vector<Eigen::Index> argmax_;
};

// Adaptive average pooling to a fixed 2x2 output grid. Cell (i, j) averages
// rows [floor(i*H/2), floor((i+1)*H/2)) and the analogous column range.
template <typename Scalar>
class AdaptiveAvgPool2x2 {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h < 2 || w < 2)
      throw std::invalid_argument("adaptive_avgpool: input smaller than 2x2");
    in_shape_ = x.shape;
    Tensor<Scalar> y({n, c, 2, 2});
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    Eigen::Index o = 0;
    for (int i = 0; i < n * c; ++i) {
      const Scalar* p = x.values.data() + i * hw;
      for (int yo = 0; yo < 2; ++yo) {
        const int y0 = yo * h / 2, y1 = (yo + 1) * h / 2;
        for (int xo = 0; xo < 2; ++xo, ++o) {
          const int x0 = xo * w / 2, x1 = (xo + 1) * w / 2;
          double sum = 0.0;
          for (int yy = y0; yy < y1; ++yy)
            for (int xx = x0; xx < x1; ++xx)
              sum += p[static_cast<Eigen::Index>(yy) * w + xx];
          y.values[o] =
              static_cast<Scalar>(sum / ((y1 - y0) * (x1 - x0)));
        }
      }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const int h = in_shape_[2], w = in_shape_[3];
    Tensor<Scalar> dx(in_shape_);
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    Eigen::Index o = 0;
    for (int i = 0; i < in_shape_[0] * in_shape_[1]; ++i) {
      Scalar* p = dx.values.data() + i * hw;
      for (int yo = 0; yo < 2; ++yo) {
        const int y0 = yo * h / 2, y1 = (yo + 1) * h / 2;
        for (int xo = 0; xo < 2; ++xo, ++o) {
          const int x0 = xo * w / 2, x1 = (xo + 1) * w / 2;
          const Scalar g = dy.values[o] / ((y1 - y0) * (x1 - x0));
          for (int yy = y0; yy < y1; ++yy)
            for (int xx = x0; xx < x1; ++xx)
              p[static_cast<Eigen::Index>(yy) * w + xx] += g;
        }
      }
    }
    return dx;
  }

 private:
  std::vector<int> in_shape_;
};

template <typename Scalar>
class Linear {
 public:
  Linear(int in_dim, int out_dim)
      : in_dim_(in_dim),
        out_dim_(out_dim),
        weight_({in_dim, out_dim}, true),
        bias_({out_dim}, true) {}

  void init(std::mt19937& rng) {
    kaiming_uniform(weight_, in_dim_, rng);
    bias_.values.setZero();
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    if (x.shape.size() != 2 || x.dim(1) != in_dim_)
      throw std::invalid_argument("linear: shape mismatch");
    input_ = x;
    const int n = x.dim(0);
    Tensor<Scalar> y({n, out_dim_});
    auto ymap = y.as_matrix(n, out_dim_);
    ymap.noalias() = x.as_matrix(n, in_dim_) * weight_.as_matrix(in_dim_, out_dim_);
    ymap.rowwise() += bias_.values.transpose();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const int n = input_.dim(0);
    auto dymap = dy.as_matrix(n, out_dim_);
    weight_.grad_as_matrix(in_dim_, out_dim_).noalias() +=
        input_.as_matrix(n, in_dim_).transpose() * dymap;
    bias_.grad += dymap.colwise().sum().transpose();
    Tensor<Scalar> dx({n, in_dim_});
    dx.as_matrix(n, in_dim_).noalias() =
        dymap * weight_.as_matrix(in_dim_, out_dim_).transpose();
    return dx;
  }

  Tensor<Scalar>& weight() { return weight_; }
  Tensor<Scalar>& bias() { return bias_; }

  std::vector<NamedParam<Scalar>> params(const std::string& prefix) {
    return {{prefix + ".weight", &weight_}, {prefix + ".bias", &bias_}};
  }

 private:
  int in_dim_;
  int out_dim_;
  Tensor<Scalar> weight_;  // [D, K]
  Tensor<Scalar> bias_;    // [K]
  Tensor<Scalar> input_;
};

// Row-wise softmax with max subtraction.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor<Scalar> probs({n, k});
  auto in = logits.as_matrix(n, k);
  auto out = probs.as_matrix(n, k);
  for (int i = 0; i < n; ++i) {
    const Scalar mx = in.row(i).maxCoeff();
    out.row(i) = (in.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return probs;
}

// Fused softmax + categorical cross-entropy, mean over the batch.
template <typename Scalar>
class SoftmaxCrossEntropy {
 public:
  Scalar forward(const Tensor<Scalar>& logits, const std::vector<int>& labels) {
    if (static_cast<int>(labels.size()) != logits.dim(0))
      throw std::invalid_argument("cross_entropy: label count mismatch");
    probs_ = softmax(logits);
    labels_ = labels;
    const int n = logits.dim(0), k = logits.dim(1);
    auto p = probs_.as_matrix(n, k);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      if (labels[i] < 0 || labels[i] >= k)
        throw std::invalid_argument("cross_entropy: label out of range");
      loss -= std::log(std::max(static_cast<double>(p(i, labels[i])), 1e-300));
    }
    return static_cast<Scalar>(loss / n);
  }

  Tensor<Scalar> backward() const {
    const int n = probs_.dim(0), k = probs_.dim(1);
    Tensor<Scalar> dlogits = probs_;
    auto d = dlogits.as_matrix(n, k);
    for (int i = 0; i < n; ++i) d(i, labels_[i]) -= Scalar(1);
    d /= static_cast<Scalar>(n);
    return dlogits;
  }

  const Tensor<Scalar>& probs() const { return probs_; }

 private:
  Tensor<Scalar> probs_;
  std::vector<int> labels_;
};

}  // namespace cough::nn
