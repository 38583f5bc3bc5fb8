#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cough/nn/layers.hpp"
#include "cough/nn/tensor.hpp"

namespace cough {

// How the attention weights are applied to the positions.
//   scale: h~_t = alpha_t * h_t, output keeps the [T, d] layout.
//   sum:   h~   = sum_t alpha_t * h_t, output is a single d-vector.
enum class AttentionMode { scale, sum };

// Contextual attention over T positions of dimension d:
//   u_t = tanh(W h_t + b), alpha = softmax_t(u_t . u_c), h~ per mode above.
template <typename Scalar>
class ContextualAttention {
 public:
  ContextualAttention(int dim, AttentionMode mode = AttentionMode::scale)
      : dim_(dim),
        mode_(mode),
        w_({dim, dim}, true),
        b_({dim}, true),
        context_({dim}, true) {}

  void init(std::mt19937& rng) {
    nn::kaiming_uniform(w_, dim_, rng);
    b_.values.setZero();
    // Context vector drawn uniform in [-1/sqrt(d), 1/sqrt(d)].
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim_));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < context_.size(); ++i)
      context_.values[i] = static_cast<Scalar>(dist(rng));
  }

  // h: [N, T, d]. Returns [N, T, d] (scale) or [N, d] (sum).
  nn::Tensor<Scalar> forward(const nn::Tensor<Scalar>& h) {
    if (h.shape.size() != 3 || h.dim(2) != dim_)
      throw std::invalid_argument("attention: shape mismatch");
    const int n = h.dim(0), t = h.dim(1);
    input_ = h;
    u_ = nn::Tensor<Scalar>({n, t, dim_});
    alpha_ = nn::Tensor<Scalar>({n, t});
    nn::Tensor<Scalar> out(mode_ == AttentionMode::scale
                               ? std::vector<int>{n, t, dim_}
                               : std::vector<int>{n, dim_});
    auto wmap = w_.as_matrix(dim_, dim_);
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const nn::RowMat<Scalar>> hm(h.values.data() + i * t * dim_, t, dim_);
      Eigen::Map<nn::RowMat<Scalar>> um(u_.values.data() + i * t * dim_, t, dim_);
      um.noalias() = hm * wmap.transpose();
      um.rowwise() += b_.values.transpose();
      um = um.array().tanh();
      nn::Vec<Scalar> scores = um * context_.values;
      const Scalar mx = scores.maxCoeff();
      nn::Vec<Scalar> a = (scores.array() - mx).exp();
      a /= a.sum();
      alpha_.values.segment(i * t, t) = a;
      if (mode_ == AttentionMode::scale) {
        Eigen::Map<nn::RowMat<Scalar>> om(out.values.data() + i * t * dim_, t, dim_);
        om = a.asDiagonal() * hm;
      } else {
        out.values.segment(i * dim_, dim_) = hm.transpose() * a;
      }
    }
    return out;
  }

  nn::Tensor<Scalar> backward(const nn::Tensor<Scalar>& dy) {
    const int n = input_.dim(0), t = input_.dim(1);
    nn::Tensor<Scalar> dh(input_.shape);
    auto wmap = w_.as_matrix(dim_, dim_);
    auto gw = w_.grad_as_matrix(dim_, dim_);
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const nn::RowMat<Scalar>> hm(input_.values.data() + i * t * dim_, t, dim_);
      Eigen::Map<const nn::RowMat<Scalar>> um(u_.values.data() + i * t * dim_, t, dim_);
      Eigen::Map<nn::RowMat<Scalar>> dhm(dh.values.data() + i * t * dim_, t, dim_);
      auto a = alpha_.values.segment(i * t, t);
      nn::Vec<Scalar> dalpha(t);
      if (mode_ == AttentionMode::scale) {
        Eigen::Map<const nn::RowMat<Scalar>> dym(dy.values.data() + i * t * dim_, t, dim_);
        dalpha = (dym.array() * hm.array()).rowwise().sum().matrix();
        dhm = a.asDiagonal() * dym;
      } else {
        auto dyv = dy.values.segment(i * dim_, dim_);
        dalpha.noalias() = hm * dyv;
        dhm = a * dyv.transpose();
      }
      // softmax backward
      const Scalar dot = a.dot(dalpha);
      nn::Vec<Scalar> ds = a.cwiseProduct((dalpha.array() - dot).matrix());
      // scores s_t = u_t . u_c
      context_.grad.noalias() += um.transpose() * ds;
      nn::RowMat<Scalar> dz = ds * context_.values.transpose();  // [t, d]
      dz.array() *= (Scalar(1) - um.array().square());
      gw.noalias() += dz.transpose() * hm;
      b_.grad += dz.colwise().sum().transpose();
      dhm.noalias() += dz * wmap;
    }
    return dh;
  }

  const nn::Tensor<Scalar>& alpha() const { return alpha_; }
  AttentionMode mode() const { return mode_; }
  int dim() const { return dim_; }

  nn::Tensor<Scalar>& w() { return w_; }
  nn::Tensor<Scalar>& b() { return b_; }
  nn::Tensor<Scalar>& context() { return context_; }

  std::vector<nn::NamedParam<Scalar>> params(const std::string& prefix) {
    return {{prefix + ".w", &w_},
            {prefix + ".b", &b_},
            {prefix + ".context", &context_}};
  }

 private:
  int dim_;
  AttentionMode mode_;
  nn::Tensor<Scalar> w_;        // [d, d]
  nn::Tensor<Scalar> b_;        // [d]
  nn::Tensor<Scalar> context_;  // [d]
  nn::Tensor<Scalar> input_;
  nn::Tensor<Scalar> u_;
  nn::Tensor<Scalar> alpha_;
};

}  // namespace cough
