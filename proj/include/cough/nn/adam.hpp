#pragma once

#include <cmath>
#include <vector>

#include "cough/nn/tensor.hpp"

namespace cough::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed set of parameter tensors.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Tensor<Scalar>*> params, AdamConfig config = {})
      : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto* p : params_) {
      m_.push_back(Vec<Scalar>::Zero(p->size()));
      v_.push_back(Vec<Scalar>::Zero(p->size()));
    }
  }

  void step() {
    ++step_count_;
    const Scalar b1 = static_cast<Scalar>(config_.beta1);
    const Scalar b2 = static_cast<Scalar>(config_.beta2);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(config_.beta1, step_count_));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(config_.beta2, step_count_));
    const Scalar lr = static_cast<Scalar>(config_.lr);
    const Scalar eps = static_cast<Scalar>(config_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      m_[i] = b1 * m_[i] + (1 - b1) * p.grad;
      v_[i] = b2 * v_[i] + (1 - b2) * p.grad.cwiseProduct(p.grad);
      p.values.array() -=
          lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  long step_count() const { return step_count_; }

 private:
  std::vector<Tensor<Scalar>*> params_;
  AdamConfig config_;
  std::vector<Vec<Scalar>> m_;
  std::vector<Vec<Scalar>> v_;
  long step_count_ = 0;
};

}  // namespace cough::nn
