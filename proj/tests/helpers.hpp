#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "cough/audio.hpp"
#include "cough/nn/tensor.hpp"

namespace test {

inline cough::AudioClip sine_clip(double freq_hz, double duration_s, int rate,
                                  double amplitude = 1.0) {
  cough::AudioClip clip;
  clip.sample_rate_hz = rate;
  const auto n = static_cast<std::size_t>(std::lround(duration_s * rate));
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    clip.samples[i] = static_cast<float>(
        amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * i / rate));
  return clip;
}

// Largest power-of-two prefix, so the oracle FFTs below never hit a
// slow (large prime) transform size.
inline std::size_t pow2_prefix(std::size_t n) {
  std::size_t p = 1;
  while (p * 2 <= n) p *= 2;
  return p;
}

// Index of the largest-magnitude FFT bin (one-sided), computed over the
// power-of-two prefix of the signal.
inline int dominant_bin(const std::vector<float>& samples) {
  const std::size_t n = pow2_prefix(samples.size());
  Eigen::FFT<double> fft;
  std::vector<double> x(samples.begin(), samples.begin() + static_cast<long>(n));
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);
  int best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    if (std::abs(spec[k]) > best_mag) {
      best_mag = std::abs(spec[k]);
      best = static_cast<int>(k);
    }
  }
  return best;
}

inline double dominant_freq_hz(const std::vector<float>& samples, int rate) {
  const std::size_t n = pow2_prefix(samples.size());
  return dominant_bin(samples) * static_cast<double>(rate) /
         static_cast<double>(n);
}

inline double spectral_centroid_hz(const std::vector<float>& samples, int rate) {
  const std::size_t n = pow2_prefix(samples.size());
  Eigen::FFT<double> fft;
  std::vector<double> x(samples.begin(), samples.begin() + static_cast<long>(n));
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);
  double num = 0.0, den = 0.0;
  const double bin_hz = static_cast<double>(rate) / static_cast<double>(n);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double m = std::abs(spec[k]);
    num += m * k * bin_hz;
    den += m;
  }
  return den > 0.0 ? num / den : 0.0;
}

// Central finite-difference gradient check. `forward` must rerun the whole
// computation (layers cache activations) and return the scalar loss;
// `analytic` is the gradient to verify for the tensor being perturbed.
// Returns a norm-based relative error.
inline double finite_diff_error(cough::nn::Tensor<double>& t,
                                const std::function<double()>& forward,
                                const Eigen::VectorXd& analytic,
                                double eps = 1e-5) {
  Eigen::VectorXd fd(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double saved = t.values[i];
    t.values[i] = saved + eps;
    const double up = forward();
    t.values[i] = saved - eps;
    const double down = forward();
    t.values[i] = saved;
    fd[i] = (up - down) / (2.0 * eps);
  }
  const double denom = std::max({analytic.norm(), fd.norm(), 1e-8});
  return (analytic - fd).norm() / denom;
}

inline void fill_random(cough::nn::Tensor<double>& t, std::mt19937& rng,
                        double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.values[i] = dist(rng);
}

}  // namespace test
