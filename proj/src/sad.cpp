#include "cough/sad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace cough {
namespace {

int frame_length_samples(const AudioClip& clip, double frame_len_ms) {
  if (frame_len_ms <= 0.0)
    throw std::invalid_argument("sad: frame length must be positive");
  const int len =
      static_cast<int>(std::lround(frame_len_ms * clip.sample_rate_hz / 1000.0));
  return std::max(len, 1);
}

}  // namespace

std::vector<double> frame_rms(const AudioClip& clip, double frame_len_ms) {
  if (clip.samples.empty()) throw std::invalid_argument("sad: empty clip");
  const int flen = frame_length_samples(clip, frame_len_ms);
  std::vector<double> out;
  for (std::size_t start = 0; start < clip.samples.size();
       start += static_cast<std::size_t>(flen)) {
    const std::size_t end =
        std::min(start + static_cast<std::size_t>(flen), clip.samples.size());
    double sq = 0.0;
    for (std::size_t i = start; i < end; ++i)
      sq += static_cast<double>(clip.samples[i]) * clip.samples[i];
    out.push_back(std::sqrt(sq / static_cast<double>(end - start)));
  }
  return out;
}

std::vector<double> spectral_flux(const AudioClip& clip, double frame_len_ms) {
  if (clip.samples.empty()) throw std::invalid_argument("sad: empty clip");
  const int flen = frame_length_samples(clip, frame_len_ms);
  const std::size_t n_frames =
      (clip.samples.size() + static_cast<std::size_t>(flen) - 1) /
      static_cast<std::size_t>(flen);
  if (n_frames < 2)
    throw std::invalid_argument("sad: clip shorter than two frames");

  Eigen::FFT<double> fft;
  const int bins = flen / 2 + 1;
  std::vector<double> prev(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> cur(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> frame(static_cast<std::size_t>(flen));
  std::vector<std::complex<double>> spec;
  std::vector<double> flux;
  flux.reserve(n_frames);

  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * static_cast<std::size_t>(flen);
    for (int i = 0; i < flen; ++i) {
      const std::size_t idx = start + static_cast<std::size_t>(i);
      frame[static_cast<std::size_t>(i)] =
          idx < clip.samples.size() ? clip.samples[idx] : 0.0;
    }
    fft.fwd(spec, frame);
    for (int k = 0; k < bins; ++k)
      cur[static_cast<std::size_t>(k)] = std::abs(spec[static_cast<std::size_t>(k)]);
    if (f == 0) {
      flux.push_back(0.0);
    } else {
      double sum = 0.0;
      for (int k = 0; k < bins; ++k) {
        const double d = std::max(0.0, cur[static_cast<std::size_t>(k)] -
                                           prev[static_cast<std::size_t>(k)]);
        sum += d * d;
      }
      flux.push_back(std::sqrt(sum));
    }
    std::swap(prev, cur);
  }
  return flux;
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("minmax_normalize: empty input");
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double mn = *mn_it, mx = *mx_it;
  std::vector<double> out(values.size());
  if (mx == mn) return out;  // degenerate range maps to all zeros
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = (values[i] - mn) / (mx - mn);
  return out;
}

SadResult apply_sad(const AudioClip& clip, const SadConfig& config) {
  if (clip.samples.empty()) throw std::invalid_argument("sad: empty clip");
  if (config.threshold < 0.0 || config.threshold > 1.0)
    throw std::invalid_argument("sad: threshold outside [0, 1]");

  const std::vector<double> activity =
      config.method == SadMethod::rms
          ? frame_rms(clip, config.frame_len_ms)
          : spectral_flux(clip, config.frame_len_ms);
  const std::vector<double> norm = minmax_normalize(activity);
  const int flen = frame_length_samples(clip, config.frame_len_ms);

  SadResult result;
  result.clip.sample_rate_hz = clip.sample_rate_hz;
  auto append_frame = [&](std::size_t f) {
    const std::size_t start = f * static_cast<std::size_t>(flen);
    const std::size_t end =
        std::min(start + static_cast<std::size_t>(flen), clip.samples.size());
    result.clip.samples.insert(result.clip.samples.end(),
                               clip.samples.begin() + static_cast<long>(start),
                               clip.samples.begin() + static_cast<long>(end));
  };

  for (std::size_t f = 0; f < norm.size(); ++f)
    if (norm[f] >= config.threshold) append_frame(f);

  if (result.clip.samples.empty()) {
    // No frame cleared the threshold; keep the single most active frame so
    // downstream patching never sees empty audio.
    const std::size_t best = static_cast<std::size_t>(
        std::max_element(activity.begin(), activity.end()) - activity.begin());
    append_frame(best);
    result.degenerate = true;
  }
  return result;
}

SadMethod sad_method_from_string(const std::string& name) {
  if (name == "rms") return SadMethod::rms;
  if (name == "flux" || name == "spectral_flux") return SadMethod::spectral_flux;
  throw std::invalid_argument("unknown SAD method: " + name);
}

std::string to_string(SadMethod method) {
  return method == SadMethod::rms ? "rms" : "spectral_flux";
}

}  // namespace cough
