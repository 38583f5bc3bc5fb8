#include "cough/spectro.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace cough {
namespace {

// Mirror an out-of-range index into [0, n-1] without repeating the edge
// sample (reflect padding).
std::size_t reflect_index(long long i, long long n) {
  if (n == 1) return 0;
  const long long period = 2 * (n - 1);
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= n) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

Spectrogram stft(const AudioClip& clip, const SpectroConfig& config) {
  if (clip.samples.empty()) throw std::invalid_argument("stft: empty clip");
  if (config.win_len_samples <= 0 || config.hop_samples <= 0 ||
      config.hop_samples > config.win_len_samples)
    throw std::invalid_argument("stft: invalid window/hop");

  const int win = config.win_len_samples;
  const int hop = config.hop_samples;
  const int pad = win / 2;
  const auto len = static_cast<long long>(clip.samples.size());
  const int n_frames = static_cast<int>(len / hop) + 1;
  const int bins = win / 2 + 1;

  std::vector<double> window(static_cast<std::size_t>(win));
  for (int i = 0; i < win; ++i)
    window[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / win));

  Spectrogram spec;
  spec.magnitudes.resize(bins, n_frames);
  spec.bin_hz = static_cast<double>(clip.sample_rate_hz) / win;
  spec.frame_hop_s = static_cast<double>(hop) / clip.sample_rate_hz;

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(win));
  std::vector<std::complex<double>> out;
  for (int t = 0; t < n_frames; ++t) {
    const long long start = static_cast<long long>(t) * hop - pad;
    for (int i = 0; i < win; ++i)
      frame[static_cast<std::size_t>(i)] =
          clip.samples[reflect_index(start + i, len)] *
          window[static_cast<std::size_t>(i)];
    fft.fwd(out, frame);
    for (int k = 0; k < bins; ++k)
      spec.magnitudes(k, t) =
          static_cast<float>(std::abs(out[static_cast<std::size_t>(k)]));
  }
  return spec;
}

ImageRgb render_image(const Spectrogram& spec, const SpectroConfig& config) {
  if (spec.bins() == 0 || spec.frames() == 0)
    throw std::invalid_argument("render_image: empty spectrogram");
  const int px = config.image_px;
  if (px <= 1) throw std::invalid_argument("render_image: image_px too small");

  const float max_mag = spec.magnitudes.maxCoeff();
  const int bins = spec.bins();
  const int frames = spec.frames();
  const double f_max = spec.bin_hz * (bins - 1);
  const double f_min = spec.bin_hz;  // bin 1; DC is excluded from the log axis

  // Normalized intensity per (bin, frame): dB relative to the per-image
  // maximum, clamped at db_floor, scaled to [0, 1].
  auto intensity = [&](int bin, int frame) {
    if (max_mag <= 0.0f) return 0.0;
    const double mag = spec.magnitudes(bin, frame);
    double db = mag > 0.0 ? 20.0 * std::log10(mag / max_mag)
                          : config.db_floor;
    db = std::max(db, config.db_floor);
    return 1.0 - db / config.db_floor;
  };

  std::vector<int> row_bin(static_cast<std::size_t>(px));
  for (int r = 0; r < px; ++r) {
    const double e = static_cast<double>(px - 1 - r) / (px - 1);  // row 0 on top
    double f;
    int lo;
    if (config.freq_scale == FreqScale::log) {
      f = f_min * std::pow(f_max / f_min, e);
      lo = 1;
    } else {
      f = e * f_max;
      lo = 0;
    }
    row_bin[static_cast<std::size_t>(r)] = std::clamp(
        static_cast<int>(std::lround(f / spec.bin_hz)), lo, bins - 1);
  }

  ImageRgb image(px, px);
  const auto& lut = colormap_lut(config.colormap);
  for (int c = 0; c < px; ++c) {
    const int frame =
        frames == 1 ? 0
                    : static_cast<int>(std::lround(
                          static_cast<double>(c) * (frames - 1) / (px - 1)));
    for (int r = 0; r < px; ++r) {
      const double t = intensity(row_bin[static_cast<std::size_t>(r)], frame);
      image.set(c, r, lut[static_cast<std::size_t>(std::lround(t * 255.0))]);
    }
  }
  return image;
}

int patch_count(std::size_t len, int rate, const SpectroConfig& config) {
  const auto plen = static_cast<std::size_t>(
      std::lround(config.patch_len_s * rate));
  if (len <= plen) return 1;
  const auto phop = static_cast<std::size_t>(std::max<long>(
      1, std::lround(config.patch_len_s * (1.0 - config.patch_overlap) * rate)));
  return static_cast<int>((len - plen) / phop) + 1;
}

std::vector<Patch> make_patches(const AudioClip& clip, const SpectroConfig& config,
                                const std::string& source_id) {
  if (clip.samples.empty()) throw std::invalid_argument("make_patches: empty clip");
  const auto plen = static_cast<std::size_t>(
      std::lround(config.patch_len_s * clip.sample_rate_hz));
  const auto phop = static_cast<std::size_t>(std::max<long>(
      1, std::lround(config.patch_len_s * (1.0 - config.patch_overlap) *
                     clip.sample_rate_hz)));

  std::vector<Patch> patches;
  const int count = patch_count(clip.samples.size(), clip.sample_rate_hz, config);
  patches.reserve(static_cast<std::size_t>(count));
  for (int p = 0; p < count; ++p) {
    const std::size_t start = static_cast<std::size_t>(p) * phop;
    AudioClip segment;
    segment.sample_rate_hz = clip.sample_rate_hz;
    segment.samples.assign(plen, 0.0f);  // short clips zero-pad to one patch
    const std::size_t avail =
        start < clip.samples.size()
            ? std::min(plen, clip.samples.size() - start)
            : 0;
    std::copy_n(clip.samples.begin() + static_cast<long>(start), avail,
                segment.samples.begin());
    Patch patch;
    patch.source_id = source_id;
    patch.start_s = static_cast<double>(start) / clip.sample_rate_hz;
    patch.image = render_image(stft(segment, config), config);
    patches.push_back(std::move(patch));
  }
  return patches;
}

FreqScale freq_scale_from_string(const std::string& name) {
  if (name == "linear") return FreqScale::linear;
  if (name == "log") return FreqScale::log;
  throw std::invalid_argument("unknown frequency scale: " + name);
}

std::string to_string(FreqScale scale) {
  return scale == FreqScale::linear ? "linear" : "log";
}

}  // namespace cough
