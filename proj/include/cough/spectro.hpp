#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cough/audio.hpp"
#include "cough/image.hpp"

namespace cough {

enum class FreqScale { linear, log };

struct SpectroConfig {
  int win_len_samples = 1024;
  int hop_samples = 128;
  FreqScale freq_scale = FreqScale::log;
  Colormap colormap = Colormap::magma;
  int image_px = 256;
  double patch_len_s = 1.0;
  double patch_overlap = 0.5;
  double db_floor = -80.0;
};

// STFT magnitudes, [freq_bins x frames] with freq_bins = win/2 + 1.
struct Spectrogram {
  Eigen::MatrixXf magnitudes;
  double bin_hz = 0.0;
  double frame_hop_s = 0.0;

  int bins() const { return static_cast<int>(magnitudes.rows()); }
  int frames() const { return static_cast<int>(magnitudes.cols()); }
};

struct Patch {
  ImageRgb image;
  std::string source_id;
  double start_s = 0.0;
};

// Hann-windowed, centered STFT (reflect padding of win/2 on both ends).
// Frame count is floor(len / hop) + 1.
Spectrogram stft(const AudioClip& clip, const SpectroConfig& config);

// dB relative to the per-image maximum, clamped at db_floor, mapped through
// the colormap onto an image_px x image_px raster. Row 0 is the highest
// frequency. The log axis starts at the bin-1 frequency (DC excluded).
ImageRgb render_image(const Spectrogram& spec, const SpectroConfig& config);

// Cuts the clip into patch_len_s segments with the configured overlap and
// renders each independently. Clips shorter than one patch are zero-padded
// and yield a single patch.
std::vector<Patch> make_patches(const AudioClip& clip, const SpectroConfig& config,
                                const std::string& source_id = {});

// Closed-form patch count for a clip of `len` samples at `rate` Hz.
int patch_count(std::size_t len, int rate, const SpectroConfig& config);

FreqScale freq_scale_from_string(const std::string& name);
std::string to_string(FreqScale scale);

}  // namespace cough
