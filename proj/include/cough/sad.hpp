#pragma once

#include <string>
#include <vector>

#include "cough/audio.hpp"

namespace cough {

enum class SadMethod { rms, spectral_flux };

struct SadConfig {
  double frame_len_ms = 64.0;
  double threshold = 0.1;  // on the min-max normalized activity, in [0, 1]
  SadMethod method = SadMethod::rms;
};

struct SadResult {
  AudioClip clip;
  // Set when no frame cleared the threshold and the single most active
  // frame was kept instead.
  bool degenerate = false;
};

// One RMS value per non-overlapping frame; a trailing partial frame is
// normalized by its own length.
std::vector<double> frame_rms(const AudioClip& clip, double frame_len_ms);

// Half-wave-rectified L2 difference of consecutive magnitude spectra over
// non-overlapping frames. The first frame's flux is 0.
std::vector<double> spectral_flux(const AudioClip& clip, double frame_len_ms);

// Maps min -> 0 and max -> 1; an all-equal input maps to all zeros.
std::vector<double> minmax_normalize(const std::vector<double>& values);

// Concatenates, in time order, the frames whose normalized activity is at
// or above the threshold.
SadResult apply_sad(const AudioClip& clip, const SadConfig& config);

SadMethod sad_method_from_string(const std::string& name);
std::string to_string(SadMethod method);

}  // namespace cough
