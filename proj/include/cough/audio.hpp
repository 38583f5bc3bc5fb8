#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cough {

// Mono audio buffer with amplitudes in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = 0;

  double duration_s() const {
    return sample_rate_hz > 0
               ? static_cast<double>(samples.size()) / sample_rate_hz
               : 0.0;
  }
};

class AudioError : public std::runtime_error {
 public:
  enum class Kind { missing_file, malformed_header, unsupported_codec };

  AudioError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Decodes a RIFF/WAVE file. PCM 8/16/24-bit integer and 32-bit IEEE float
// are supported; multi-channel input is averaged down to mono.
AudioClip load_wav(const std::filesystem::path& path);

// Writes a mono clip as 16-bit PCM.
void save_wav(const std::filesystem::path& path, const AudioClip& clip);

// Windowed-sinc (Kaiser) resampler. Returns the clip unchanged when it is
// already at the target rate.
AudioClip resample(const AudioClip& clip, int target_rate_hz);

}  // namespace cough
