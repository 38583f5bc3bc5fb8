#include "cough/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <vector>

namespace cough {
namespace {

constexpr double kKaiserBeta = 8.0;
// Half-width of the sinc kernel in zero crossings of the (cutoff-scaled)
// sinc, i.e. 64 taps at the decimated rate. The kernel length in input
// samples grows with the decimation ratio so the transition band stays
// narrow enough to keep the sub-Nyquist band intact.
constexpr int kSincZeroCrossings = 32;

std::uint32_t read_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (p[1] << 8) | (p[2] << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double hx = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (hx / k) * (hx / k);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw AudioError(AudioError::Kind::missing_file,
                     "cannot open file: " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw AudioError(AudioError::Kind::malformed_header,
                     "not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const char* tag = reinterpret_cast<const char*>(buf.data() + pos);
    const std::uint32_t len = read_le32(buf.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > buf.size())
      throw AudioError(AudioError::Kind::malformed_header,
                       "truncated chunk in " + path.string());
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (len < 16)
        throw AudioError(AudioError::Kind::malformed_header,
                         "short fmt chunk in " + path.string());
      format = read_le16(buf.data() + body);
      channels = read_le16(buf.data() + body + 2);
      rate = read_le32(buf.data() + body + 4);
      bits = read_le16(buf.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data = buf.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr)
    throw AudioError(AudioError::Kind::malformed_header,
                     "missing fmt or data chunk in " + path.string());
  if (channels == 0 || rate == 0)
    throw AudioError(AudioError::Kind::malformed_header,
                     "invalid fmt fields in " + path.string());

  const bool pcm = format == 1;
  const bool ieee = format == 3;
  if (!(pcm && (bits == 8 || bits == 16 || bits == 24)) && !(ieee && bits == 32))
    throw AudioError(AudioError::Kind::unsupported_codec,
                     "unsupported codec (format " + std::to_string(format) +
                         ", " + std::to_string(bits) + " bit) in " +
                         path.string());

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_size = bytes_per_sample * channels;
  const std::size_t frames = frame_size > 0 ? data_len / frame_size : 0;
  if (frames == 0)
    throw AudioError(AudioError::Kind::malformed_header,
                     "empty data chunk in " + path.string());

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_size + c * bytes_per_sample;
      double v = 0.0;
      if (pcm && bits == 8) {
        v = (static_cast<int>(p[0]) - 128) / 128.0;
      } else if (pcm && bits == 16) {
        v = static_cast<std::int16_t>(p[0] | (p[1] << 8)) / 32768.0;
      } else if (pcm && bits == 24) {
        std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
        if (s & 0x800000) s |= ~0xffffff;  // sign extend
        v = s / 8388608.0;
      } else {  // 32-bit float
        float fv;
        std::memcpy(&fv, p, 4);
        v = std::clamp(static_cast<double>(fv), -1.0, 1.0);
      }
      acc += v;
    }
    clip.samples[f] = static_cast<float>(acc / channels);
  }
  return clip;
}

void save_wav(const std::filesystem::path& path, const AudioClip& clip) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw AudioError(AudioError::Kind::missing_file,
                            "cannot write file: " + path.string());
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  auto put16 = [&os](std::uint16_t v) {
    os.put(static_cast<char>(v & 0xff));
    os.put(static_cast<char>(v >> 8));
  };
  auto put32 = [&os](std::uint32_t v) {
    os.put(static_cast<char>(v & 0xff));
    os.put(static_cast<char>((v >> 8) & 0xff));
    os.put(static_cast<char>((v >> 16) & 0xff));
    os.put(static_cast<char>(v >> 24));
  };
  os.write("RIFF", 4);
  put32(36 + data_len);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put32(16);
  put16(1);  // PCM
  put16(1);  // mono
  put32(static_cast<std::uint32_t>(clip.sample_rate_hz));
  put32(static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  put16(2);
  put16(16);
  os.write("data", 4);
  put32(data_len);
  for (float s : clip.samples) {
    const double v = std::clamp(static_cast<double>(s), -1.0, 1.0);
    const int q = static_cast<int>(std::lround(v * 32767.0));
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
}

AudioClip resample(const AudioClip& clip, int target_rate_hz) {
  if (target_rate_hz <= 0)
    throw std::invalid_argument("resample: target rate must be positive");
  if (clip.sample_rate_hz == target_rate_hz) return clip;

  const double ratio = static_cast<double>(target_rate_hz) / clip.sample_rate_hz;
  // Cutoff as a fraction of the input Nyquist; 0.95 of the lower Nyquist.
  const double cutoff = 0.95 * std::min(1.0, ratio);
  const double half_width = kSincZeroCrossings / cutoff;  // input samples
  const int half_taps = static_cast<int>(std::ceil(half_width));
  const double i0_beta = bessel_i0(kKaiserBeta);

  const std::size_t out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(clip.samples.size()) * ratio));
  AudioClip out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.resize(out_len);

  auto kernel = [&](double dt) {
    if (std::abs(dt) > half_width) return 0.0;
    const double window_arg = dt / half_width;
    const double kaiser =
        bessel_i0(kKaiserBeta * std::sqrt(1.0 - window_arg * window_arg)) /
        i0_beta;
    return cutoff * sinc(cutoff * dt) * kaiser;
  };

  // Output sample n sits at input position n * M / L with M/L in lowest
  // terms, so the fractional part cycles through at most L phases. For a
  // modest phase count the per-phase tap vectors are precomputed.
  const long long g = std::gcd(static_cast<long long>(clip.sample_rate_hz),
                               static_cast<long long>(target_rate_hz));
  const long long step_m = clip.sample_rate_hz / g;  // input step per L outputs
  const long long phases = target_rate_hz / g;
  const int n_taps = 2 * half_taps + 2;
  const auto n_in = static_cast<long long>(clip.samples.size());

  if (phases <= 1024) {
    std::vector<std::vector<double>> taps(static_cast<std::size_t>(phases));
    for (long long ph = 0; ph < phases; ++ph) {
      auto& row = taps[static_cast<std::size_t>(ph)];
      row.resize(static_cast<std::size_t>(n_taps));
      const double frac = static_cast<double>(ph) / phases;
      for (int j = 0; j < n_taps; ++j)
        row[static_cast<std::size_t>(j)] = kernel(j - half_taps - frac);
    }
    for (std::size_t n = 0; n < out_len; ++n) {
      const long long num = static_cast<long long>(n) * step_m;
      const long long center = num / phases;
      const auto& row = taps[static_cast<std::size_t>(num % phases)];
      double acc = 0.0;
      for (int j = 0; j < n_taps; ++j) {
        const long long i = center - half_taps + j;
        if (i < 0 || i >= n_in) continue;
        acc += clip.samples[static_cast<std::size_t>(i)] * row[j];
      }
      out.samples[n] = static_cast<float>(acc);
    }
  } else {
    for (std::size_t n = 0; n < out_len; ++n) {
      const double t = static_cast<double>(n) / ratio;
      const long long center = static_cast<long long>(std::floor(t));
      double acc = 0.0;
      for (long long i = center - half_taps; i <= center + half_taps + 1; ++i) {
        if (i < 0 || i >= n_in) continue;
        acc += clip.samples[static_cast<std::size_t>(i)] *
               kernel(static_cast<double>(i) - t);
      }
      out.samples[n] = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace cough
