#include "cough/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace cough {
namespace {

struct Band {
  double lo_hz;
  double hi_hz;
};

constexpr Band kNegativeBand{300.0, 800.0};
constexpr Band kPositiveBand{1500.0, 3000.0};

// White noise shaped to the band by zeroing FFT bins outside it.
std::vector<float> band_noise(int len, int rate, Band band, double amplitude,
                              std::mt19937& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> noise(static_cast<std::size_t>(len));
  for (auto& v : noise) v = unit(rng);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, noise);
  const double bin_hz = static_cast<double>(rate) / len;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = std::min(static_cast<double>(k),
                              static_cast<double>(len) - k) *
                     bin_hz;
    if (f < band.lo_hz || f > band.hi_hz) spec[k] = 0.0;
  }
  std::vector<double> shaped;
  fft.inv(shaped, spec);

  double peak = 1e-12;
  for (double v : shaped) peak = std::max(peak, std::abs(v));
  const int fade = std::min(len / 4, rate / 100);  // 10 ms fade in/out
  std::vector<float> out(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) {
    double env = 1.0;
    if (i < fade) env = static_cast<double>(i) / fade;
    if (len - 1 - i < fade) env = std::min(env, static_cast<double>(len - 1 - i) / fade);
    out[static_cast<std::size_t>(i)] =
        static_cast<float>(shaped[static_cast<std::size_t>(i)] / peak *
                           amplitude * env);
  }
  return out;
}

AudioClip make_clip(Label label, const SynthConfig& config, std::mt19937& rng) {
  std::uniform_real_distribution<double> dur_dist(config.min_duration_s,
                                                  config.max_duration_s);
  std::uniform_int_distribution<int> burst_count_dist(2, 6);
  std::uniform_real_distribution<double> burst_len_dist(0.15, 0.4);
  std::uniform_real_distribution<double> amp_dist(0.4, 0.7);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);

  AudioClip clip;
  clip.sample_rate_hz = config.sample_rate_hz;
  const int total =
      static_cast<int>(std::lround(dur_dist(rng) * config.sample_rate_hz));
  clip.samples.assign(static_cast<std::size_t>(total), 0.0f);

  const Band band = label == Label::negative ? kNegativeBand : kPositiveBand;
  const int n_bursts = burst_count_dist(rng);
  const int slot = total / n_bursts;
  for (int b = 0; b < n_bursts; ++b) {
    int len = static_cast<int>(
        std::lround(burst_len_dist(rng) * config.sample_rate_hz));
    len = std::min(len, slot);
    len -= len % 64;  // highly composite FFT length keeps shaping fast
    if (len < config.sample_rate_hz / 50) continue;  // skip sub-20ms slots
    const int offset =
        slot * b + static_cast<int>(jitter(rng) * (slot - len));
    const auto burst = band_noise(len, config.sample_rate_hz, band,
                                  amp_dist(rng), rng);
    std::copy(burst.begin(), burst.end(),
              clip.samples.begin() + offset);
  }
  return clip;
}

}  // namespace

SynthCorpus make_synthetic_corpus(const SynthConfig& config) {
  if (config.n_per_class <= 0)
    throw std::invalid_argument("synth: n_per_class must be positive");
  std::mt19937 rng(config.seed);
  SynthCorpus corpus;

  // Round-robin fold counters per (label, gender) stratum.
  int stratum_counter[2][2] = {{0, 0}, {0, 0}};
  for (Label label : {Label::negative, Label::positive}) {
    for (int i = 0; i < config.n_per_class; ++i) {
      SampleRecord rec;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s_%03d",
                    label == Label::negative ? "neg" : "pos", i);
      rec.id = buf;
      rec.label = label;
      rec.gender = (i % 2 == 0) ? Gender::female : Gender::male;
      int& counter = stratum_counter[static_cast<int>(label)]
                                    [static_cast<int>(rec.gender)];
      rec.fold = counter % config.k_folds;
      ++counter;
      corpus.records.push_back(std::move(rec));
      corpus.clips.push_back(make_clip(label, config, rng));
    }
  }
  return corpus;
}

std::vector<SampleRecord> write_synthetic_corpus(
    const std::filesystem::path& out_dir, const SynthConfig& config) {
  std::filesystem::create_directories(out_dir / "audio");
  SynthCorpus corpus = make_synthetic_corpus(config);
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    auto& rec = corpus.records[i];
    rec.path = out_dir / "audio" / (rec.id + ".wav");
    save_wav(rec.path, corpus.clips[i]);
  }
  save_manifest(out_dir / "manifest.csv", corpus.records);
  return corpus.records;
}

}  // namespace cough
