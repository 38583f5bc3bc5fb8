#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cough/audio.hpp"
#include "cough/dataset.hpp"

namespace cough {

// Two acoustically separable classes of burst noise: negatives band-limited
// to 300-800 Hz, positives to 1.5-3 kHz. Burst counts, silences and
// durations (1-8 s) are randomized; genders are balanced and folds assigned
// stratified by (label, gender).
struct SynthConfig {
  int n_per_class = 50;
  std::uint32_t seed = 0;
  int sample_rate_hz = 44100;
  int k_folds = 5;
  double min_duration_s = 1.0;
  double max_duration_s = 8.0;
};

struct SynthCorpus {
  std::vector<SampleRecord> records;
  std::vector<AudioClip> clips;  // parallel to records
};

SynthCorpus make_synthetic_corpus(const SynthConfig& config);

// Writes WAVs plus manifest.csv under out_dir; returns the records with
// paths filled in.
std::vector<SampleRecord> write_synthetic_corpus(
    const std::filesystem::path& out_dir, const SynthConfig& config);

}  // namespace cough
