// Acceptance suite: one PASS/FAIL line per criterion.
//
// Criteria 5 and 8 run the full cross-validation protocol on the synthetic
// corpus three times (main run, label-shuffled control, same-seed rerun) and
// dominate the runtime. Pass criterion numbers as arguments to run a subset,
// e.g. `acceptance 1 2 3`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cough/attention.hpp"
#include "cough/audio.hpp"
#include "cough/dataset.hpp"
#include "cough/harness.hpp"
#include "cough/metrics.hpp"
#include "cough/model.hpp"
#include "cough/nn/layers.hpp"
#include "cough/sad.hpp"
#include "cough/spectro.hpp"
#include "cough/synth.hpp"
#include "helpers.hpp"

using cough::nn::Tensor;
using nlohmann::json;

namespace {

// Collects failures within one criterion; prints the first few in detail.
struct Check {
  bool ok = true;
  int failures = 0;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (++failures <= 8) std::cout << "    check failed: " << what << '\n';
  }

  void expect_near(double actual, double expected, double tol,
                   const std::string& what) {
    std::ostringstream os;
    os << what << " (actual " << actual << ", expected " << expected
       << ", tol " << tol << ")";
    expect(std::abs(actual - expected) <= tol, os.str());
  }
};

// ---------------------------------------------------------------------------
// Criterion 1: finite-difference gradient checks for every differentiable op.
// Relative error < 1e-4 (batchnorm < 1e-3) on >= 20 random small shapes per
// op, within 60 s.
// ---------------------------------------------------------------------------

constexpr double kGradTol = 1e-4;
constexpr double kBnGradTol = 1e-3;

Tensor<double> random_tensor(const std::vector<int>& shape, std::mt19937& rng,
                             double scale = 1.0) {
  Tensor<double> t(shape);
  test::fill_random(t, rng, scale);
  return t;
}

bool criterion_gradients() {
  Check c;
  std::mt19937 rng(42);
  std::uniform_int_distribution<int> n_dist(1, 3), ch_dist(1, 3), hw_dist(3, 6);
  const auto t0 = std::chrono::steady_clock::now();

  for (int trial = 0; trial < 20; ++trial) {
    const std::string tag = " (trial " + std::to_string(trial) + ")";

    {  // conv2d: weight, bias and input gradients
      const int n = n_dist(rng), ci = ch_dist(rng), co = ch_dist(rng);
      const int h = hw_dist(rng), w = hw_dist(rng);
      cough::nn::Conv2d3x3<double> conv(ci, co);
      conv.init(rng);
      test::fill_random(conv.bias(), rng);
      auto x = random_tensor({n, ci, h, w}, rng);
      auto wv = random_tensor({n, co, h, w}, rng);
      auto fwd = [&] { return conv.forward(x).values.dot(wv.values); };
      conv.weight().zero_grad();
      conv.bias().zero_grad();
      fwd();
      const auto dx = conv.backward(wv);
      c.expect(test::finite_diff_error(conv.weight(), fwd, conv.weight().grad) <
                   kGradTol,
               "conv weight gradient" + tag);
      c.expect(
          test::finite_diff_error(conv.bias(), fwd, conv.bias().grad) < kGradTol,
          "conv bias gradient" + tag);
      c.expect(test::finite_diff_error(x, fwd, dx.values) < kGradTol,
               "conv input gradient" + tag);
    }

    {  // batchnorm (training mode): gamma, beta and input gradients
      const int n = 2 + trial % 3, ch = ch_dist(rng);
      const int h = 2 + trial % 3, w = hw_dist(rng) - 1;
      cough::nn::BatchNorm2d<double> bn(ch);
      test::fill_random(bn.gamma(), rng);
      bn.gamma().values.array() += 1.5;  // keep gamma away from zero
      test::fill_random(bn.beta(), rng);
      auto x = random_tensor({n, ch, h, w}, rng);
      auto wv = random_tensor({n, ch, h, w}, rng);
      // Training-mode output depends only on batch statistics, so the
      // running-stat updates inside repeated forwards do not bias the check.
      auto fwd = [&] { return bn.forward(x, true).values.dot(wv.values); };
      bn.gamma().zero_grad();
      bn.beta().zero_grad();
      fwd();
      const auto dx = bn.backward(wv);
      c.expect(test::finite_diff_error(bn.gamma(), fwd, bn.gamma().grad) <
                   kBnGradTol,
               "batchnorm gamma gradient" + tag);
      c.expect(
          test::finite_diff_error(bn.beta(), fwd, bn.beta().grad) < kBnGradTol,
          "batchnorm beta gradient" + tag);
      c.expect(test::finite_diff_error(x, fwd, dx.values) < kBnGradTol,
               "batchnorm input gradient" + tag);
    }

    {  // max pooling: input gradient (FD needs margins between window values)
      const int n = n_dist(rng), ch = ch_dist(rng);
      const int h = hw_dist(rng), w = hw_dist(rng);
      cough::nn::MaxPool2<double> pool;
      Tensor<double> x({n, ch, h, w});
      std::vector<double> levels(static_cast<std::size_t>(x.size()));
      for (std::size_t i = 0; i < levels.size(); ++i)
        levels[i] = static_cast<double>(i);
      std::shuffle(levels.begin(), levels.end(), rng);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.values[i] = levels[i];
      auto wv = random_tensor({n, ch, (h + 1) / 2, (w + 1) / 2}, rng);
      auto fwd = [&] { return pool.forward(x).values.dot(wv.values); };
      fwd();
      const auto dx = pool.backward(wv);
      c.expect(test::finite_diff_error(x, fwd, dx.values) < kGradTol,
               "maxpool input gradient" + tag);
    }

    {  // adaptive average pooling: input gradient
      const int n = n_dist(rng), ch = ch_dist(rng);
      const int h = 2 + hw_dist(rng), w = 2 + hw_dist(rng);
      cough::nn::AdaptiveAvgPool2x2<double> pool;
      auto x = random_tensor({n, ch, h, w}, rng);
      auto wv = random_tensor({n, ch, 2, 2}, rng);
      auto fwd = [&] { return pool.forward(x).values.dot(wv.values); };
      fwd();
      const auto dx = pool.backward(wv);
      c.expect(test::finite_diff_error(x, fwd, dx.values) < kGradTol,
               "avgpool input gradient" + tag);
    }

    {  // linear: weight, bias and input gradients
      const int n = n_dist(rng), d = 1 + trial % 6, k = 1 + (trial * 3) % 5;
      cough::nn::Linear<double> lin(d, k);
      lin.init(rng);
      test::fill_random(lin.bias(), rng);
      auto x = random_tensor({n, d}, rng);
      auto wv = random_tensor({n, k}, rng);
      auto fwd = [&] { return lin.forward(x).values.dot(wv.values); };
      lin.weight().zero_grad();
      lin.bias().zero_grad();
      fwd();
      const auto dx = lin.backward(wv);
      c.expect(test::finite_diff_error(lin.weight(), fwd, lin.weight().grad) <
                   kGradTol,
               "linear weight gradient" + tag);
      c.expect(
          test::finite_diff_error(lin.bias(), fwd, lin.bias().grad) < kGradTol,
          "linear bias gradient" + tag);
      c.expect(test::finite_diff_error(x, fwd, dx.values) < kGradTol,
               "linear input gradient" + tag);
    }

    {  // contextual attention: all parameters plus input, both modes
      const int n = n_dist(rng), t = 2 + trial % 5, d = 2 + trial % 7;
      const auto mode = trial % 2 == 0 ? cough::AttentionMode::scale
                                       : cough::AttentionMode::sum;
      cough::ContextualAttention<double> attn(d, mode);
      attn.init(rng);
      test::fill_random(attn.w(), rng);
      test::fill_random(attn.b(), rng);
      test::fill_random(attn.context(), rng);
      auto h = random_tensor({n, t, d}, rng);
      Tensor<double> wv(mode == cough::AttentionMode::scale
                            ? std::vector<int>{n, t, d}
                            : std::vector<int>{n, d});
      test::fill_random(wv, rng);
      auto fwd = [&] { return attn.forward(h).values.dot(wv.values); };
      attn.w().zero_grad();
      attn.b().zero_grad();
      attn.context().zero_grad();
      fwd();
      const auto dh = attn.backward(wv);
      c.expect(test::finite_diff_error(attn.w(), fwd, attn.w().grad) < kGradTol,
               "attention W gradient" + tag);
      c.expect(test::finite_diff_error(attn.b(), fwd, attn.b().grad) < kGradTol,
               "attention b gradient" + tag);
      c.expect(test::finite_diff_error(attn.context(), fwd,
                                       attn.context().grad) < kGradTol,
               "attention context gradient" + tag);
      c.expect(test::finite_diff_error(h, fwd, dh.values) < kGradTol,
               "attention input gradient" + tag);
    }

    {  // softmax + cross-entropy: logit gradient
      const int n = n_dist(rng) + 1, k = 2 + trial % 4;
      cough::nn::SoftmaxCrossEntropy<double> ce;
      auto logits = random_tensor({n, k}, rng, 2.0);
      std::vector<int> labels(static_cast<std::size_t>(n));
      std::uniform_int_distribution<int> lab(0, k - 1);
      for (auto& l : labels) l = lab(rng);
      auto fwd = [&] { return static_cast<double>(ce.forward(logits, labels)); };
      fwd();
      const auto dl = ce.backward();
      c.expect(test::finite_diff_error(logits, fwd, dl.values) < kGradTol,
               "softmax+CE logit gradient" + tag);
    }
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  c.expect(elapsed < 60.0,
           "gradient checks finished in " + std::to_string(elapsed) +
               " s (budget 60 s)");
  return c.ok;
}

// ---------------------------------------------------------------------------
// Criterion 2: attention vs an independent scalar-loop evaluation.
// ---------------------------------------------------------------------------

bool criterion_attention_oracle() {
  Check c;
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> d_dist(2, 16), t_dist(2, 8), n_dist(1, 3);
  std::uniform_real_distribution<double> val(-1.5, 1.5);

  for (int trial = 0; trial < 100; ++trial) {
    const int d = d_dist(rng), t_count = t_dist(rng), n = n_dist(rng);
    const auto mode = trial % 2 == 0 ? cough::AttentionMode::scale
                                     : cough::AttentionMode::sum;
    cough::ContextualAttention<double> attn(d, mode);
    attn.init(rng);
    test::fill_random(attn.w(), rng);
    test::fill_random(attn.b(), rng);
    test::fill_random(attn.context(), rng);
    Tensor<double> h({n, t_count, d});
    for (Eigen::Index i = 0; i < h.size(); ++i) h.values[i] = val(rng);
    const auto out = attn.forward(h);

    for (int i = 0; i < n; ++i) {
      // Scalar loops over the paper's three equations.
      std::vector<std::vector<double>> u(static_cast<std::size_t>(t_count),
                                         std::vector<double>(d));
      std::vector<double> score(static_cast<std::size_t>(t_count));
      for (int t = 0; t < t_count; ++t) {
        for (int r = 0; r < d; ++r) {
          double acc = attn.b().values[r];
          for (int cix = 0; cix < d; ++cix)
            acc += attn.w().values[r * d + cix] *
                   h.values[(i * t_count + t) * d + cix];
          u[t][r] = std::tanh(acc);
        }
        double s = 0.0;
        for (int r = 0; r < d; ++r) s += u[t][r] * attn.context().values[r];
        score[t] = s;
      }
      const double mx = *std::max_element(score.begin(), score.end());
      std::vector<double> alpha(static_cast<std::size_t>(t_count));
      double total = 0.0;
      for (int t = 0; t < t_count; ++t) {
        alpha[t] = std::exp(score[t] - mx);
        total += alpha[t];
      }
      double alpha_sum = 0.0;
      for (int t = 0; t < t_count; ++t) {
        alpha[t] /= total;
        const double got = attn.alpha().values[i * t_count + t];
        alpha_sum += got;
        c.expect(std::abs(got - alpha[t]) < 1e-6,
                 "alpha matches oracle (trial " + std::to_string(trial) + ")");
      }
      c.expect(std::abs(alpha_sum - 1.0) < 1e-6,
               "alpha sums to 1 (trial " + std::to_string(trial) + ")");
      for (int t = 0; t < t_count; ++t) {
        for (int j = 0; j < d; ++j) {
          const double want = alpha[t] * h.values[(i * t_count + t) * d + j];
          if (mode == cough::AttentionMode::scale) {
            c.expect(
                std::abs(out.values[(i * t_count + t) * d + j] - want) < 1e-6,
                "scale output matches oracle (trial " + std::to_string(trial) +
                    ")");
          }
        }
      }
      if (mode == cough::AttentionMode::sum) {
        for (int j = 0; j < d; ++j) {
          double want = 0.0;
          for (int t = 0; t < t_count; ++t)
            want += alpha[t] * h.values[(i * t_count + t) * d + j];
          c.expect(std::abs(out.values[i * d + j] - want) < 1e-6,
                   "sum output matches oracle (trial " + std::to_string(trial) +
                       ")");
        }
      }
    }
  }
  return c.ok;
}

// ---------------------------------------------------------------------------
// Criterion 3: AUC vs the O(n^2) Mann-Whitney oracle; sens_spec_at vs an
// exhaustive threshold sweep.
// ---------------------------------------------------------------------------

double mann_whitney(const std::vector<double>& scores,
                    const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

cough::OperatingPoint sweep_sens_spec(const std::vector<double>& scores,
                                      const std::vector<int>& labels,
                                      double target) {
  std::vector<double> thresholds(scores);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  std::size_t pos = 0, neg = 0;
  for (int l : labels) (l == 1 ? pos : neg) += 1;
  cough::OperatingPoint best{std::numeric_limits<double>::infinity(), 0.0, 1.0};
  for (double thr : thresholds) {  // descending: largest qualifying wins
    std::size_t tp = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool predicted = scores[i] >= thr;
      if (labels[i] == 1 && predicted) ++tp;
      if (labels[i] == 0 && !predicted) ++tn;
    }
    const double sens = static_cast<double>(tp) / static_cast<double>(pos);
    if (sens >= target) {
      best = {thr, sens, static_cast<double>(tn) / static_cast<double>(neg)};
      break;
    }
  }
  return best;
}

bool criterion_metric_oracle() {
  Check c;
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> n_dist(4, 60);
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 6);
  std::bernoulli_distribution lab(0.5);

  for (int trial = 0; trial < 200; ++trial) {
    const int n = n_dist(rng);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      // Alternate fine-grained and heavily tied score distributions.
      scores.push_back(trial % 2 == 0 ? coarse(rng) / 6.0 : fine(rng));
      labels.push_back(lab(rng) ? 1 : 0);
    }
    labels[0] = 1;  // both classes always present
    labels[1] = 0;

    const auto got = cough::auc(scores, labels);
    c.expect(got.has_value(), "auc defined (trial " + std::to_string(trial) + ")");
    if (got.has_value())
      c.expect(std::abs(*got - mann_whitney(scores, labels)) < 1e-9,
               "auc matches Mann-Whitney oracle (trial " +
                   std::to_string(trial) + ")");

    const double target = std::vector<double>{0.5, 0.8, 0.9}[trial % 3];
    const auto lib = cough::sens_spec_at(scores, labels, target);
    const auto ref = sweep_sens_spec(scores, labels, target);
    c.expect(lib.threshold == ref.threshold &&
                 std::abs(lib.sensitivity - ref.sensitivity) < 1e-12 &&
                 std::abs(lib.specificity - ref.specificity) < 1e-12,
             "sens_spec_at matches exhaustive sweep (trial " +
                 std::to_string(trial) + ")");
  }
  return c.ok;
}

// ---------------------------------------------------------------------------
// Criterion 4: DSP contracts.
// ---------------------------------------------------------------------------

bool criterion_dsp() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  cough::SpectroConfig cfg;

  {  // 1 kHz sine at 8 kHz peaks in STFT bin 128 (1000 / (8000/1024))
    const auto clip = test::sine_clip(1000.0, 1.0, 8000);
    const auto spec = cough::stft(clip, cfg);
    Eigen::Index peak = 0;
    spec.magnitudes.col(spec.frames() / 2).maxCoeff(&peak);
    c.expect(peak == 128, "1 kHz sine peaks in bin 128 (got bin " +
                              std::to_string(peak) + ")");
  }

  {  // frame-count and patch-count closed forms over 200 random durations
    std::mt19937 rng(13);
    std::uniform_int_distribution<int> len_dist(200, 60000);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t len = static_cast<std::size_t>(len_dist(rng));
      cough::AudioClip clip;
      clip.sample_rate_hz = 8000;
      clip.samples.assign(len, 0.1f);
      const auto spec = cough::stft(clip, cfg);
      const int want_frames = static_cast<int>(len / 1024 * 8 + len % 1024 / 128) +
                              1;  // floor(len/hop) + 1 without overflow games
      c.expect(spec.frames() == static_cast<int>(len / 128) + 1 &&
                   spec.frames() == want_frames,
               "frame count closed form (len " + std::to_string(len) + ")");
      c.expect(spec.bins() == 513, "513 frequency bins");
      const std::size_t plen = 8000, phop = 4000;
      const int want_patches =
          len <= plen ? 1 : static_cast<int>((len - plen) / phop) + 1;
      c.expect(cough::patch_count(len, 8000, cfg) == want_patches,
               "patch count closed form (len " + std::to_string(len) + ")");
    }
  }

  {  // SAD: 3 s clip with a silent middle third keeps 2.0 s (± one frame)
    cough::AudioClip clip;
    clip.sample_rate_hz = 8000;
    clip.samples.assign(24000, 0.0f);
    std::mt19937 rng(17);
    std::uniform_real_distribution<float> amp(-0.5f, 0.5f);
    for (std::size_t i = 0; i < 8000; ++i) clip.samples[i] = amp(rng);
    for (std::size_t i = 16000; i < 24000; ++i) clip.samples[i] = amp(rng);
    const auto result = cough::apply_sad(clip, cough::SadConfig{});
    c.expect_near(result.clip.duration_s(), 2.0, 0.064,
                  "SAD keeps 2.0 s of a 3 s clip");
    c.expect(!result.degenerate, "SAD run is not degenerate");
  }

  {  // resampling length and tone preservation
    cough::AudioClip clip;
    clip.sample_rate_hz = 44100;
    clip.samples.assign(44100, 0.0f);
    c.expect(cough::resample(clip, 8000).samples.size() == 8000,
             "resample length 44100 -> 8000");
    clip.samples.assign(12345, 0.0f);
    c.expect(cough::resample(clip, 8000).samples.size() ==
                 static_cast<std::size_t>(std::llround(12345.0 * 8000 / 44100)),
             "resample length rounds the rate ratio");

    const auto tone = test::sine_clip(440.0, 1.0, 44100);
    const auto out = cough::resample(tone, 8000);
    const double peak_hz = test::dominant_freq_hz(out.samples, 8000);
    c.expect_near(peak_hz, 440.0, 2.0 * 8000.0 / out.samples.size(),
                  "440 Hz tone survives resampling");
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  c.expect(elapsed < 30.0,
           "DSP checks finished in " + std::to_string(elapsed) +
               " s (budget 30 s)");
  return c.ok;
}

// ---------------------------------------------------------------------------
// Criteria 5 and 8: full protocol on the synthetic corpus.
// ---------------------------------------------------------------------------

constexpr std::uint32_t kCorpusSeed = 2024;
constexpr std::uint32_t kTrainSeed = 31;

cough::Corpus build_synth_corpus(bool shuffle_labels) {
  cough::SynthConfig sc;
  sc.n_per_class = 50;
  sc.seed = kCorpusSeed;
  auto synth = cough::make_synthetic_corpus(sc);

  if (shuffle_labels) {
    std::vector<cough::Label> labels;
    for (const auto& r : synth.records) labels.push_back(r.label);
    std::mt19937 rng(777);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < labels.size(); ++i)
      synth.records[i].label = labels[i];
  }

  cough::Corpus corpus;
  corpus.records = synth.records;
  const cough::SpectroConfig spec_cfg;
  const cough::SadConfig sad_cfg;
  for (std::size_t i = 0; i < synth.records.size(); ++i) {
    const auto& rec = synth.records[i];
    cough::AudioClip clip = cough::resample(synth.clips[i], 8000);
    clip = cough::apply_sad(clip, sad_cfg).clip;
    for (auto& patch : cough::make_patches(clip, spec_cfg, rec.id)) {
      cough::PatchItem item;
      item.image = std::make_shared<cough::ImageRgb>(std::move(patch.image));
      item.label = rec.label;
      item.gender = rec.gender;
      item.source_id = rec.id;
      item.start_s = patch.start_s;
      corpus.patches[rec.id].push_back(std::move(item));
    }
  }
  return corpus;
}

json cv_to_json(const cough::CvResult& cv, std::uint32_t seed) {
  json metrics;
  metrics["seed"] = seed;
  metrics["folds"] = json::array();
  for (const auto& fr : cv.folds) {
    json j;
    j["fold"] = fr.fold_id;
    j["epochs_trained"] = fr.epochs_trained;
    j["best_val_loss"] = fr.best_val_loss;
    j["auc"] = fr.metrics.auc.has_value() ? json(*fr.metrics.auc) : json();
    j["sensitivity"] = fr.metrics.sensitivity;
    j["specificity"] = fr.metrics.specificity;
    metrics["folds"].push_back(std::move(j));
  }
  metrics["mean_auc"] = cv.mean.auc.has_value() ? json(*cv.mean.auc) : json();
  metrics["fold_epochs"] = cv.fold_epochs;
  metrics["warnings"] = cv.warnings;
  return metrics;
}

struct CvRun {
  json metrics;
  std::optional<double> mean_auc;
};

CvRun run_full_protocol(bool shuffle_labels) {
  std::cerr << "  [building synthetic corpus"
            << (shuffle_labels ? ", labels shuffled" : "") << "]\n";
  const auto corpus = build_synth_corpus(shuffle_labels);
  std::size_t n_patches = 0;
  for (const auto& [id, items] : corpus.patches) n_patches += items.size();
  std::cerr << "  [" << corpus.records.size() << " recordings, " << n_patches
            << " patches; cross-validating]\n";

  cough::ModelConfig mc;
  mc.attention = true;
  cough::TrainConfig tc;  // batch 32, lr 1e-3, patience 10, 5 folds
  tc.max_epochs = 12;     // patience-10 stopping fits inside this cap
  tc.seed = kTrainSeed;

  const auto cv = cough::cross_validate(corpus, mc, tc);
  CvRun run;
  run.metrics = cv_to_json(cv, tc.seed);
  run.mean_auc = cv.mean.auc;
  std::cerr << "  [mean validation AUC: "
            << (run.mean_auc ? std::to_string(*run.mean_auc) : "undefined")
            << "]\n";
  return run;
}

// The criterion-5 main run doubles as the first of criterion 8's two runs.
std::optional<CvRun> g_main_run;

const CvRun& main_run() {
  if (!g_main_run.has_value()) g_main_run = run_full_protocol(false);
  return *g_main_run;
}

bool criterion_pipeline_learning() {
  Check c;
  const auto& run = main_run();
  c.expect(run.mean_auc.has_value(), "mean validation AUC is defined");
  if (run.mean_auc.has_value())
    c.expect(*run.mean_auc >= 0.90,
             "mean validation AUC " + std::to_string(*run.mean_auc) +
                 " >= 0.90");

  const auto control = run_full_protocol(true);
  c.expect(control.mean_auc.has_value(), "control AUC is defined");
  if (control.mean_auc.has_value())
    c.expect(*control.mean_auc >= 0.35 && *control.mean_auc <= 0.65,
             "label-shuffled control AUC " +
                 std::to_string(*control.mean_auc) + " in [0.35, 0.65]");
  return c.ok;
}

bool criterion_reproducibility() {
  Check c;
  const auto& first = main_run();
  std::cerr << "  [repeating the run with the same seed]\n";
  const auto second = run_full_protocol(false);
  c.expect(first.metrics.dump() == second.metrics.dump(),
           "same-seed reruns produce identical metrics JSON");

  // Checkpoint round trip: save -> load -> predict, bit-identical.
  std::mt19937 rng(23);
  cough::ModelConfig mc;
  mc.attention = true;
  cough::CoughCnn<float> model(mc);
  model.init(rng);
  Tensor<float> warm({4, 3, 16, 16});
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  for (Eigen::Index i = 0; i < warm.size(); ++i) warm.values[i] = dist(rng);
  model.forward(warm, nullptr, true);  // non-trivial running statistics

  const auto path =
      std::filesystem::temp_directory_path() / "acceptance_roundtrip.bin";
  cough::save_checkpoint(path, model);
  auto loaded = cough::load_checkpoint<float>(path);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<float> x({1, 3, 16, 16});
    for (Eigen::Index i = 0; i < x.size(); ++i) x.values[i] = dist(rng);
    const auto a = model.predict_proba(x, nullptr);
    const auto b = loaded->predict_proba(x, nullptr);
    c.expect(a == b, "save->load->predict bit-identical (image " +
                         std::to_string(trial) + ")");
  }
  return c.ok;
}

// ---------------------------------------------------------------------------
// Criterion 6: protocol fidelity.
// ---------------------------------------------------------------------------

bool criterion_protocol_fidelity() {
  Check c;

  {  // injected loss sequences reproduce the stopping rule exactly
    cough::EarlyStopping es(10);
    bool stopped = false;
    int stop_epoch = 0;
    const std::vector<double> seq = {1.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9,
                                     0.9, 0.9, 0.9, 0.9, 0.9, 0.9};
    for (std::size_t i = 0; i < seq.size() && !stopped; ++i) {
      stopped = es.observe(seq[i]);
      stop_epoch = static_cast<int>(i) + 1;
    }
    c.expect(stopped && stop_epoch == 12,
             "plateau stops after 10 non-improving epochs (epoch " +
                 std::to_string(stop_epoch) + ")");
    c.expect(es.best_epoch() == 2, "best-epoch snapshot is epoch 2");

    cough::EarlyStopping never(10);
    bool fired = false;
    for (int e = 0; e < 40; ++e) fired = fired || never.observe(1.0 - 0.01 * e);
    c.expect(!fired, "strictly improving losses never stop");

    // Random injected sequences vs a scalar re-simulation of the rule.
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> loss(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> losses(40);
      for (auto& l : losses) l = std::round(loss(rng) * 8.0) / 8.0;  // ties
      cough::EarlyStopping es2(10);
      double best = std::numeric_limits<double>::infinity();
      int best_epoch = 0, stale = 0, ref_stop = 0, lib_stop = 0;
      for (std::size_t e = 0; e < losses.size(); ++e) {
        if (lib_stop == 0 && es2.observe(losses[e]))
          lib_stop = static_cast<int>(e) + 1;
        if (ref_stop == 0) {
          if (losses[e] < best) {
            best = losses[e];
            best_epoch = static_cast<int>(e) + 1;
            stale = 0;
          } else {
            ++stale;
          }
          if (stale >= 10) ref_stop = static_cast<int>(e) + 1;
        }
      }
      c.expect(lib_stop == ref_stop,
               "stop epoch matches reference (trial " + std::to_string(trial) +
                   ")");
      if (ref_stop > 0)
        c.expect(es2.best_epoch() == best_epoch,
                 "best epoch matches reference (trial " +
                     std::to_string(trial) + ")");
    }
  }

  {  // refit epoch count = lower median of the fold epochs
    std::mt19937 rng(31);
    std::uniform_int_distribution<int> k_dist(1, 9), e_dist(1, 50);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<int> epochs(static_cast<std::size_t>(k_dist(rng)));
      for (auto& e : epochs) e = e_dist(rng);
      auto sorted = epochs;
      std::sort(sorted.begin(), sorted.end());
      const int want = sorted[(sorted.size() - 1) / 2];
      c.expect(cough::median_epochs(epochs) == want,
               "median epochs (trial " + std::to_string(trial) + ")");
    }
  }

  {  // predict_recording = median of the per-patch probabilities
    std::mt19937 rng(37);
    cough::ModelBundle bundle;
    bundle.config = cough::ModelConfig{};
    bundle.single = std::make_unique<cough::Model>(bundle.config);
    bundle.single->init(rng);
    std::uniform_int_distribution<int> n_dist(1, 9);
    std::uniform_real_distribution<float> px(0.0f, 1.0f);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<cough::PatchItem> items(
          static_cast<std::size_t>(n_dist(rng)));
      for (auto& item : items) {
        auto img = std::make_shared<cough::ImageRgb>(8, 8);
        for (auto& p : img->pixels)
          p = static_cast<std::uint8_t>(px(rng) * 255.0f);
        item.image = img;
      }
      const auto probs = cough::predict_patches(*bundle.single, items);
      const double got =
          cough::predict_recording(bundle, items, cough::Gender::female);
      c.expect(got == cough::median(probs),
               "recording score is the patch-probability median (trial " +
                   std::to_string(trial) + ")");
    }
  }
  return c.ok;
}

// ---------------------------------------------------------------------------
// Criterion 7: gender-mode contracts.
// ---------------------------------------------------------------------------

bool criterion_gender_modes() {
  Check c;

  cough::ModelConfig based;
  based.gender_mode = cough::GenderMode::gender_based;
  c.expect(based.feature_dim() == 258,
           "gender_based FC1 input dimension is 258 (got " +
               std::to_string(based.feature_dim()) + ")");

  {  // gender_specific routing over a mixed synthetic manifest
    cough::SynthConfig sc;
    sc.n_per_class = 10;
    sc.seed = 5;
    const auto records = cough::make_synthetic_corpus(sc).records;
    cough::ModelConfig mc;
    mc.gender_mode = cough::GenderMode::gender_specific;
    cough::CoughCnn<float> female(mc), male(mc);
    bool saw_female = false, saw_male = false;
    for (const auto& rec : records) {
      auto& routed = cough::route_gender_specific(&female, &male, rec);
      const bool is_female = rec.gender == cough::Gender::female;
      (is_female ? saw_female : saw_male) = true;
      c.expect(&routed == (is_female ? &female : &male),
               "record " + rec.id + " routes to its gender's model");
    }
    c.expect(saw_female && saw_male, "manifest mixes both genders");
  }

  {  // baseline ignores the gender column: bit-identical outputs
    std::mt19937 rng(41);
    cough::ModelConfig mc;  // baseline
    cough::CoughCnn<float> model(mc);
    model.init(rng);
    Tensor<float> x({6, 3, 8, 8});
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.values[i] = dist(rng);
    std::vector<cough::GenderCode> genders;
    for (int i = 0; i < 6; ++i)
      genders.push_back(cough::GenderCode::from(
          i % 2 == 0 ? cough::Gender::female : cough::Gender::male));
    auto shuffled = genders;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto y0 = model.forward(x, nullptr, false);
    const auto y1 = model.forward(x, &genders, false);
    const auto y2 = model.forward(x, &shuffled, false);
    c.expect(y0.values == y1.values && y1.values == y2.values,
             "baseline output is bit-identical under gender shuffles");
  }
  return c.ok;
}

// ---------------------------------------------------------------------------
// Criterion 9: class balancing by replication.
// ---------------------------------------------------------------------------

bool criterion_balancing() {
  Check c;
  std::mt19937 rng(43);
  std::uniform_int_distribution<int> n_dist(1, 40);
  std::uniform_int_distribution<int> px(0, 255);

  for (int trial = 0; trial < 100; ++trial) {
    int n_neg = n_dist(rng), n_pos = n_dist(rng);
    if (n_neg == n_pos) ++n_neg;  // keep the sets imbalanced
    cough::PatchDataset ds;
    std::vector<std::shared_ptr<const cough::ImageRgb>> originals;
    for (int i = 0; i < n_neg + n_pos; ++i) {
      auto img = std::make_shared<cough::ImageRgb>(4, 4);
      for (auto& p : img->pixels) p = static_cast<std::uint8_t>(px(rng));
      originals.push_back(img);
      cough::PatchItem item;
      item.image = img;
      item.label = i < n_neg ? cough::Label::negative : cough::Label::positive;
      item.source_id = "rec" + std::to_string(i);
      ds.items.push_back(std::move(item));
    }

    const auto balanced = cough::balance_by_replication(ds);
    const auto n_out_neg = balanced.count(cough::Label::negative);
    const auto n_out_pos = balanced.count(cough::Label::positive);
    c.expect(n_out_neg == n_out_pos,
             "classes exactly equal after balancing (trial " +
                 std::to_string(trial) + ": " + std::to_string(n_out_neg) +
                 " vs " + std::to_string(n_out_pos) + ")");
    c.expect(n_out_neg == std::max(ds.count(cough::Label::negative),
                                   ds.count(cough::Label::positive)),
             "majority class untouched (trial " + std::to_string(trial) + ")");
    for (const auto& item : balanced.items) {
      const bool is_original =
          std::find(originals.begin(), originals.end(), item.image) !=
          originals.end();
      bool matches_pixels = false;
      for (const auto& orig : originals)
        if (*orig == *item.image) {
          matches_pixels = true;
          break;
        }
      c.expect(is_original && matches_pixels,
               "every patch is bit-identical to an original (trial " +
                   std::to_string(trial) + ")");
      if (!c.ok && c.failures > 8) return c.ok;
    }
  }
  return c.ok;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  struct Criterion {
    int id;
    const char* name;
    std::function<bool()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient integrity (finite-difference checks on every op)",
       criterion_gradients},
      {2, "attention matches the scalar-loop oracle", criterion_attention_oracle},
      {3, "AUC and operating point match brute-force oracles",
       criterion_metric_oracle},
      {4, "DSP contracts (STFT bins, frame/patch counts, SAD, resampling)",
       criterion_dsp},
      {5, "pipeline learns the synthetic corpus (mean val AUC >= 0.90; "
          "shuffled control near chance)",
       criterion_pipeline_learning},
      {6, "protocol fidelity (early stopping, median refit epochs, median "
          "aggregation)",
       criterion_protocol_fidelity},
      {7, "gender-mode contracts (258-dim FC1, routing, baseline invariance)",
       criterion_gender_modes},
      {8, "reproducibility (same-seed metrics identical; checkpoint round "
          "trip bit-identical)",
       criterion_reproducibility},
      {9, "class balancing by replication is exact and content-preserving",
       criterion_balancing},
  };

  bool all_ok = true;
  for (const auto& criterion : criteria) {
    if (!only.empty() && only.find(criterion.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = criterion.run();
    } catch (const std::exception& e) {
      std::cout << "    exception: " << e.what() << '\n';
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion.id
              << ": " << criterion.name << " (" << elapsed << " s)"
              << std::endl;
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
