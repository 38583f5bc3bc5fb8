// cough: command-line entry point for the cough-screening pipeline.
//
// Subcommands: synth, preprocess, train, evaluate, predict. Every command
// accepts --config <json> whose keys mirror the long option names; explicit
// flags always win over config-file values. Each command writes an
// effective_config.json capturing the resolved settings next to its output.
//
// Exit codes: 0 success, 2 validation failure, 3 runtime failure,
// 4 partial batch failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cough/audio.hpp"
#include "cough/dataset.hpp"
#include "cough/harness.hpp"
#include "cough/image.hpp"
#include "cough/metrics.hpp"
#include "cough/model.hpp"
#include "cough/sad.hpp"
#include "cough/spectro.hpp"
#include "cough/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitPartial = 4;

class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config-file plumbing: a flat JSON object whose keys equal the long option
// names (without the leading dashes). Values are applied to the bound
// variables before CLI11 parses the command line, so flags override them.
// ---------------------------------------------------------------------------

struct ConfigBinding {
  std::map<std::string, std::function<void(const json&)>> setters;

  template <typename T>
  void bind(const std::string& key, T* target) {
    setters[key] = [target](const json& v) { *target = v.get<T>(); };
  }

  void apply(const json& config) const {
    if (!config.is_object())
      throw ValidationError("config file must hold a JSON object");
    for (const auto& [key, value] : config.items()) {
      const auto it = setters.find(key);
      if (it == setters.end())
        throw ValidationError("unknown config key: '" + key + "'");
      try {
        it->second(value);
      } catch (const json::exception& e) {
        throw ValidationError("config key '" + key + "': " + e.what());
      }
    }
  }
};

// Pre-scan for the active subcommand's --config before CLI11 runs.
std::optional<fs::path> find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return fs::path(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return fs::path(arg.substr(9));
  }
  return std::nullopt;
}

json load_config_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config file: " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError("config file " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

// All randomness flows from one seed; unseeded runs pick one and print it.
std::uint32_t resolve_seed(std::int64_t requested) {
  if (requested >= 0) return static_cast<std::uint32_t>(requested);
  std::random_device rd;
  const std::uint32_t seed = rd();
  std::cout << "seed: " << seed << " (chosen at random; pass --seed to reproduce)\n";
  return seed;
}

// ---------------------------------------------------------------------------
// Shared option bundles
// ---------------------------------------------------------------------------

struct PreprocessOptions {
  int rate = 8000;
  std::string sad = "rms";  // rms | flux | off
  std::string scale = "log";
  std::string cmap = "magma";
  double sad_threshold = 0.1;
  double sad_frame_ms = 64.0;

  void bind(CLI::App* cmd, ConfigBinding& cfg) {
    cmd->add_option("--rate", rate, "Pipeline sample rate in Hz")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--sad", sad, "Silence removal: rms, flux or off")
        ->check(CLI::IsMember({"rms", "flux", "off"}));
    cmd->add_option("--scale", scale, "Frequency axis: log or linear")
        ->check(CLI::IsMember({"log", "linear"}));
    cmd->add_option("--cmap", cmap, "Colormap: magma or viridis")
        ->check(CLI::IsMember({"magma", "viridis"}));
    cmd->add_option("--sad-threshold", sad_threshold,
                    "Normalized activity threshold in [0, 1]");
    cmd->add_option("--sad-frame-ms", sad_frame_ms, "SAD frame length (ms)");
    cfg.bind("rate", &rate);
    cfg.bind("sad", &sad);
    cfg.bind("scale", &scale);
    cfg.bind("cmap", &cmap);
    cfg.bind("sad-threshold", &sad_threshold);
    cfg.bind("sad-frame-ms", &sad_frame_ms);
  }

  cough::SpectroConfig spectro() const {
    cough::SpectroConfig config;
    config.freq_scale = cough::freq_scale_from_string(scale);
    config.colormap = cough::colormap_from_string(cmap);
    return config;
  }

  cough::SadConfig sad_config() const {
    cough::SadConfig config;
    config.threshold = sad_threshold;
    config.frame_len_ms = sad_frame_ms;
    config.method = cough::sad_method_from_string(sad == "off" ? "rms" : sad);
    return config;
  }

  json to_json() const {
    return {{"rate", rate},          {"sad", sad},
            {"scale", scale},        {"cmap", cmap},
            {"sad-threshold", sad_threshold}, {"sad-frame-ms", sad_frame_ms}};
  }
};

// Recording -> rendered patches, the common path of preprocess and
// predict-from-audio.
std::vector<cough::Patch> render_recording(const cough::AudioClip& raw,
                                           const PreprocessOptions& opts,
                                           const std::string& id,
                                           bool* degenerate = nullptr) {
  cough::AudioClip clip = cough::resample(raw, opts.rate);
  if (opts.sad != "off") {
    const auto result = cough::apply_sad(clip, opts.sad_config());
    if (degenerate != nullptr) *degenerate = result.degenerate;
    clip = result.clip;
  }
  return cough::make_patches(clip, opts.spectro(), id);
}

// ---------------------------------------------------------------------------
// Patch cache: cache/<id>/<start_ms>.png plus index.csv and failures.csv.
// ---------------------------------------------------------------------------

struct CacheIndexRow {
  std::string id;
  long start_ms = 0;
  fs::path path;
};

std::vector<CacheIndexRow> read_cache_index(const fs::path& cache_dir) {
  const fs::path index = cache_dir / "index.csv";
  std::ifstream is(index);
  if (!is) throw ValidationError("cannot open cache index: " + index.string());
  std::string line;
  std::getline(is, line);
  if (line != "id,start_ms,path")
    throw ValidationError("unexpected cache index header in " + index.string());
  std::vector<CacheIndexRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ValidationError("malformed cache index row: " + line);
    CacheIndexRow row;
    row.id = line.substr(0, c1);
    row.start_ms = std::stol(line.substr(c1 + 1, c2 - c1 - 1));
    row.path = cache_dir / line.substr(c2 + 1);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Loads manifest + cached patches into the training-harness corpus.
cough::Corpus load_corpus(const fs::path& manifest_path,
                          const fs::path& cache_dir) {
  cough::Corpus corpus;
  corpus.records = cough::load_manifest(manifest_path);
  const auto index = read_cache_index(cache_dir);
  std::map<std::string, const cough::SampleRecord*> by_id;
  for (const auto& r : corpus.records) by_id[r.id] = &r;
  for (const auto& row : index) {
    const auto it = by_id.find(row.id);
    if (it == by_id.end()) continue;  // cached recording not in this manifest
    cough::PatchItem item;
    item.image = std::make_shared<cough::ImageRgb>(cough::read_png(row.path));
    item.label = it->second->label;
    item.gender = it->second->gender;
    item.source_id = row.id;
    item.start_s = row.start_ms / 1000.0;
    corpus.patches[row.id].push_back(std::move(item));
  }
  for (const auto& r : corpus.records)
    if (corpus.patches.find(r.id) == corpus.patches.end())
      throw ValidationError("manifest id '" + r.id +
                            "' has no patches in the cache; run preprocess first");
  return corpus;
}

// ---------------------------------------------------------------------------
// Model bundle I/O (gender-specific runs hold a _female/_male pair).
// ---------------------------------------------------------------------------

void save_bundle(const fs::path& dir, const cough::ModelBundle& bundle,
                 const json& meta) {
  fs::create_directories(dir);
  if (bundle.config.gender_mode == cough::GenderMode::gender_specific) {
    cough::save_checkpoint(dir / "checkpoint_female.bin", *bundle.female, meta);
    cough::save_checkpoint(dir / "checkpoint_male.bin", *bundle.male, meta);
  } else {
    cough::save_checkpoint(dir / "checkpoint.bin", *bundle.single, meta);
  }
}

// Accepts a single checkpoint file, or a directory holding checkpoint.bin
// or a checkpoint_female.bin / checkpoint_male.bin pair.
cough::ModelBundle load_bundle(const fs::path& model_path) {
  cough::ModelBundle bundle;
  if (fs::is_directory(model_path)) {
    const fs::path pair_f = model_path / "checkpoint_female.bin";
    const fs::path pair_m = model_path / "checkpoint_male.bin";
    const fs::path single = model_path / "checkpoint.bin";
    if (fs::exists(pair_f) || fs::exists(pair_m)) {
      if (!fs::exists(pair_f) || !fs::exists(pair_m))
        throw ValidationError(
            "gender-specific run needs both checkpoint_female.bin and "
            "checkpoint_male.bin in " + model_path.string());
      bundle.female = cough::load_checkpoint<float>(pair_f);
      bundle.male = cough::load_checkpoint<float>(pair_m);
      bundle.config = bundle.female->config();
      return bundle;
    }
    if (!fs::exists(single))
      throw ValidationError("no checkpoint found in " + model_path.string());
    bundle.single = cough::load_checkpoint<float>(single);
    bundle.config = bundle.single->config();
    return bundle;
  }
  if (!fs::exists(model_path))
    throw ValidationError("checkpoint not found: " + model_path.string());
  bundle.single = cough::load_checkpoint<float>(model_path);
  bundle.config = bundle.single->config();
  if (bundle.config.gender_mode == cough::GenderMode::gender_specific) {
    // A bare file from a gender-specific run: look for its sibling.
    const std::string name = model_path.filename().string();
    const bool is_female = name.find("female") != std::string::npos;
    std::string sibling = name;
    const std::string from = is_female ? "female" : "male";
    const std::string to = is_female ? "male" : "female";
    sibling.replace(sibling.find(from), from.size(), to);
    const fs::path other = model_path.parent_path() / sibling;
    if (!fs::exists(other))
      throw ValidationError("gender-specific checkpoint needs its " + to +
                            " sibling: " + other.string());
    auto second = cough::load_checkpoint<float>(other);
    bundle.female = is_female ? std::move(bundle.single) : std::move(second);
    bundle.male = is_female ? std::move(second) : std::move(bundle.single);
    bundle.single.reset();
  }
  return bundle;
}

json metrics_to_json(const cough::EvalMetrics& m) {
  json j;
  if (m.auc.has_value())
    j["auc"] = *m.auc;
  else
    j["auc"] = nullptr;
  j["sensitivity"] = m.sensitivity;
  j["specificity"] = m.specificity;
  j["threshold"] = m.threshold;
  return j;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int n_per_class = 50;
  std::int64_t seed = -1;
  int folds = 5;
  int rate = 44100;
};

int cmd_synth(const SynthArgs& args) {
  cough::SynthConfig config;
  config.n_per_class = args.n_per_class;
  config.seed = resolve_seed(args.seed);
  config.k_folds = args.folds;
  config.sample_rate_hz = args.rate;

  const fs::path out_dir(args.out);
  const auto records = cough::write_synthetic_corpus(out_dir, config);

  write_json(out_dir / "effective_config.json",
             {{"command", "synth"},
              {"out", args.out},
              {"n-per-class", config.n_per_class},
              {"seed", config.seed},
              {"folds", config.k_folds},
              {"rate", config.sample_rate_hz}});
  std::cout << "wrote " << records.size() << " recordings to " << out_dir
            << " (manifest.csv + audio/)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string manifest;
  std::string out;
  PreprocessOptions opts;
};

int cmd_preprocess(const PreprocessArgs& args) {
  const auto records = cough::load_manifest(args.manifest);
  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);

  std::ofstream index(out_dir / "index.csv");
  index << "id,start_ms,path\n";
  std::ofstream failures;
  std::size_t n_failed = 0;
  std::map<cough::Label, std::size_t> patch_counts;

  for (const auto& rec : records) {
    try {
      const cough::AudioClip raw = cough::load_wav(rec.path);
      bool degenerate = false;
      const auto patches = render_recording(raw, args.opts, rec.id, &degenerate);
      if (degenerate)
        std::cerr << "warning: '" << rec.id
                  << "' has no activity above the threshold; kept its single "
                     "most active frame\n";
      const fs::path rec_dir = out_dir / rec.id;
      fs::create_directories(rec_dir);
      for (const auto& patch : patches) {
        const long start_ms = std::lround(patch.start_s * 1000.0);
        const std::string name = std::to_string(start_ms) + ".png";
        cough::write_png(rec_dir / name, patch.image);
        index << rec.id << ',' << start_ms << ','
              << (fs::path(rec.id) / name).generic_string() << '\n';
      }
      patch_counts[rec.label] += patches.size();
    } catch (const std::exception& e) {
      if (!failures.is_open()) {
        failures.open(out_dir / "failures.csv");
        failures << "id,path,error\n";
      }
      std::string what = e.what();
      std::replace(what.begin(), what.end(), ',', ';');
      failures << rec.id << ',' << rec.path.generic_string() << ',' << what
               << '\n';
      ++n_failed;
    }
  }

  json effective = args.opts.to_json();
  effective["command"] = "preprocess";
  effective["manifest"] = args.manifest;
  effective["out"] = args.out;
  write_json(out_dir / "effective_config.json", effective);

  std::cout << "patches: negative=" << patch_counts[cough::Label::negative]
            << " positive=" << patch_counts[cough::Label::positive] << '\n';
  if (n_failed > 0) {
    std::cout << n_failed << " of " << records.size()
              << " recordings failed; see failures.csv\n";
    return kExitPartial;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string cache;
  std::string run;
  bool attention = false;
  std::string attention_mode = "scale";
  std::string gender = "baseline";
  double lr = 1e-3;
  int batch = 32;
  int max_epochs = 100;
  int patience = 10;
  int folds = 5;
  std::int64_t seed = -1;
};

void write_fold_log(const fs::path& path, const std::vector<cough::EpochLog>& log) {
  std::ofstream os(path);
  os << "epoch,train_loss,val_loss\n";
  for (const auto& e : log)
    os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
}

int cmd_train(const TrainArgs& args) {
  const cough::Corpus corpus = load_corpus(args.manifest, args.cache);

  cough::ModelConfig model_config;
  model_config.attention = args.attention;
  model_config.attention_mode = args.attention_mode == "sum"
                                    ? cough::AttentionMode::sum
                                    : cough::AttentionMode::scale;
  model_config.gender_mode = cough::gender_mode_from_string(args.gender);

  cough::TrainConfig train_config;
  train_config.lr = args.lr;
  train_config.batch_size = args.batch;
  train_config.max_epochs = args.max_epochs;
  train_config.patience = args.patience;
  train_config.k_folds = args.folds;
  train_config.seed = resolve_seed(args.seed);

  const fs::path run_dir(args.run);
  fs::create_directories(run_dir);
  const json effective = {{"command", "train"},
                          {"manifest", args.manifest},
                          {"cache", args.cache},
                          {"run", args.run},
                          {"attention", model_config.attention},
                          {"attention-mode", args.attention_mode},
                          {"gender", to_string(model_config.gender_mode)},
                          {"lr", train_config.lr},
                          {"batch", train_config.batch_size},
                          {"max-epochs", train_config.max_epochs},
                          {"patience", train_config.patience},
                          {"folds", train_config.k_folds},
                          {"seed", train_config.seed}};
  write_json(run_dir / "config.json", effective);
  write_json(run_dir / "effective_config.json", effective);

  std::cout << "cross-validating (" << train_config.k_folds << " folds)...\n";
  std::vector<cough::ModelBundle> fold_models;
  const auto cv =
      cough::cross_validate(corpus, model_config, train_config, &fold_models);

  const bool specific =
      model_config.gender_mode == cough::GenderMode::gender_specific;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const fs::path fold_dir = run_dir / ("fold" + std::to_string(f));
    fs::create_directories(fold_dir);
    if (specific) {
      write_fold_log(fold_dir / "log_female.csv", cv.folds[f].log);
      write_fold_log(fold_dir / "log_male.csv", cv.folds[f].log_male);
    } else {
      write_fold_log(fold_dir / "log.csv", cv.folds[f].log);
    }
    save_bundle(fold_dir, fold_models[f],
                {{"fold", static_cast<int>(f)}, {"seed", train_config.seed}});
    std::cout << "fold " << f << ": epochs=" << cv.folds[f].epochs_trained
              << " val_loss=" << cv.folds[f].best_val_loss << " auc="
              << (cv.folds[f].metrics.auc.has_value()
                      ? std::to_string(*cv.folds[f].metrics.auc)
                      : std::string("undefined"))
              << '\n';
  }
  for (const auto& w : cv.warnings) std::cerr << "warning: " << w << '\n';

  const int refit_epochs = cough::median_epochs(cv.fold_epochs);
  std::cout << "refitting on all training material for " << refit_epochs
            << " epochs...\n";
  const auto final_bundle =
      cough::refit_full(corpus, cv.fold_epochs, model_config, train_config);
  save_bundle(run_dir / "final", final_bundle,
              {{"refit_epochs", refit_epochs}, {"seed", train_config.seed}});

  json metrics;
  metrics["model"] = model_config.to_json();
  metrics["seed"] = train_config.seed;
  metrics["folds"] = json::array();
  for (const auto& fr : cv.folds) {
    json j = metrics_to_json(fr.metrics);
    j["fold"] = fr.fold_id;
    j["epochs_trained"] = fr.epochs_trained;
    j["best_val_loss"] = fr.best_val_loss;
    metrics["folds"].push_back(std::move(j));
  }
  metrics["mean"] = metrics_to_json(cv.mean);
  metrics["fold_epochs"] = cv.fold_epochs;
  metrics["refit_epochs"] = refit_epochs;
  metrics["warnings"] = cv.warnings;
  write_json(run_dir / "metrics.json", metrics);

  // Final-model scores over every recording in the manifest.
  std::ofstream preds(run_dir / "predictions.csv");
  preds << "id,score,label\n";
  for (const auto& rec : corpus.records) {
    const double score = cough::predict_recording(
        final_bundle, corpus.patches.at(rec.id), rec.gender);
    preds << rec.id << ',' << score << ',' << to_string(rec.label) << '\n';
  }

  if (cv.mean.auc.has_value())
    std::cout << "mean validation AUC: " << *cv.mean.auc << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string manifest;
  std::string cache;
  std::string out;
  double target_sensitivity = 0.8;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const auto bundle = load_bundle(args.model);
  const cough::Corpus corpus = load_corpus(args.manifest, args.cache);

  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (const auto& rec : corpus.records) {
    scores.push_back(cough::predict_recording(bundle, corpus.patches.at(rec.id),
                                              rec.gender));
    labels.push_back(static_cast<int>(rec.label));
    ids.push_back(rec.id);
  }
  const auto metrics =
      cough::recording_metrics(scores, labels, args.target_sensitivity);

  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);
  write_json(out_dir / "effective_config.json",
             {{"command", "evaluate"},
              {"model", args.model},
              {"manifest", args.manifest},
              {"cache", args.cache},
              {"out", args.out},
              {"target-sensitivity", args.target_sensitivity}});
  json j = metrics_to_json(metrics);
  j["recordings"] = ids.size();
  j["target_sensitivity"] = args.target_sensitivity;
  write_json(out_dir / "metrics.json", j);

  std::ofstream preds(out_dir / "predictions.csv");
  preds << "id,score,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    preds << ids[i] << ',' << scores[i] << ','
          << to_string(static_cast<cough::Label>(labels[i])) << '\n';

  std::cout << "recordings: " << ids.size() << '\n';
  if (metrics.auc.has_value())
    std::cout << "auc: " << *metrics.auc << "\nsensitivity: "
              << metrics.sensitivity << "\nspecificity: " << metrics.specificity
              << " (at target sensitivity " << args.target_sensitivity << ")\n";
  else
    std::cout << "auc: undefined (single-class manifest)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string manifest;
  std::string cache;
  std::string audio;
  std::string gender;
  std::string id = "recording";
  std::string out;
  bool verbose = false;
  PreprocessOptions opts;
};

int cmd_predict(const PredictArgs& args) {
  const auto bundle = load_bundle(args.model);
  const bool gender_aware =
      bundle.config.gender_mode != cough::GenderMode::baseline;

  struct Row {
    std::string id;
    double score = 0.0;
    std::size_t patches = 0;
    std::optional<cough::Label> label;
    std::vector<double> patch_scores;
  };
  std::vector<Row> rows;

  if (!args.audio.empty()) {
    if (!args.manifest.empty())
      throw ValidationError("pass either --audio or --manifest, not both");
    cough::Gender gender = cough::Gender::female;
    if (gender_aware) {
      if (args.gender.empty())
        throw ValidationError("this model is gender-aware; pass --gender");
      gender = cough::gender_from_string(args.gender);
    } else if (!args.gender.empty()) {
      gender = cough::gender_from_string(args.gender);
    }
    const cough::AudioClip raw = cough::load_wav(args.audio);
    const auto patches = render_recording(raw, args.opts, args.id);
    std::vector<cough::PatchItem> items;
    for (const auto& p : patches) {
      cough::PatchItem item;
      item.image = std::make_shared<cough::ImageRgb>(p.image);
      item.gender = gender;
      item.source_id = p.source_id;
      item.start_s = p.start_s;
      items.push_back(std::move(item));
    }
    Row row;
    row.id = args.id;
    row.patches = items.size();
    row.patch_scores =
        cough::predict_patches(bundle.for_gender(gender), items);
    row.score = cough::median(row.patch_scores);
    rows.push_back(std::move(row));
  } else {
    if (args.manifest.empty() || args.cache.empty())
      throw ValidationError("predict needs --audio, or --manifest with --cache");
    const cough::Corpus corpus = load_corpus(args.manifest, args.cache);
    for (const auto& rec : corpus.records) {
      const auto& items = corpus.patches.at(rec.id);
      Row row;
      row.id = rec.id;
      row.patches = items.size();
      row.patch_scores =
          cough::predict_patches(bundle.for_gender(rec.gender), items);
      row.score = cough::median(row.patch_scores);
      row.label = rec.label;
      rows.push_back(std::move(row));
    }
  }

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!args.out.empty()) {
    const fs::path out_path(args.out);
    if (out_path.has_parent_path())
      fs::create_directories(out_path.parent_path());
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot write " + args.out);
    os = &file;
    json effective = args.opts.to_json();
    effective["command"] = "predict";
    effective["model"] = args.model;
    effective["out"] = args.out;
    if (!args.audio.empty()) effective["audio"] = args.audio;
    if (!args.manifest.empty()) effective["manifest"] = args.manifest;
    if (!args.cache.empty()) effective["cache"] = args.cache;
    write_json(out_path.parent_path() / "effective_config.json", effective);
  }

  *os << "id,score,patches,label\n";
  for (const auto& row : rows) {
    *os << row.id << ',' << row.score << ',' << row.patches << ','
        << (row.label.has_value() ? to_string(*row.label) : std::string()) << '\n';
    if (args.verbose) {
      std::cout << row.id << ": " << row.patches << " patches, scores:";
      for (double s : row.patch_scores) std::cout << ' ' << s;
      std::cout << '\n';
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cough-based screening pipeline"};
  app.require_subcommand(1);

  std::string config_path_display;  // parsed manually before CLI11 runs

  SynthArgs synth_args;
  ConfigBinding synth_cfg;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
  synth->add_option("--config", config_path_display, "JSON config file");
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--n-per-class", synth_args.n_per_class,
                    "Recordings per class");
  synth->add_option("--seed", synth_args.seed, "Master seed");
  synth->add_option("--folds", synth_args.folds, "Fold count");
  synth->add_option("--rate", synth_args.rate, "Sample rate in Hz");
  synth_cfg.bind("out", &synth_args.out);
  synth_cfg.bind("n-per-class", &synth_args.n_per_class);
  synth_cfg.bind("seed", &synth_args.seed);
  synth_cfg.bind("folds", &synth_args.folds);
  synth_cfg.bind("rate", &synth_args.rate);

  PreprocessArgs pre_args;
  ConfigBinding pre_cfg;
  auto* pre = app.add_subcommand("preprocess",
                                 "Render manifest audio into a patch cache");
  pre->add_option("--config", config_path_display, "JSON config file");
  pre->add_option("--manifest", pre_args.manifest, "Manifest CSV")->required();
  pre->add_option("--out", pre_args.out, "Cache directory")->required();
  pre_args.opts.bind(pre, pre_cfg);
  pre_cfg.bind("manifest", &pre_args.manifest);
  pre_cfg.bind("out", &pre_args.out);

  TrainArgs train_args;
  ConfigBinding train_cfg;
  auto* train = app.add_subcommand("train",
                                   "Cross-validate and refit on a patch cache");
  train->add_option("--config", config_path_display, "JSON config file");
  train->add_option("--manifest", train_args.manifest, "Manifest CSV")->required();
  train->add_option("--cache", train_args.cache, "Patch cache directory")->required();
  train->add_option("--run", train_args.run, "Run directory to create")->required();
  train->add_flag("--attention", train_args.attention,
                  "Enable contextual attention");
  train->add_option("--attention-mode", train_args.attention_mode,
                    "Attention application: scale or sum")
      ->check(CLI::IsMember({"scale", "sum"}));
  train->add_option("--gender", train_args.gender,
                    "Gender handling: baseline, based or specific")
      ->check(CLI::IsMember({"baseline", "based", "specific"}));
  train->add_option("--lr", train_args.lr, "Learning rate");
  train->add_option("--batch", train_args.batch, "Batch size");
  train->add_option("--max-epochs", train_args.max_epochs, "Epoch cap");
  train->add_option("--patience", train_args.patience, "Early-stopping patience");
  train->add_option("--folds", train_args.folds, "Fold count");
  train->add_option("--seed", train_args.seed, "Master seed");
  train_cfg.bind("manifest", &train_args.manifest);
  train_cfg.bind("cache", &train_args.cache);
  train_cfg.bind("run", &train_args.run);
  train_cfg.bind("attention", &train_args.attention);
  train_cfg.bind("attention-mode", &train_args.attention_mode);
  train_cfg.bind("gender", &train_args.gender);
  train_cfg.bind("lr", &train_args.lr);
  train_cfg.bind("batch", &train_args.batch);
  train_cfg.bind("max-epochs", &train_args.max_epochs);
  train_cfg.bind("patience", &train_args.patience);
  train_cfg.bind("folds", &train_args.folds);
  train_cfg.bind("seed", &train_args.seed);

  EvaluateArgs eval_args;
  ConfigBinding eval_cfg;
  auto* eval = app.add_subcommand("evaluate",
                                  "Score a manifest and report metrics");
  eval->add_option("--config", config_path_display, "JSON config file");
  eval->add_option("--model", eval_args.model,
                   "Checkpoint file or directory")->required();
  eval->add_option("--manifest", eval_args.manifest, "Manifest CSV")->required();
  eval->add_option("--cache", eval_args.cache, "Patch cache directory")->required();
  eval->add_option("--out", eval_args.out, "Output directory")->required();
  eval->add_option("--target-sensitivity", eval_args.target_sensitivity,
                   "Operating-point sensitivity target");
  eval_cfg.bind("model", &eval_args.model);
  eval_cfg.bind("manifest", &eval_args.manifest);
  eval_cfg.bind("cache", &eval_args.cache);
  eval_cfg.bind("out", &eval_args.out);
  eval_cfg.bind("target-sensitivity", &eval_args.target_sensitivity);

  PredictArgs pred_args;
  ConfigBinding pred_cfg;
  auto* pred = app.add_subcommand("predict", "Score recordings with a model");
  pred->add_option("--config", config_path_display, "JSON config file");
  pred->add_option("--model", pred_args.model,
                   "Checkpoint file or directory")->required();
  pred->add_option("--manifest", pred_args.manifest, "Manifest CSV");
  pred->add_option("--cache", pred_args.cache, "Patch cache directory");
  pred->add_option("--audio", pred_args.audio, "Single WAV file to score");
  pred->add_option("--gender", pred_args.gender,
                   "Gender for --audio scoring: female or male");
  pred->add_option("--id", pred_args.id, "Recording id for --audio output");
  pred->add_option("--out", pred_args.out,
                   "predictions.csv path (default: stdout)");
  pred->add_flag("--verbose", pred_args.verbose, "Print per-patch scores");
  pred_args.opts.bind(pred, pred_cfg);
  pred_cfg.bind("model", &pred_args.model);
  pred_cfg.bind("manifest", &pred_args.manifest);
  pred_cfg.bind("cache", &pred_args.cache);
  pred_cfg.bind("audio", &pred_args.audio);
  pred_cfg.bind("gender", &pred_args.gender);
  pred_cfg.bind("id", &pred_args.id);
  pred_cfg.bind("out", &pred_args.out);
  pred_cfg.bind("verbose", &pred_args.verbose);

  try {
    // Config file first (if any), so explicit flags override its values.
    if (const auto config_path = find_config_arg(argc, argv)) {
      const json config = load_config_file(*config_path);
      std::string sub;
      for (int i = 1; i < argc; ++i) {
        if (argv[i][0] != '-') {
          sub = argv[i];
          break;
        }
      }
      if (sub == "synth")
        synth_cfg.apply(config);
      else if (sub == "preprocess")
        pre_cfg.apply(config);
      else if (sub == "train")
        train_cfg.apply(config);
      else if (sub == "evaluate")
        eval_cfg.apply(config);
      else if (sub == "predict")
        pred_cfg.apply(config);
    }

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? kExitOk : kExitValidation;
    }

    if (synth->parsed()) return cmd_synth(synth_args);
    if (pre->parsed()) return cmd_preprocess(pre_args);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_evaluate(eval_args);
    if (pred->parsed()) return cmd_predict(pred_args);
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const cough::ManifestError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const cough::AudioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == cough::AudioError::Kind::missing_file ? kExitValidation
                                                             : kExitRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
