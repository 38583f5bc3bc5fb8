#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cough/dataset.hpp"
#include "cough/metrics.hpp"
#include "cough/model.hpp"

namespace cough {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;
  int k_folds = 5;
  std::uint32_t seed = 0;
};

// Stops when the validation loss has not strictly improved for `patience`
// consecutive epochs. Tracks the best epoch for snapshot restoration.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool observe(double val_loss) {
    ++epoch_;
    if (epoch_ == 1 || val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch_;
      stale_ = 0;
      improved_ = true;
    } else {
      ++stale_;
      improved_ = false;
    }
    return stale_ >= patience_;
  }

  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epoch_ = 0;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = 0.0;
  bool improved_ = false;
};

// Lower median: the order statistic at index floor((k-1)/2).
int median_epochs(std::vector<int> fold_epochs);

struct EvalMetrics {
  std::optional<double> auc;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double threshold = 0.0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct FoldResult {
  int fold_id = 0;
  int epochs_trained = 0;  // epoch index of the best snapshot (1-based)
  double best_val_loss = 0.0;
  EvalMetrics metrics;  // recording-level, on the validation fold
  std::vector<EpochLog> log;       // female model's log in gender-specific mode
  std::vector<EpochLog> log_male;  // only used in gender-specific mode
};

using Model = CoughCnn<float>;

// A trained classifier; holds one model, or a pair in gender-specific mode.
struct ModelBundle {
  ModelConfig config;
  std::unique_ptr<Model> single;
  std::unique_ptr<Model> female;
  std::unique_ptr<Model> male;

  Model& for_gender(Gender g) const;
};

// Recordings plus their rendered patches, keyed by recording id.
struct Corpus {
  std::vector<SampleRecord> records;
  std::unordered_map<std::string, std::vector<PatchItem>> patches;

  PatchDataset dataset_for(const std::vector<SampleRecord>& subset) const;
  std::vector<SampleRecord> train_partition() const;  // drops test-fold rows
};

struct TrainedFold {
  std::unique_ptr<Model> model;
  FoldResult result;
};

// Trains one model with Adam + cross-entropy and early stopping, returning
// the best-validation-loss snapshot. `train` must already be balanced.
TrainedFold train_fold(const PatchDataset& train, const PatchDataset& val,
                       const ModelConfig& model_config,
                       const TrainConfig& train_config, std::uint32_t seed,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

struct CvResult {
  std::vector<FoldResult> folds;
  EvalMetrics mean;                 // averaged over folds with a defined AUC
  std::vector<int> fold_epochs;     // epochs_trained per fold (gender-specific
                                    // mode: max over the two per-gender runs)
  std::vector<std::string> warnings;
};

// k-fold cross-validation over the manifest's fold assignments. Balancing
// is applied to the training split only; validation metrics are computed
// at recording level via median patch-probability aggregation.
CvResult cross_validate(const Corpus& corpus, const ModelConfig& model_config,
                        const TrainConfig& train_config,
                        std::vector<ModelBundle>* fold_models = nullptr);

// Refit on all training material for the median fold-epoch count, without
// a validation split or early stopping.
ModelBundle refit_full(const Corpus& corpus, const std::vector<int>& fold_epochs,
                       const ModelConfig& model_config,
                       const TrainConfig& train_config);

// Per-patch positive probabilities, batched.
std::vector<double> predict_patches(Model& model,
                                    const std::vector<PatchItem>& items,
                                    int batch_size = 32);

// Recording score: median of its patch probabilities.
double predict_recording(const ModelBundle& bundle,
                         const std::vector<PatchItem>& items, Gender gender);

// Recording-level metrics for a set of scored recordings.
EvalMetrics recording_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels,
                              double target_sensitivity = 0.8);

// Deterministic per-fold / per-purpose seed derivation (splitmix64 mix).
std::uint32_t derive_seed(std::uint32_t master, std::uint32_t stream);

}  // namespace cough
