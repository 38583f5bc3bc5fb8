#include "cough/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cough/nn/adam.hpp"

namespace cough {
namespace {

// Pixel data scaled to [0, 1], laid out as [N, 3, H, W].
nn::Tensor<float> batch_tensor(const std::vector<PatchItem>& items,
                               const std::vector<std::size_t>& idx,
                               std::size_t first, std::size_t count) {
  const ImageRgb& ref = *items[idx[first]].image;
  const int h = ref.height, w = ref.width;
  nn::Tensor<float> t({static_cast<int>(count), 3, h, w});
  const Eigen::Index plane = static_cast<Eigen::Index>(h) * w;
  for (std::size_t b = 0; b < count; ++b) {
    const ImageRgb& img = *items[idx[first + b]].image;
    if (img.height != h || img.width != w)
      throw std::invalid_argument("batch: inconsistent image sizes");
    const std::uint8_t* px = img.pixels.data();
    float* out = t.values.data() + static_cast<Eigen::Index>(b) * 3 * plane;
    for (Eigen::Index p = 0; p < plane; ++p) {
      out[p] = px[p * 3] / 255.0f;
      out[plane + p] = px[p * 3 + 1] / 255.0f;
      out[2 * plane + p] = px[p * 3 + 2] / 255.0f;
    }
  }
  return t;
}

std::vector<int> batch_labels(const std::vector<PatchItem>& items,
                              const std::vector<std::size_t>& idx,
                              std::size_t first, std::size_t count) {
  std::vector<int> labels(count);
  for (std::size_t b = 0; b < count; ++b)
    labels[b] = static_cast<int>(items[idx[first + b]].label);
  return labels;
}

std::vector<GenderCode> batch_genders(const std::vector<PatchItem>& items,
                                      const std::vector<std::size_t>& idx,
                                      std::size_t first, std::size_t count) {
  std::vector<GenderCode> g(count);
  for (std::size_t b = 0; b < count; ++b)
    g[b] = GenderCode::from(items[idx[first + b]].gender);
  return g;
}

double dataset_loss(Model& model, const std::vector<PatchItem>& items,
                    int batch_size) {
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const bool wants_gender =
      model.config().gender_mode == GenderMode::gender_based;
  nn::SoftmaxCrossEntropy<float> ce;
  double total = 0.0;
  for (std::size_t i = 0; i < items.size();
       i += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(batch_size), items.size() - i);
    auto images = batch_tensor(items, idx, i, count);
    auto labels = batch_labels(items, idx, i, count);
    std::vector<GenderCode> genders;
    const std::vector<GenderCode>* gp = nullptr;
    if (wants_gender) {
      genders = batch_genders(items, idx, i, count);
      gp = &genders;
    }
    auto logits = model.forward(images, gp, /*training=*/false);
    total += static_cast<double>(ce.forward(logits, labels)) *
             static_cast<double>(count);
  }
  return total / static_cast<double>(items.size());
}

// Full parameter + running-stat snapshot for best-epoch restoration.
struct Snapshot {
  std::vector<nn::Vec<float>> params;
  std::vector<nn::Vec<float>> buffers;

  static Snapshot take(Model& model) {
    Snapshot s;
    for (auto* t : model.param_tensors()) s.params.push_back(t->values);
    for (auto& b : model.buffers()) s.buffers.push_back(*b.values);
    return s;
  }
  void restore(Model& model) const {
    auto tensors = model.param_tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i)
      tensors[i]->values = params[i];
    auto bufs = model.buffers();
    for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i].values = buffers[i];
  }
};

// One training run: early stopping against `val` when fixed_epochs < 0,
// otherwise exactly fixed_epochs epochs.
TrainedFold run_training(const PatchDataset& train, const PatchDataset* val,
                         const ModelConfig& model_config,
                         const TrainConfig& train_config, std::uint32_t seed,
                         int fixed_epochs,
                         const std::function<void(const EpochLog&)>& on_epoch) {
  if (train.items.empty())
    throw std::invalid_argument("train: empty training set");
  if (train.count(Label::positive) == 0 || train.count(Label::negative) == 0)
    throw std::invalid_argument("train: single-class training split");
  if (val != nullptr && val->items.empty())
    throw std::invalid_argument("train: empty validation set");

  std::mt19937 rng(seed);
  TrainedFold out;
  out.model = std::make_unique<Model>(model_config);
  out.model->init(rng);

  nn::AdamConfig adam_config;
  adam_config.lr = train_config.lr;
  nn::Adam<float> adam(out.model->param_tensors(), adam_config);
  nn::SoftmaxCrossEntropy<float> ce;
  const bool wants_gender = model_config.gender_mode == GenderMode::gender_based;

  std::vector<std::size_t> idx(train.items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  EarlyStopping stopper(train_config.patience);
  Snapshot best;
  const int epoch_limit =
      fixed_epochs >= 0 ? fixed_epochs : train_config.max_epochs;

  for (int epoch = 1; epoch <= epoch_limit; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < idx.size();
         i += static_cast<std::size_t>(train_config.batch_size)) {
      const std::size_t count = std::min(
          static_cast<std::size_t>(train_config.batch_size), idx.size() - i);
      if (count == 1) continue;  // a singleton batch would break batchnorm
      auto images = batch_tensor(train.items, idx, i, count);
      auto labels = batch_labels(train.items, idx, i, count);
      std::vector<GenderCode> genders;
      const std::vector<GenderCode>* gp = nullptr;
      if (wants_gender) {
        genders = batch_genders(train.items, idx, i, count);
        gp = &genders;
      }
      out.model->zero_grad();
      auto logits = out.model->forward(images, gp, /*training=*/true);
      const float loss = ce.forward(logits, labels);
      out.model->backward(ce.backward());
      adam.step();
      epoch_loss += static_cast<double>(loss) * static_cast<double>(count);
      seen += count;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = seen > 0 ? epoch_loss / static_cast<double>(seen) : 0.0;

    if (val != nullptr) {
      log.val_loss = dataset_loss(*out.model, val->items, train_config.batch_size);
      out.result.log.push_back(log);
      if (on_epoch) on_epoch(log);
      if (fixed_epochs < 0) {
        const bool stop = stopper.observe(log.val_loss);
        if (stopper.improved()) best = Snapshot::take(*out.model);
        if (stop) break;
      }
    } else {
      out.result.log.push_back(log);
      if (on_epoch) on_epoch(log);
    }
  }

  if (val != nullptr && fixed_epochs < 0) {
    if (stopper.best_epoch() > 0) best.restore(*out.model);
    out.result.epochs_trained = stopper.best_epoch();
    out.result.best_val_loss = stopper.best_loss();
  } else {
    out.result.epochs_trained = epoch_limit;
  }
  return out;
}

struct RecordingScores {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> ids;
};

RecordingScores score_recordings(const ModelBundle& bundle,
                                 const Corpus& corpus,
                                 const std::vector<SampleRecord>& records) {
  RecordingScores out;
  for (const auto& r : records) {
    auto it = corpus.patches.find(r.id);
    if (it == corpus.patches.end() || it->second.empty())
      throw std::invalid_argument("no patches for recording '" + r.id + "'");
    out.scores.push_back(predict_recording(bundle, it->second, r.gender));
    out.labels.push_back(static_cast<int>(r.label));
    out.ids.push_back(r.id);
  }
  return out;
}

PatchDataset filter_gender(const PatchDataset& ds, Gender g) {
  PatchDataset out;
  for (const auto& item : ds.items)
    if (item.gender == g) out.items.push_back(item);
  return out;
}

std::vector<SampleRecord> filter_gender(const std::vector<SampleRecord>& recs,
                                        Gender g) {
  std::vector<SampleRecord> out;
  for (const auto& r : recs)
    if (r.gender == g) out.push_back(r);
  return out;
}

PatchDataset prepare_train_set(const Corpus& corpus,
                               const std::vector<SampleRecord>& records,
                               std::uint32_t seed) {
  PatchDataset ds = balance_by_replication(corpus.dataset_for(records));
  std::mt19937 rng(seed);
  std::shuffle(ds.items.begin(), ds.items.end(), rng);
  return ds;
}

}  // namespace

std::uint32_t derive_seed(std::uint32_t master, std::uint32_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = (static_cast<std::uint64_t>(master) << 32) | stream;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  return static_cast<std::uint32_t>(z >> 32);
}

int median_epochs(std::vector<int> fold_epochs) {
  if (fold_epochs.empty())
    throw std::invalid_argument("median_epochs: empty input");
  std::sort(fold_epochs.begin(), fold_epochs.end());
  return fold_epochs[(fold_epochs.size() - 1) / 2];
}

Model& ModelBundle::for_gender(Gender g) const {
  if (config.gender_mode == GenderMode::gender_specific) {
    Model* m = g == Gender::female ? female.get() : male.get();
    if (m == nullptr)
      throw std::invalid_argument("no model for gender " + to_string(g));
    return *m;
  }
  if (single == nullptr) throw std::invalid_argument("empty model bundle");
  return *single;
}

PatchDataset Corpus::dataset_for(const std::vector<SampleRecord>& subset) const {
  PatchDataset ds;
  for (const auto& r : subset) {
    auto it = patches.find(r.id);
    if (it == patches.end())
      throw std::invalid_argument("no cached patches for recording '" + r.id +
                                  "'");
    ds.items.insert(ds.items.end(), it->second.begin(), it->second.end());
  }
  return ds;
}

std::vector<SampleRecord> Corpus::train_partition() const {
  std::vector<SampleRecord> out;
  for (const auto& r : records)
    if (r.fold != kTestFold) out.push_back(r);
  return out;
}

TrainedFold train_fold(const PatchDataset& train, const PatchDataset& val,
                       const ModelConfig& model_config,
                       const TrainConfig& train_config, std::uint32_t seed,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  return run_training(train, &val, model_config, train_config, seed,
                      /*fixed_epochs=*/-1, on_epoch);
}

std::vector<double> predict_patches(Model& model,
                                    const std::vector<PatchItem>& items,
                                    int batch_size) {
  if (items.empty()) throw std::invalid_argument("predict: no patches");
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const bool wants_gender =
      model.config().gender_mode == GenderMode::gender_based;
  std::vector<double> probs;
  probs.reserve(items.size());
  for (std::size_t i = 0; i < items.size();
       i += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(batch_size), items.size() - i);
    auto images = batch_tensor(items, idx, i, count);
    std::vector<GenderCode> genders;
    const std::vector<GenderCode>* gp = nullptr;
    if (wants_gender) {
      genders = batch_genders(items, idx, i, count);
      gp = &genders;
    }
    auto p = model.predict_proba(images, gp);
    probs.insert(probs.end(), p.begin(), p.end());
  }
  return probs;
}

double predict_recording(const ModelBundle& bundle,
                         const std::vector<PatchItem>& items, Gender gender) {
  Model& model = bundle.for_gender(gender);
  return median(predict_patches(model, items));
}

EvalMetrics recording_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels,
                              double target_sensitivity) {
  EvalMetrics m;
  m.auc = auc(scores, labels);
  if (std::count(labels.begin(), labels.end(), 1) > 0) {
    const OperatingPoint op = sens_spec_at(scores, labels, target_sensitivity);
    m.sensitivity = op.sensitivity;
    m.specificity = op.specificity;
    m.threshold = op.threshold;
  }
  return m;
}

CvResult cross_validate(const Corpus& corpus, const ModelConfig& model_config,
                        const TrainConfig& train_config,
                        std::vector<ModelBundle>* fold_models) {
  const auto records = corpus.train_partition();
  if (records.empty()) throw std::invalid_argument("cross_validate: no records");

  CvResult result;
  double sum_auc = 0.0, sum_sens = 0.0, sum_spec = 0.0;
  int folds_with_auc = 0;

  for (int fold = 0; fold < train_config.k_folds; ++fold) {
    auto [train_recs, val_recs] =
        split_folds(records, train_config.k_folds, fold);
    FoldResult fr;
    fr.fold_id = fold;
    ModelBundle bundle;
    bundle.config = model_config;

    if (model_config.gender_mode == GenderMode::gender_specific) {
      int max_epochs_trained = 0;
      double loss_sum = 0.0;
      for (Gender g : {Gender::female, Gender::male}) {
        auto g_train = filter_gender(train_recs, g);
        auto g_val = filter_gender(val_recs, g);
        if (g_train.empty())
          throw std::invalid_argument("gender-specific: no " + to_string(g) +
                                      " training recordings in fold " +
                                      std::to_string(fold));
        const std::uint32_t seed = derive_seed(
            train_config.seed, static_cast<std::uint32_t>(fold * 4 + 2 +
                                                          static_cast<int>(g)));
        auto train_set = prepare_train_set(corpus, g_train, derive_seed(seed, 1));
        PatchDataset val_set = g_val.empty() ? PatchDataset{}
                                             : corpus.dataset_for(g_val);
        if (val_set.items.empty()) {
          // No validation material for this gender; train for max_epochs.
          auto tf = run_training(train_set, nullptr, model_config, train_config,
                                 seed, train_config.max_epochs, {});
          (g == Gender::female ? bundle.female : bundle.male) = std::move(tf.model);
          max_epochs_trained =
              std::max(max_epochs_trained, tf.result.epochs_trained);
        } else {
          auto tf = train_fold(train_set, val_set, model_config, train_config,
                               seed);
          max_epochs_trained =
              std::max(max_epochs_trained, tf.result.epochs_trained);
          loss_sum += tf.result.best_val_loss;
          auto& log = (g == Gender::female ? fr.log : fr.log_male);
          log = std::move(tf.result.log);
          (g == Gender::female ? bundle.female : bundle.male) = std::move(tf.model);
        }
      }
      fr.epochs_trained = max_epochs_trained;
      fr.best_val_loss = loss_sum / 2.0;
    } else {
      const std::uint32_t seed =
          derive_seed(train_config.seed, static_cast<std::uint32_t>(fold * 4));
      auto train_set = prepare_train_set(corpus, train_recs, derive_seed(seed, 1));
      auto val_set = corpus.dataset_for(val_recs);
      auto tf = train_fold(train_set, val_set, model_config, train_config, seed);
      fr.epochs_trained = tf.result.epochs_trained;
      fr.best_val_loss = tf.result.best_val_loss;
      fr.log = std::move(tf.result.log);
      bundle.single = std::move(tf.model);
    }

    const RecordingScores rs = score_recordings(bundle, corpus, val_recs);
    fr.metrics = recording_metrics(rs.scores, rs.labels);
    if (fr.metrics.auc.has_value()) {
      sum_auc += *fr.metrics.auc;
      sum_sens += fr.metrics.sensitivity;
      sum_spec += fr.metrics.specificity;
      ++folds_with_auc;
    } else {
      result.warnings.push_back(
          "fold " + std::to_string(fold) +
          ": validation split has a single class, AUC undefined; excluded "
          "from the mean");
    }
    result.fold_epochs.push_back(fr.epochs_trained);
    result.folds.push_back(std::move(fr));
    if (fold_models != nullptr) fold_models->push_back(std::move(bundle));
  }

  if (folds_with_auc > 0) {
    result.mean.auc = sum_auc / folds_with_auc;
    result.mean.sensitivity = sum_sens / folds_with_auc;
    result.mean.specificity = sum_spec / folds_with_auc;
  }
  return result;
}

ModelBundle refit_full(const Corpus& corpus, const std::vector<int>& fold_epochs,
                       const ModelConfig& model_config,
                       const TrainConfig& train_config) {
  const int epochs = median_epochs(fold_epochs);
  const auto records = corpus.train_partition();
  ModelBundle bundle;
  bundle.config = model_config;
  if (model_config.gender_mode == GenderMode::gender_specific) {
    for (Gender g : {Gender::female, Gender::male}) {
      auto g_recs = filter_gender(records, g);
      if (g_recs.empty())
        throw std::invalid_argument("gender-specific: no " + to_string(g) +
                                    " recordings");
      const std::uint32_t seed =
          derive_seed(train_config.seed, 1000 + static_cast<std::uint32_t>(g));
      auto train_set = prepare_train_set(corpus, g_recs, derive_seed(seed, 1));
      auto tf = run_training(train_set, nullptr, model_config, train_config,
                             seed, epochs, {});
      (g == Gender::female ? bundle.female : bundle.male) = std::move(tf.model);
    }
  } else {
    const std::uint32_t seed = derive_seed(train_config.seed, 999);
    auto train_set = prepare_train_set(corpus, records, derive_seed(seed, 1));
    auto tf = run_training(train_set, nullptr, model_config, train_config, seed,
                           epochs, {});
    bundle.single = std::move(tf.model);
  }
  return bundle;
}

}  // namespace cough
