#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cough/image.hpp"

namespace cough {

enum class Label { negative = 0, positive = 1 };
enum class Gender { female = 0, male = 1 };

constexpr int kTestFold = -1;

struct SampleRecord {
  std::string id;
  std::filesystem::path path;
  Label label = Label::negative;
  Gender gender = Gender::female;
  int fold = kTestFold;  // in [0, k-1], or kTestFold for test-partition rows
};

class ManifestError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parses a CSV manifest with header `id,path,label,gender,fold`.
// Duplicate ids and unknown label/gender tokens are rejected with the
// offending row named.
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path,
                   const std::vector<SampleRecord>& records);

// One patch-level training item. Replicated items share pixel storage.
struct PatchItem {
  std::shared_ptr<const ImageRgb> image;
  Label label = Label::negative;
  Gender gender = Gender::female;
  std::string source_id;
  double start_s = 0.0;
};

struct PatchDataset {
  std::vector<PatchItem> items;

  std::size_t count(Label label) const;
};

// Replicates minority-class items until the class counts are exactly
// equal: every minority item gets floor(major/minor) copies in total and
// the first major mod minor items get one extra. The majority class is
// untouched. With the corpus's negative-heavy manifests this duplicates
// positives.
PatchDataset balance_by_replication(const PatchDataset& ds);

// validation = records with fold == val_fold, train = all the others.
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_folds(
    const std::vector<SampleRecord>& records, int k, int val_fold);

// Assigns folds round-robin within each (label, gender) stratum, in a
// random stratum order drawn from rng.
void assign_stratified_folds(std::vector<SampleRecord>& records, int k,
                             std::mt19937& rng);

Label label_from_string(const std::string& token);
Gender gender_from_string(const std::string& token);
std::string to_string(Label label);
std::string to_string(Gender gender);

}  // namespace cough
