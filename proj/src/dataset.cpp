#include "cough/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

namespace cough {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

}  // namespace

Label label_from_string(const std::string& token) {
  if (token == "negative") return Label::negative;
  if (token == "positive") return Label::positive;
  throw ManifestError("unknown label token: '" + token + "'");
}

Gender gender_from_string(const std::string& token) {
  if (token == "female") return Gender::female;
  if (token == "male") return Gender::male;
  throw ManifestError("unknown gender token: '" + token + "'");
}

std::string to_string(Label label) {
  return label == Label::negative ? "negative" : "positive";
}

std::string to_string(Gender gender) {
  return gender == Gender::female ? "female" : "male";
}

std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ManifestError("cannot open manifest: " + path.string());

  std::string line;
  if (!std::getline(is, line))
    throw ManifestError("empty manifest: " + path.string());
  auto header = split_csv_line(strip(line));
  const std::vector<std::string> expected = {"id", "path", "label", "gender",
                                             "fold"};
  for (auto& h : header) h = strip(h);
  if (header != expected)
    throw ManifestError("manifest header must be 'id,path,label,gender,fold' in " +
                        path.string());

  std::vector<SampleRecord> records;
  std::unordered_set<std::string> seen;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    auto fields = split_csv_line(stripped);
    if (fields.size() != 5)
      throw ManifestError("row " + std::to_string(row) + ": expected 5 columns, got " +
                          std::to_string(fields.size()));
    SampleRecord rec;
    rec.id = strip(fields[0]);
    rec.path = strip(fields[1]);
    if (rec.id.empty())
      throw ManifestError("row " + std::to_string(row) + ": empty id");
    if (!seen.insert(rec.id).second)
      throw ManifestError("row " + std::to_string(row) + ": duplicate id '" +
                          rec.id + "'");
    try {
      rec.label = label_from_string(strip(fields[2]));
    } catch (const ManifestError& e) {
      throw ManifestError("row " + std::to_string(row) + ", column 'label': " +
                          e.what());
    }
    try {
      rec.gender = gender_from_string(strip(fields[3]));
    } catch (const ManifestError& e) {
      throw ManifestError("row " + std::to_string(row) + ", column 'gender': " +
                          e.what());
    }
    const std::string fold = strip(fields[4]);
    if (fold == "test") {
      rec.fold = kTestFold;
    } else {
      try {
        rec.fold = std::stoi(fold);
      } catch (...) {
        throw ManifestError("row " + std::to_string(row) +
                            ", column 'fold': expected integer or 'test', got '" +
                            fold + "'");
      }
      if (rec.fold < 0)
        throw ManifestError("row " + std::to_string(row) +
                            ", column 'fold': negative fold id");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_manifest(const std::filesystem::path& path,
                   const std::vector<SampleRecord>& records) {
  std::ofstream os(path);
  if (!os) throw ManifestError("cannot write manifest: " + path.string());
  os << "id,path,label,gender,fold\n";
  for (const auto& r : records) {
    os << r.id << ',' << r.path.generic_string() << ',' << to_string(r.label)
       << ',' << to_string(r.gender) << ',';
    if (r.fold == kTestFold)
      os << "test";
    else
      os << r.fold;
    os << '\n';
  }
}

std::size_t PatchDataset::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(),
                    [label](const PatchItem& it) { return it.label == label; }));
}

PatchDataset balance_by_replication(const PatchDataset& ds) {
  const std::size_t n_neg = ds.count(Label::negative);
  const std::size_t n_pos = ds.count(Label::positive);
  if (n_neg == 0 || n_pos == 0)
    throw std::invalid_argument("balance_by_replication: a class has no patches");

  PatchDataset out = ds;
  if (n_pos == n_neg) return out;  // already balanced

  const Label minority = n_pos < n_neg ? Label::positive : Label::negative;
  const std::size_t n_minor = std::min(n_pos, n_neg);
  const std::size_t n_major = std::max(n_pos, n_neg);
  const std::size_t copies_each = n_major / n_minor;  // total count per item
  const std::size_t remainder = n_major % n_minor;    // first `remainder` get one more
  std::size_t seen = 0;
  for (const auto& item : ds.items) {
    if (item.label != minority) continue;
    const std::size_t total = copies_each + (seen < remainder ? 1 : 0);
    for (std::size_t c = 1; c < total; ++c) out.items.push_back(item);
    ++seen;
  }
  return out;
}

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_folds(
    const std::vector<SampleRecord>& records, int k, int val_fold) {
  if (val_fold < 0 || val_fold >= k)
    throw std::invalid_argument("split_folds: val_fold out of range");
  std::vector<SampleRecord> train, val;
  for (const auto& r : records) {
    if (r.fold == kTestFold) continue;
    if (r.fold >= k)
      throw std::invalid_argument("split_folds: record '" + r.id +
                                  "' has fold " + std::to_string(r.fold) +
                                  " outside [0, " + std::to_string(k - 1) + "]");
    (r.fold == val_fold ? val : train).push_back(r);
  }
  return {std::move(train), std::move(val)};
}

void assign_stratified_folds(std::vector<SampleRecord>& records, int k,
                             std::mt19937& rng) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i)
    strata[{static_cast<int>(records[i].label),
            static_cast<int>(records[i].gender)}]
        .push_back(i);
  for (auto& [key, idx] : strata) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t j = 0; j < idx.size(); ++j)
      records[idx[j]].fold = static_cast<int>(j % static_cast<std::size_t>(k));
  }
}

}  // namespace cough
