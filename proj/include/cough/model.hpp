#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cough/attention.hpp"
#include "cough/dataset.hpp"
#include "cough/nn/layers.hpp"

namespace cough {

enum class GenderMode { baseline, gender_based, gender_specific };

GenderMode gender_mode_from_string(const std::string& name);
std::string to_string(GenderMode mode);

struct ModelConfig {
  bool attention = false;
  AttentionMode attention_mode = AttentionMode::scale;
  GenderMode gender_mode = GenderMode::baseline;
  int conv_channels[2] = {32, 64};
  int fc_hidden = 128;
  int classes = 2;

  // Flattened feature dimension entering FC1.
  int feature_dim() const {
    const int base = attention && attention_mode == AttentionMode::sum
                         ? conv_channels[1]
                         : conv_channels[1] * 4;
    return base + (gender_mode == GenderMode::gender_based ? 2 : 0);
  }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// One-hot gender encoding: female = [1, 0], male = [0, 1].
struct GenderCode {
  float bits[2] = {0.0f, 0.0f};

  static GenderCode from(Gender g) {
    GenderCode c;
    c.bits[g == Gender::female ? 0 : 1] = 1.0f;
    return c;
  }
};

// Two conv blocks (conv 3x3 s1 p1 + BN + ReLU; max-pool after the first,
// adaptive 2x2 average pool after the second), optional contextual
// attention over the 4 spatial positions, then FC(128)+ReLU and FC(2).
template <typename Scalar>
class CoughCnn {
 public:
  explicit CoughCnn(const ModelConfig& config)
      : config_(config),
        conv1_(3, config.conv_channels[0], /*compute_input_grad=*/false),
        bn1_(config.conv_channels[0]),
        conv2_(config.conv_channels[0], config.conv_channels[1]),
        bn2_(config.conv_channels[1]),
        attention_(config.conv_channels[1], config.attention_mode),
        fc1_(config.feature_dim(), config.fc_hidden),
        fc2_(config.fc_hidden, config.classes) {}

  void init(std::mt19937& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    attention_.init(rng);
    fc1_.init(rng);
    fc2_.init(rng);
  }

  const ModelConfig& config() const { return config_; }

  // images: [N, 3, H, W]; genders required iff gender_mode == gender_based.
  nn::Tensor<Scalar> forward(const nn::Tensor<Scalar>& images,
                             const std::vector<GenderCode>* genders,
                             bool training) {
    const int n = images.dim(0);
    if (config_.gender_mode == GenderMode::gender_based) {
      if (genders == nullptr || static_cast<int>(genders->size()) != n)
        throw std::invalid_argument("model: gender codes required");
    }
    auto x = conv1_.forward(images);
    x = bn1_.forward(x, training);
    x = relu1_.forward(x);
    x = pool_.forward(x);
    x = conv2_.forward(x);
    x = bn2_.forward(x, training);
    x = relu2_.forward(x);
    x = avgpool_.forward(x);  // [N, C, 2, 2]
    nn::Tensor<Scalar> feat;
    if (config_.attention) {
      auto h = to_positions(x);  // [N, T=4, d=C]
      auto y = attention_.forward(h);
      feat = flatten(y);
    } else {
      feat = flatten(x);
    }
    if (config_.gender_mode == GenderMode::gender_based)
      feat = concat_gender(feat, *genders);
    auto z = fc1_.forward(feat);
    z = relu3_.forward(z);
    return fc2_.forward(z);
  }

  // dlogits: [N, classes]. Accumulates parameter gradients.
  void backward(const nn::Tensor<Scalar>& dlogits) {
    auto d = fc2_.backward(dlogits);
    d = relu3_.backward(d);
    d = fc1_.backward(d);
    if (config_.gender_mode == GenderMode::gender_based) d = strip_gender(d);
    nn::Tensor<Scalar> dx;
    if (config_.attention) {
      const int n = d.dim(0);
      nn::Tensor<Scalar> dy(attention_.mode() == AttentionMode::scale
                                ? std::vector<int>{n, 4, config_.conv_channels[1]}
                                : std::vector<int>{n, config_.conv_channels[1]});
      dy.values = d.values;
      auto dh = attention_.backward(dy);
      dx = from_positions(dh);
    } else {
      dx = nn::Tensor<Scalar>({d.dim(0), config_.conv_channels[1], 2, 2});
      dx.values = d.values;
    }
    dx = avgpool_.backward(dx);
    dx = relu2_.backward(dx);
    dx = bn2_.backward(dx);
    dx = conv2_.backward(dx);
    dx = pool_.backward(dx);
    dx = relu1_.backward(dx);
    dx = bn1_.backward(dx);
    conv1_.backward(dx);  // input gradient not needed
  }

  // Positive-class probabilities in eval mode.
  std::vector<double> predict_proba(const nn::Tensor<Scalar>& images,
                                    const std::vector<GenderCode>* genders) {
    auto logits = forward(images, genders, /*training=*/false);
    auto probs = nn::softmax(logits);
    std::vector<double> out(images.dim(0));
    auto p = probs.as_matrix(images.dim(0), config_.classes);
    for (int i = 0; i < images.dim(0); ++i) out[i] = p(i, 1);
    return out;
  }

  // Attention weights of the last forward pass, [N, T]; empty without
  // attention.
  const nn::Tensor<Scalar>& last_alpha() const { return attention_.alpha(); }

  std::vector<nn::NamedParam<Scalar>> params() {
    std::vector<nn::NamedParam<Scalar>> out;
    auto add = [&out](std::vector<nn::NamedParam<Scalar>> v) {
      out.insert(out.end(), v.begin(), v.end());
    };
    add(conv1_.params("conv1"));
    add(bn1_.params("bn1"));
    add(conv2_.params("conv2"));
    add(bn2_.params("bn2"));
    if (config_.attention) add(attention_.params("attention"));
    add(fc1_.params("fc1"));
    add(fc2_.params("fc2"));
    return out;
  }

  std::vector<nn::NamedBuffer<Scalar>> buffers() {
    std::vector<nn::NamedBuffer<Scalar>> out;
    auto b1 = bn1_.buffers("bn1");
    auto b2 = bn2_.buffers("bn2");
    out.insert(out.end(), b1.begin(), b1.end());
    out.insert(out.end(), b2.begin(), b2.end());
    return out;
  }

  std::vector<nn::Tensor<Scalar>*> param_tensors() {
    std::vector<nn::Tensor<Scalar>*> out;
    for (auto& p : params()) out.push_back(p.tensor);
    return out;
  }

  void zero_grad() {
    for (auto* t : param_tensors()) t->zero_grad();
  }

  Eigen::Index param_count() {
    Eigen::Index n = 0;
    for (auto* t : param_tensors()) n += t->size();
    return n;
  }

 private:
  // [N, C, 2, 2] -> [N, T=4, d=C], position t = y*2 + x.
  nn::Tensor<Scalar> to_positions(const nn::Tensor<Scalar>& x) const {
    const int n = x.dim(0), c = x.dim(1);
    nn::Tensor<Scalar> h({n, 4, c});
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int t = 0; t < 4; ++t)
          h.values[(i * 4 + t) * c + ch] = x.values[(i * c + ch) * 4 + t];
    return h;
  }

  nn::Tensor<Scalar> from_positions(const nn::Tensor<Scalar>& h) const {
    const int n = h.dim(0), c = h.dim(2);
    nn::Tensor<Scalar> x({n, c, 2, 2});
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int t = 0; t < 4; ++t)
          x.values[(i * c + ch) * 4 + t] = h.values[(i * 4 + t) * c + ch];
    return x;
  }

  static nn::Tensor<Scalar> flatten(const nn::Tensor<Scalar>& x) {
    const int n = x.dim(0);
    nn::Tensor<Scalar> y({n, static_cast<int>(x.size() / n)});
    y.values = x.values;
    return y;
  }

  nn::Tensor<Scalar> concat_gender(const nn::Tensor<Scalar>& feat,
                                   const std::vector<GenderCode>& genders) const {
    const int n = feat.dim(0), d = feat.dim(1);
    nn::Tensor<Scalar> out({n, d + 2});
    for (int i = 0; i < n; ++i) {
      out.values.segment(i * (d + 2), d) = feat.values.segment(i * d, d);
      out.values[i * (d + 2) + d] = static_cast<Scalar>(genders[i].bits[0]);
      out.values[i * (d + 2) + d + 1] = static_cast<Scalar>(genders[i].bits[1]);
    }
    return out;
  }

  nn::Tensor<Scalar> strip_gender(const nn::Tensor<Scalar>& d) const {
    const int n = d.dim(0), dd = d.dim(1) - 2;
    nn::Tensor<Scalar> out({n, dd});
    for (int i = 0; i < n; ++i)
      out.values.segment(i * dd, dd) = d.values.segment(i * (dd + 2), dd);
    return out;
  }

  ModelConfig config_;
  nn::Conv2d3x3<Scalar> conv1_;
  nn::BatchNorm2d<Scalar> bn1_;
  nn::ReLU<Scalar> relu1_;
  nn::MaxPool2<Scalar> pool_;
  nn::Conv2d3x3<Scalar> conv2_;
  nn::BatchNorm2d<Scalar> bn2_;
  nn::ReLU<Scalar> relu2_;
  nn::AdaptiveAvgPool2x2<Scalar> avgpool_;
  ContextualAttention<Scalar> attention_;
  nn::Linear<Scalar> fc1_;
  nn::ReLU<Scalar> relu3_;
  nn::Linear<Scalar> fc2_;
};

// Routes a record to the model trained on its gender.
template <typename Scalar>
CoughCnn<Scalar>& route_gender_specific(CoughCnn<Scalar>* female,
                                        CoughCnn<Scalar>* male,
                                        const SampleRecord& record) {
  CoughCnn<Scalar>* m = record.gender == Gender::female ? female : male;
  if (m == nullptr)
    throw std::invalid_argument("no model for gender " +
                                to_string(record.gender));
  return *m;
}

// ---------------------------------------------------------------------------
// Checkpoint format: "COUGHNN1", u32 json length, config JSON, u32 record
// count, then per record: u16 name length, name, u8 dtype (0 = f32),
// u8 ndim, u32 dims..., little-endian f32 payload. Parameters first, then
// batchnorm running-stat buffers.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (b[1] << 8) | (b[2] << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_record(std::ostream& os, const std::string& name,
                         const std::vector<int>& shape, const float* data,
                         std::size_t count) {
  const std::uint16_t len = static_cast<std::uint16_t>(name.size());
  os.put(static_cast<char>(len & 0xff));
  os.put(static_cast<char>(len >> 8));
  os.write(name.data(), len);
  os.put(0);  // dtype f32
  os.put(static_cast<char>(shape.size()));
  for (int d : shape) write_u32(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(data), count * sizeof(float));
}

struct Record {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

inline Record read_record(std::istream& is) {
  Record r;
  const int lo = is.get(), hi = is.get();
  if (lo < 0 || hi < 0) throw std::runtime_error("checkpoint: truncated record");
  r.name.resize(lo | (hi << 8));
  is.read(r.name.data(), static_cast<std::streamsize>(r.name.size()));
  const int dtype = is.get();
  if (dtype != 0) throw std::runtime_error("checkpoint: unknown dtype");
  const int ndim = is.get();
  std::size_t count = 1;
  for (int i = 0; i < ndim; ++i) {
    r.shape.push_back(static_cast<int>(read_u32(is)));
    count *= static_cast<std::size_t>(r.shape.back());
  }
  r.data.resize(count);
  is.read(reinterpret_cast<char*>(r.data.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!is) throw std::runtime_error("checkpoint: truncated payload");
  return r;
}

}  // namespace detail

constexpr char kCheckpointMagic[8] = {'C', 'O', 'U', 'G', 'H', 'N', 'N', '1'};

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, CoughCnn<Scalar>& model,
                     const nlohmann::json& extra = {}) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
  os.write(kCheckpointMagic, 8);
  nlohmann::json j = extra.is_null() ? nlohmann::json::object() : extra;
  j["model"] = model.config().to_json();
  const std::string js = j.dump();
  detail::write_u32(os, static_cast<std::uint32_t>(js.size()));
  os.write(js.data(), static_cast<std::streamsize>(js.size()));
  auto params = model.params();
  auto buffers = model.buffers();
  detail::write_u32(os, static_cast<std::uint32_t>(params.size() + buffers.size()));
  std::vector<float> tmp;
  auto to_f32 = [&tmp](const auto& vec) {
    tmp.resize(vec.size());
    for (Eigen::Index i = 0; i < vec.size(); ++i)
      tmp[i] = static_cast<float>(vec[i]);
    return tmp.data();
  };
  for (auto& p : params)
    detail::write_record(os, p.name, p.tensor->shape, to_f32(p.tensor->values),
                         static_cast<std::size_t>(p.tensor->size()));
  for (auto& b : buffers)
    detail::write_record(os, b.name, {static_cast<int>(b.values->size())},
                         to_f32(*b.values),
                         static_cast<std::size_t>(b.values->size()));
  if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());
}

struct LoadedCheckpoint {
  nlohmann::json meta;
  ModelConfig config;
  std::vector<detail::Record> records;
};

LoadedCheckpoint read_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
std::unique_ptr<CoughCnn<Scalar>> load_checkpoint(
    const std::filesystem::path& path, nlohmann::json* meta_out = nullptr) {
  LoadedCheckpoint ck = read_checkpoint(path);
  auto model = std::make_unique<CoughCnn<Scalar>>(ck.config);
  auto fill = [](auto& dst, const detail::Record& r) {
    if (dst.size() != static_cast<Eigen::Index>(r.data.size()))
      throw std::runtime_error("checkpoint: size mismatch for " + r.name);
    for (Eigen::Index i = 0; i < dst.size(); ++i)
      dst[i] = static_cast<Scalar>(r.data[i]);
  };
  auto params = model->params();
  auto buffers = model->buffers();
  for (const auto& r : ck.records) {
    bool found = false;
    for (auto& p : params)
      if (p.name == r.name) {
        fill(p.tensor->values, r);
        found = true;
        break;
      }
    if (!found)
      for (auto& b : buffers)
        if (b.name == r.name) {
          fill(*b.values, r);
          found = true;
          break;
        }
    if (!found) throw std::runtime_error("checkpoint: unknown record " + r.name);
  }
  if (meta_out != nullptr) *meta_out = ck.meta;
  return model;
}

}  // namespace cough
