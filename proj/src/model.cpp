#include "cough/model.hpp"

#include <cstring>

namespace cough {

GenderMode gender_mode_from_string(const std::string& name) {
  if (name == "baseline") return GenderMode::baseline;
  if (name == "based" || name == "gender_based") return GenderMode::gender_based;
  if (name == "specific" || name == "gender_specific")
    return GenderMode::gender_specific;
  throw std::invalid_argument("unknown gender mode: " + name);
}

std::string to_string(GenderMode mode) {
  switch (mode) {
    case GenderMode::baseline:
      return "baseline";
    case GenderMode::gender_based:
      return "gender_based";
    default:
      return "gender_specific";
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {
      {"arch", "cough_cnn"},
      {"attention", attention},
      {"attention_mode", attention_mode == AttentionMode::scale ? "scale" : "sum"},
      {"gender_mode", to_string(gender_mode)},
      {"conv_channels", {conv_channels[0], conv_channels[1]}},
      {"fc_hidden", fc_hidden},
      {"classes", classes},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (j.value("arch", "cough_cnn") != std::string("cough_cnn"))
    throw std::invalid_argument("unknown architecture: " +
                                j["arch"].get<std::string>());
  ModelConfig c;
  c.attention = j.value("attention", false);
  const std::string mode = j.value("attention_mode", "scale");
  if (mode == "scale")
    c.attention_mode = AttentionMode::scale;
  else if (mode == "sum")
    c.attention_mode = AttentionMode::sum;
  else
    throw std::invalid_argument("unknown attention mode: " + mode);
  c.gender_mode = gender_mode_from_string(j.value("gender_mode", "baseline"));
  if (j.contains("conv_channels")) {
    c.conv_channels[0] = j["conv_channels"][0].get<int>();
    c.conv_channels[1] = j["conv_channels"][1].get<int>();
  }
  c.fc_hidden = j.value("fc_hidden", 128);
  c.classes = j.value("classes", 2);
  return c;
}

LoadedCheckpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());

  LoadedCheckpoint ck;
  const std::uint32_t json_len = detail::read_u32(is);
  std::string js(json_len, '\0');
  is.read(js.data(), json_len);
  if (!is) throw std::runtime_error("checkpoint: truncated config block");
  ck.meta = nlohmann::json::parse(js);
  ck.config = ModelConfig::from_json(ck.meta.at("model"));

  const std::uint32_t n_records = detail::read_u32(is);
  ck.records.reserve(n_records);
  for (std::uint32_t i = 0; i < n_records; ++i)
    ck.records.push_back(detail::read_record(is));
  return ck;
}

}  // namespace cough
