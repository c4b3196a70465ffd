#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "xlingua/error.hpp"
#include "xlingua/model.hpp"

namespace xlingua {

inline constexpr const char* kCheckpointFormat = "xlingua-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::size_t step = 0;
  std::optional<double> validation_loss;
};

/// JSON container: format tag, version, model configuration, vocabulary in id
/// order and the flat parameter vector. Doubles are written in shortest
/// round-trip form, so a reload reproduces parameters bit for bit.
inline std::string checkpoint_to_string(const AttentionSeq2Seq& model, const CheckpointMeta& meta = {}) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  const auto& c = model.config();
  j["model"] = {{"embedding_size", c.embedding_size},
                {"hidden_size", c.hidden_size},
                {"init_scale", c.init_scale},
                {"seed", c.seed}};
  j["step"] = meta.step;
  j["validation_loss"] = meta.validation_loss ? nlohmann::ordered_json(*meta.validation_loss) : nullptr;
  j["vocabulary"] = model.vocabulary().tokens();
  auto p = model.parameters();
  j["parameters"] = std::vector<double>(p.begin(), p.end());
  return j.dump() + "\n";
}

inline void save_checkpoint(const std::string& path, const AttentionSeq2Seq& model, const CheckpointMeta& meta = {}) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write checkpoint '" + path + "'");
  out << checkpoint_to_string(model, meta);
  if (!out) fail(ErrorCategory::io, "write failed for '" + path + "'");
}

inline AttentionSeq2Seq checkpoint_from_string(const std::string& text, CheckpointMeta* meta = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCategory::data, "checkpoint is not valid JSON");
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) fail(ErrorCategory::data, "not a checkpoint file");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      fail(ErrorCategory::data, "unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    }
    ModelConfig cfg;
    const auto& m = j.at("model");
    cfg.embedding_size = m.at("embedding_size").get<int>();
    cfg.hidden_size = m.at("hidden_size").get<int>();
    cfg.init_scale = m.at("init_scale").get<double>();
    cfg.seed = m.at("seed").get<std::uint64_t>();
    AttentionSeq2Seq model(Vocabulary::from_tokens(j.at("vocabulary").get<std::vector<std::string>>()), cfg);
    model.set_parameters(j.at("parameters").get<std::vector<double>>());
    if (meta) {
      meta->step = j.at("step").get<std::size_t>();
      if (j.at("validation_loss").is_null()) {
        meta->validation_loss.reset();
      } else {
        meta->validation_loss = j.at("validation_loss").get<double>();
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::data, std::string("malformed checkpoint: ") + e.what());
  }
}

inline AttentionSeq2Seq load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str(), meta);
}

}  // namespace xlingua
