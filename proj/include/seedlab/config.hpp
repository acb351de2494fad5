#ifndef SEEDLAB_CONFIG_HPP
#define SEEDLAB_CONFIG_HPP

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "seedlab/experiments.hpp"

namespace seedlab {

// Config files are a single flat JSON object. Keys name the fields of the
// model, pipeline, watermark, attack and experiment settings directly, e.g.
//
//   { "vocab_size": 512, "scheme": "kgw", "delta": 2.0, "mode": "aware",
//     "boost": 10, "activation": 0.3, "entropy_kind": "hijacked" }
//
// "scheme": "none" removes the watermark. "targets" lists token ids
// explicitly; otherwise the set is drawn from "target_count" and
// "target_seed" (defaults |V|/2 and 777).

namespace detail {

template <typename T>
T config_get(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error("invalid config: wrong type for '" + key + "'");
  }
}

}  // namespace detail

inline ExperimentSettings apply_config(const nlohmann::json& j, ExperimentSettings s = {}) {
  if (!j.is_object()) throw Error("invalid config: expected a JSON object");
  auto& p = s.base;
  std::optional<std::vector<TokenId>> targets;
  std::size_t target_count = 0;
  std::uint64_t target_seed = kDefaultTargetSeed;
  bool redraw_targets = false;
  bool has_target_count = false;

  for (const auto& [key, v] : j.items()) {
    using detail::config_get;
    auto wm = [&]() -> WatermarkConfig& {
      if (!p.watermark) p.watermark = WatermarkConfig{};
      return *p.watermark;
    };
    if (key == "model_seed") p.model.seed = config_get<std::uint64_t>(v, key);
    else if (key == "vocab_size") { p.model.vocab_size = config_get<std::size_t>(v, key); redraw_targets = true; }
    else if (key == "order") p.model.order = config_get<std::size_t>(v, key);
    else if (key == "concentration") p.model.concentration = config_get<double>(v, key);
    else if (key == "topics") p.model.topics = config_get<std::size_t>(v, key);
    else if (key == "topic_contrast") p.model.topic_contrast = config_get<double>(v, key);
    else if (key == "topic_leak") p.model.topic_leak = config_get<double>(v, key);
    else if (key == "n_tokens") p.n_tokens = config_get<std::size_t>(v, key);
    else if (key == "temperature") p.temperature = config_get<double>(v, key);
    else if (key == "top_k") p.top_k = config_get<std::size_t>(v, key);
    else if (key == "entropy_kind") p.entropy = parse_entropy_kind(config_get<std::string>(v, key));
    else if (key == "defense_scope") p.defense_scope = parse_defense_scope(config_get<std::string>(v, key));
    else if (key == "run_seed") p.run_seed = config_get<std::uint64_t>(v, key);
    else if (key == "prompt_length") p.prompt_length = config_get<std::size_t>(v, key);
    else if (key == "scheme") {
      const auto name = config_get<std::string>(v, key);
      if (name == "none") p.watermark.reset();
      else wm().scheme = parse_scheme(name);
    }
    else if (key == "gamma") wm().gamma = config_get<double>(v, key);
    else if (key == "delta") wm().delta = config_get<double>(v, key);
    else if (key == "key") wm().key = config_get<std::uint64_t>(v, key);
    else if (key == "context_width") wm().context_width = config_get<std::size_t>(v, key);
    else if (key == "alpha") wm().alpha = config_get<double>(v, key);
    else if (key == "targets") targets = config_get<std::vector<TokenId>>(v, key);
    else if (key == "target_count") { target_count = config_get<std::size_t>(v, key); has_target_count = redraw_targets = true; }
    else if (key == "target_seed") { target_seed = config_get<std::uint64_t>(v, key); redraw_targets = true; }
    else if (key == "boost") p.attack.boost = config_get<double>(v, key);
    else if (key == "activation") p.attack.activation = config_get<double>(v, key);
    else if (key == "floor") p.attack.floor = config_get<double>(v, key);
    else if (key == "sigma") p.attack.sigma = config_get<std::uint64_t>(v, key);
    else if (key == "mode") p.attack.mode = parse_attack_mode(config_get<std::string>(v, key));
    else if (key == "replicates") s.replicates = config_get<std::size_t>(v, key);
    else if (key == "seed") s.seed = config_get<std::uint64_t>(v, key);
    else if (key == "reference_size") s.reference_size = config_get<std::size_t>(v, key);
    else if (key == "edit_rate") s.edit_rate = config_get<double>(v, key);
    else if (key == "threads") s.threads = config_get<unsigned>(v, key);
    else throw Error("invalid config: unknown key '" + key + "'");
  }

  if (targets) {
    p.attack.targets = TokenSet(std::move(*targets));
  } else if (redraw_targets) {
    const std::size_t count = has_target_count ? target_count : p.model.vocab_size / 2;
    if (count > p.model.vocab_size) throw Error("invalid config: target_count exceeds vocabulary");
    p.attack.targets = random_token_set(p.model.vocab_size, count, target_seed);
  }
  if (p.watermark) p.watermark->validate();
  p.attack.validate(p.model.vocab_size);
  return s;
}

inline ExperimentSettings load_config_file(const std::string& path, ExperimentSettings s = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
  return apply_config(j, std::move(s));
}

}  // namespace seedlab

#endif  // SEEDLAB_CONFIG_HPP
