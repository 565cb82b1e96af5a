#include "mans/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <type_traits>

#include "mans/errors.hpp"
#include "mans/text.hpp"

namespace mans {

namespace {

const std::vector<std::string>& own_keys() {
  static const std::vector<std::string> keys = {
      "T",           "N",          "K",          "alpha",          "depth",
      "width1",      "width2",     "lr",         "momentum",       "weight_decay",
      "batch_size",  "epochs",     "seed",       "num_classes",    "variant",
      "use_shortcuts", "attention_bias", "corpus", "eval_batch",   "ablation_seeds",
      "alphas"};
  return keys;
}

std::string real_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename U>
std::string list_text(const std::vector<U>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<U>) {
      out += real_text(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> config_keys() {
  auto keys = own_keys();
  for (const auto& k : synth_keys()) keys.push_back("synth." + k);
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  ExperimentConfig& e = config.experiment;
  if (key.rfind("synth.", 0) == 0) {
    const auto sub = key.substr(6);
    const auto keys = synth_keys();
    if (std::find(keys.begin(), keys.end(), sub) == keys.end()) {
      throw ArgumentError("unknown key \"" + key + "\"; valid keys: " + join(config_keys(), ", "));
    }
    apply_synth_setting(config.synth, sub, value);
    return;
  }
  if (key == "T") e.frames = parse_count(key, value);
  else if (key == "N") e.joints = parse_count(key, value);
  else if (key == "K") e.hidden = parse_count(key, value);
  else if (key == "alpha") e.alpha = parse_count(key, value);
  else if (key == "depth") {
    const auto d = parse_depth(std::string(trim(value)));
    if (!d) throw ArgumentError("key \"depth\": expected mans9, mans33 or mans61, got \"" + value + "\"");
    e.depth = *d;
  } else if (key == "width1") e.width1 = parse_count(key, value);
  else if (key == "width2") e.width2 = parse_count(key, value);
  else if (key == "lr") e.lr = parse_real(key, value);
  else if (key == "momentum") e.momentum = parse_real(key, value);
  else if (key == "weight_decay") e.weight_decay = parse_real(key, value);
  else if (key == "batch_size") e.batch_size = parse_count(key, value);
  else if (key == "epochs") e.epochs = parse_count(key, value);
  else if (key == "seed") e.seed = parse_u64(key, value);
  else if (key == "num_classes") e.num_classes = parse_count(key, value);
  else if (key == "variant") {
    const auto v = parse_variant(std::string(trim(value)));
    if (!v) {
      throw ArgumentError("key \"variant\": expected full, no_attention or stcm_only, got \"" +
                          value + "\"");
    }
    e.variant = *v;
  } else if (key == "use_shortcuts") e.use_shortcuts = parse_bool(key, value);
  else if (key == "attention_bias") e.attention_bias = parse_bool(key, value);
  else if (key == "corpus") config.corpus = std::string(trim(value));
  else if (key == "eval_batch") config.eval_batch = parse_count(key, value);
  else if (key == "ablation_seeds") config.ablation_seeds = parse_count(key, value);
  else if (key == "alphas") {
    config.alphas.clear();
    for (auto part : split_char(value, ',')) {
      config.alphas.push_back(parse_count(key, std::string(trim(part))));
    }
  } else {
    throw ArgumentError("unknown key \"" + key + "\"; valid keys: " + join(config_keys(), ", "));
  }
}

RunConfig parse_config(std::istream& in) {
  RunConfig config;
  for (const auto& kv : read_key_values(in)) {
    try {
      apply_setting(config, kv.key, kv.value);
    } catch (const ArgumentError& e) {
      throw ParseError(e.what(), kv.line);
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return parse_config(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> config_values(const RunConfig& c) {
  const ExperimentConfig& e = c.experiment;
  const SynthSpec& s = c.synth;
  return {
      {"T", std::to_string(e.frames)},
      {"N", std::to_string(e.joints)},
      {"K", std::to_string(e.hidden)},
      {"alpha", std::to_string(e.alpha)},
      {"depth", depth_name(e.depth)},
      {"width1", std::to_string(e.width1)},
      {"width2", std::to_string(e.width2)},
      {"lr", real_text(e.lr)},
      {"momentum", real_text(e.momentum)},
      {"weight_decay", real_text(e.weight_decay)},
      {"batch_size", std::to_string(e.batch_size)},
      {"epochs", std::to_string(e.epochs)},
      {"seed", std::to_string(e.seed)},
      {"num_classes", std::to_string(e.num_classes)},
      {"variant", variant_name(e.variant)},
      {"use_shortcuts", e.use_shortcuts ? "true" : "false"},
      {"attention_bias", e.attention_bias ? "true" : "false"},
      {"corpus", c.corpus},
      {"eval_batch", std::to_string(c.eval_batch)},
      {"ablation_seeds", std::to_string(c.ablation_seeds)},
      {"alphas", list_text(c.alphas)},
      {"synth.num_classes", std::to_string(s.num_classes)},
      {"synth.samples_per_class", std::to_string(s.samples_per_class)},
      {"synth.frames_min", std::to_string(s.frames_min)},
      {"synth.frames_max", std::to_string(s.frames_max)},
      {"synth.joints", std::to_string(s.joints)},
      {"synth.frequencies", list_text(s.class_frequencies())},
      {"synth.amplitude", real_text(s.amplitude)},
      {"synth.class_offset", real_text(s.class_offset)},
      {"synth.noise_sigma", real_text(s.noise_sigma)},
      {"synth.speed_warp", real_text(s.speed_warp)},
      {"synth.rotation_jitter", real_text(s.rotation_jitter)},
      {"synth.seed", std::to_string(s.seed)},
      {"synth.train_fraction", real_text(s.train_fraction)},
  };
}

}  // namespace mans
