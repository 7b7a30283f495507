#include "wm/cli/run_config.hpp"

#include <fstream>
#include <set>

#include "wm/corpus/genre_pattern.hpp"
#include "wm/error.hpp"

namespace wm {

namespace {

std::set<std::string> keys_of(const nlohmann::json& j) {
  std::set<std::string> out;
  for (const auto& [k, v] : j.items()) out.insert(k);
  return out;
}

const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys = keys_of(nlohmann::json(ModelConfig{}));
  return keys;
}

const std::set<std::string>& train_keys() {
  static const std::set<std::string> keys = keys_of(nlohmann::json(TrainConfig{}));
  return keys;
}

nlohmann::json run_only(const RunConfig& c) {
  return nlohmann::json{{"beam_size", c.beam_size},
                        {"n_best", c.n_best},
                        {"workers", c.workers},
                        {"hard_constraint", c.hard_constraint},
                        {"repetition_guard", c.repetition_guard},
                        {"genre", c.genre},
                        {"min_count", c.min_count},
                        {"holdout", c.holdout},
                        {"relevance_top_n", c.relevance_top_n},
                        {"pretrain_epochs", c.pretrain_epochs},
                        {"pretrain_window", c.pretrain_window},
                        {"pretrain_negatives", c.pretrain_negatives}};
}

const std::set<std::string>& run_keys() {
  static const std::set<std::string> keys = keys_of(run_only(RunConfig{}));
  return keys;
}

std::string key_list() {
  std::string out;
  for (const auto& k : run_config_keys()) out += (out.empty() ? "" : ", ") + k;
  return out;
}

template <typename F>
void read_field(const nlohmann::json& j, const char* key, F& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<F>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("key '") + key + "' has the wrong type (" + j.at(key).type_name() + ")");
  }
}

}  // namespace

std::vector<std::string> run_config_keys() {
  std::set<std::string> all = model_keys();
  all.insert(train_keys().begin(), train_keys().end());
  all.insert(run_keys().begin(), run_keys().end());
  return {all.begin(), all.end()};
}

nlohmann::json run_config_to_json(const RunConfig& config) {
  nlohmann::json j = run_only(config);
  j.update(nlohmann::json(config.model));
  j.update(nlohmann::json(config.train));
  return j;
}

RunConfig parse_config(const nlohmann::json& file, const std::vector<std::string>& overrides) {
  if (!file.is_null() && !file.is_object()) throw ConfigError("config must be a JSON object");
  nlohmann::json merged = file.is_null() ? nlohmann::json::object() : file;
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    merged[key] = value;
  }

  nlohmann::json model_part = nlohmann::json::object();
  nlohmann::json train_part = nlohmann::json::object();
  nlohmann::json run_part = nlohmann::json::object();
  for (const auto& [key, value] : merged.items()) {
    if (model_keys().count(key)) {
      model_part[key] = value;
    } else if (train_keys().count(key)) {
      train_part[key] = value;
    } else if (run_keys().count(key)) {
      run_part[key] = value;
    } else {
      throw ConfigError("unknown config key '" + key + "'; valid keys: " + key_list());
    }
  }

  RunConfig c;
  from_json(model_part, c.model);
  from_json(train_part, c.train);
  read_field(run_part, "beam_size", c.beam_size);
  read_field(run_part, "n_best", c.n_best);
  read_field(run_part, "workers", c.workers);
  read_field(run_part, "hard_constraint", c.hard_constraint);
  read_field(run_part, "repetition_guard", c.repetition_guard);
  read_field(run_part, "genre", c.genre);
  read_field(run_part, "min_count", c.min_count);
  read_field(run_part, "holdout", c.holdout);
  read_field(run_part, "relevance_top_n", c.relevance_top_n);
  read_field(run_part, "pretrain_epochs", c.pretrain_epochs);
  read_field(run_part, "pretrain_window", c.pretrain_window);
  read_field(run_part, "pretrain_negatives", c.pretrain_negatives);

  if (c.beam_size < 1) throw ConfigError("beam_size must be at least 1");
  if (c.n_best < 1) throw ConfigError("n_best must be at least 1");
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.min_count < 1) throw ConfigError("min_count must be at least 1");
  if (c.holdout < 0) throw ConfigError("holdout must be non-negative");
  try {
    parse_genre(c.genre);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  c.train.validate();
  return c;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  nlohmann::json file = nlohmann::json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot read config " + path->string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!text.empty() && text.find_first_not_of(" \t\r\n") != std::string::npos) {
      file = nlohmann::json::parse(text, nullptr, false);
      if (file.is_discarded()) throw ConfigError("config " + path->string() + " is not valid JSON");
    }
  }
  return parse_config(file, overrides);
}

}  // namespace wm
