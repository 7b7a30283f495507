#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wm/model/model.hpp"
#include "wm/training/trainer.hpp"

namespace wm {

// Flat view of every tunable: model keys, train keys and the run-level keys
// below share one namespace.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  int beam_size = 20;
  int n_best = 1;
  int workers = 1;
  bool hard_constraint = true;
  bool repetition_guard = true;
  std::string genre = "quatrain";
  int min_count = 1;
  int holdout = 0;  // poems held out (from the end of the corpus) by prepare
  int relevance_top_n = 10;
  int pretrain_epochs = 5;
  int pretrain_window = 2;
  int pretrain_negatives = 5;
};

std::vector<std::string> run_config_keys();

nlohmann::json run_config_to_json(const RunConfig& config);

// Applies `file` then every "key=value" override. Values parse as JSON when
// possible and as strings otherwise. Unknown keys throw ConfigError naming the
// key and listing the valid ones; type mismatches throw ConfigError.
RunConfig parse_config(const nlohmann::json& file, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides = {});

}  // namespace wm
