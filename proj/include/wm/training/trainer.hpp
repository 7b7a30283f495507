#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "wm/model/model.hpp"
#include "wm/numerics/adam.hpp"

namespace wm {

struct TrainConfig {
  int batch_size = 64;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 1e-5;
  double dropout = 0.25;
  double gamma = 50.0;
  int epochs = 30;
  std::uint64_t seed = 1;
  double grad_clip = 5.0;
  int validate_every = 0;  // steps; 0 validates once per epoch
  int patience = 5;        // epochs without improvement; 0 disables early stopping

  void validate() const;
  AdamOptions adam() const { return {lr, beta1, beta2, eps, l2}; }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

// Shuffled batches of example indices. Examples are grouped by genre and
// line-length signature so that no batch mixes shapes.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<PoemExample>& dataset, int batch_size,
                                                   Rng& rng);

struct EpochReport {
  int epoch = 0;
  double mean_loss = 0.0;  // per character
  int steps = 0;
  double grad_norm_mean = 0.0;  // before clipping
  double grad_norm_max = 0.0;
  double clipped_norm_max = 0.0;
  double validation_perplexity = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<long, double>> step_validations;  // (step, perplexity)
  bool improved = false;
};

void to_json(nlohmann::json& j, const EpochReport& r);
void from_json(const nlohmann::json& j, EpochReport& r);

struct TrainerState {
  int epoch = 0;
  long step = 0;
  double best_validation = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  bool stopped = false;
  std::string rng_state;
  std::vector<EpochReport> history;
};

void to_json(nlohmann::json& j, const TrainerState& s);
void from_json(const nlohmann::json& j, TrainerState& s);

class Trainer {
 public:
  // `rng` drives shuffling, dropout and slot biases from here on.
  Trainer(PoetModel<float>& model, const TrainConfig& config, Rng rng);

  // One pass over `train`: per batch, summed cross entropy / batch characters,
  // backward, clip, Adam. A non-finite batch loss throws NumericError naming
  // the batch.
  EpochReport train_epoch(const std::vector<PoemExample>& train, const std::vector<PoemExample>* valid = nullptr);

  // Trains until config.epochs or early stopping. `on_epoch` runs after every
  // epoch (after state bookkeeping), e.g. to write checkpoints.
  void fit(const std::vector<PoemExample>& train, const std::vector<PoemExample>* valid,
           const std::function<void(const EpochReport&)>& on_epoch = {});

  TrainerState state() const;
  void restore(const TrainerState& state);
  const TrainConfig& config() const { return config_; }
  PoetModel<float>& model() { return model_; }
  const PoetModel<float>& model() const { return model_; }
  void set_workers(int workers) { workers_ = workers; }

 private:
  double validate(const std::vector<PoemExample>& valid) const;

  PoetModel<float>& model_;
  TrainConfig config_;
  Rng rng_;
  TrainerState state_;
  int workers_ = 1;
};

}  // namespace wm
