#include "wm/training/trainer.hpp"

#include <cmath>
#include <map>
#include <set>

#include "wm/error.hpp"
#include "wm/evaluation/metrics.hpp"
#include "wm/numerics/ops.hpp"

namespace wm {

namespace {

const std::set<std::string>& train_config_keys() {
  static const std::set<std::string> keys = {"batch_size", "lr",     "beta1",     "beta2",          "eps",
                                             "l2",         "dropout", "gamma",    "epochs",         "seed",
                                             "grad_clip",  "validate_every",      "patience"};
  return keys;
}

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

double number_or(const nlohmann::json& j, const char* key, double fallback) {
  return j.contains(key) && j.at(key).is_number() ? j.at(key).get<double>() : fallback;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (gamma <= 0.0) throw ConfigError("gamma must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (grad_clip <= 0.0) throw ConfigError("grad_clip must be positive");
  if (l2 < 0.0) throw ConfigError("l2 must be non-negative");
  if (patience < 0 || validate_every < 0) throw ConfigError("patience and validate_every must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"batch_size", c.batch_size}, {"lr", c.lr},         {"beta1", c.beta1},
                     {"beta2", c.beta2},           {"eps", c.eps},       {"l2", c.l2},
                     {"dropout", c.dropout},       {"gamma", c.gamma},   {"epochs", c.epochs},
                     {"seed", c.seed},             {"grad_clip", c.grad_clip},
                     {"validate_every", c.validate_every},               {"patience", c.patience}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!train_config_keys().count(key)) throw ConfigError("unknown train config key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("eps", c.eps);
    get("l2", c.l2);
    get("dropout", c.dropout);
    get("gamma", c.gamma);
    get("epochs", c.epochs);
    get("seed", c.seed);
    get("grad_clip", c.grad_clip);
    get("validate_every", c.validate_every);
    get("patience", c.patience);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config type mismatch: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const EpochReport& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& [step, pp] : r.step_validations) steps.push_back({step, finite_or_null(pp)});
  j = nlohmann::json{{"epoch", r.epoch},
                     {"mean_loss", finite_or_null(r.mean_loss)},
                     {"steps", r.steps},
                     {"grad_norm_mean", r.grad_norm_mean},
                     {"grad_norm_max", r.grad_norm_max},
                     {"clipped_norm_max", r.clipped_norm_max},
                     {"validation_perplexity", finite_or_null(r.validation_perplexity)},
                     {"step_validations", steps},
                     {"improved", r.improved}};
}

void from_json(const nlohmann::json& j, EpochReport& r) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.epoch = j.at("epoch").get<int>();
  r.mean_loss = number_or(j, "mean_loss", nan);
  r.steps = j.at("steps").get<int>();
  r.grad_norm_mean = j.at("grad_norm_mean").get<double>();
  r.grad_norm_max = j.at("grad_norm_max").get<double>();
  r.clipped_norm_max = j.at("clipped_norm_max").get<double>();
  r.validation_perplexity = number_or(j, "validation_perplexity", nan);
  r.step_validations.clear();
  for (const auto& s : j.value("step_validations", nlohmann::json::array())) {
    r.step_validations.emplace_back(s.at(0).get<long>(), s.at(1).is_number() ? s.at(1).get<double>() : nan);
  }
  r.improved = j.at("improved").get<bool>();
}

void to_json(nlohmann::json& j, const TrainerState& s) {
  j = nlohmann::json{{"epoch", s.epoch},
                     {"step", s.step},
                     {"best_validation", finite_or_null(s.best_validation)},
                     {"bad_epochs", s.bad_epochs},
                     {"stopped", s.stopped},
                     {"rng_state", s.rng_state},
                     {"history", s.history}};
}

void from_json(const nlohmann::json& j, TrainerState& s) {
  s.epoch = j.at("epoch").get<int>();
  s.step = j.at("step").get<long>();
  s.best_validation = number_or(j, "best_validation", std::numeric_limits<double>::infinity());
  s.bad_epochs = j.at("bad_epochs").get<int>();
  s.stopped = j.at("stopped").get<bool>();
  s.rng_state = j.at("rng_state").get<std::string>();
  s.history = j.at("history").get<std::vector<EpochReport>>();
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<PoemExample>& dataset, int batch_size,
                                                   Rng& rng) {
  if (dataset.empty()) throw DataError("cannot batch an empty dataset");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  // Groups keep first-appearance order of the shuffled sequence.
  std::map<std::pair<int, std::vector<std::size_t>>, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t idx : order) {
    const auto& ex = dataset[idx];
    std::vector<std::size_t> shape;
    for (const auto& line : ex.lines) shape.push_back(line.size());
    auto key = std::make_pair(static_cast<int>(ex.genre), shape);
    auto [it, inserted] = group_of.emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(idx);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (const auto& g : groups) {
    for (std::size_t start = 0; start < g.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(g.size(), start + static_cast<std::size_t>(batch_size));
      batches.emplace_back(g.begin() + static_cast<std::ptrdiff_t>(start), g.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  if (groups.size() > 1) rng.shuffle(batches);
  return batches;
}

Trainer::Trainer(PoetModel<float>& model, const TrainConfig& config, Rng rng)
    : model_(model), config_(config), rng_(std::move(rng)) {
  config_.validate();
}

double Trainer::validate(const std::vector<PoemExample>& valid) const {
  return perplexity(model_, valid, config_.seed ^ 0x76616c6964ULL, workers_).perplexity;
}

EpochReport Trainer::train_epoch(const std::vector<PoemExample>& train, const std::vector<PoemExample>* valid) {
  EpochReport report;
  report.epoch = state_.epoch + 1;
  const auto batches = make_batches(train, config_.batch_size, rng_);
  ForwardOptions opt;
  opt.training = true;
  opt.dropout = config_.dropout;
  opt.gamma = config_.gamma;
  const AdamOptions adam = config_.adam();

  double loss_sum = 0.0;
  long chars = 0;
  double norm_sum = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    std::vector<Tensor<float>> totals;
    int batch_chars = 0;
    auto where = [&] {
      std::string ids;
      for (std::size_t idx : batches[b]) ids += (ids.empty() ? "" : ",") + std::to_string(idx);
      return "epoch " + std::to_string(report.epoch) + " batch " + std::to_string(b) + " (examples " + ids + ")";
    };
    Tensor<float> loss;
    try {
      for (std::size_t idx : batches[b]) {
        auto nll = model_.poem_nll(train[idx], opt, rng_);
        totals.push_back(nll.total);
        batch_chars += nll.characters;
      }
      loss = scale(sum(concat_cols<float>(std::span<const Tensor<float>>(totals))),
                   1.0f / static_cast<float>(batch_chars));
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " in " + where());
    }
    const double value = loss.item();
    if (!std::isfinite(value)) throw NumericError("non-finite loss in " + where());
    backward(loss);
    const double norm = global_grad_norm(model_.params());
    const double clipped = clip_grad_norm(model_.params(), config_.grad_clip);
    adam_step(model_.params(), adam);
    ++state_.step;
    ++report.steps;
    loss_sum += value * batch_chars;
    chars += batch_chars;
    norm_sum += norm;
    report.grad_norm_max = std::max(report.grad_norm_max, norm);
    report.clipped_norm_max = std::max(report.clipped_norm_max, clipped);
    if (valid != nullptr && !valid->empty() && config_.validate_every > 0 &&
        state_.step % config_.validate_every == 0) {
      report.step_validations.emplace_back(state_.step, validate(*valid));
    }
  }
  report.mean_loss = loss_sum / static_cast<double>(chars);
  report.grad_norm_mean = norm_sum / static_cast<double>(std::max(1, report.steps));
  if (valid != nullptr && !valid->empty()) report.validation_perplexity = validate(*valid);

  ++state_.epoch;
  if (std::isfinite(report.validation_perplexity)) {
    if (report.validation_perplexity < state_.best_validation) {
      state_.best_validation = report.validation_perplexity;
      state_.bad_epochs = 0;
      report.improved = true;
    } else {
      ++state_.bad_epochs;
      if (config_.patience > 0 && state_.bad_epochs >= config_.patience) state_.stopped = true;
    }
  }
  state_.history.push_back(report);
  return report;
}

void Trainer::fit(const std::vector<PoemExample>& train, const std::vector<PoemExample>* valid,
                  const std::function<void(const EpochReport&)>& on_epoch) {
  while (state_.epoch < config_.epochs && !state_.stopped) {
    EpochReport report = train_epoch(train, valid);
    if (on_epoch) on_epoch(report);
  }
}

TrainerState Trainer::state() const {
  TrainerState s = state_;
  s.rng_state = rng_.serialize();
  return s;
}

void Trainer::restore(const TrainerState& state) {
  state_ = state;
  if (!state.rng_state.empty()) rng_.deserialize(state.rng_state);
}

}  // namespace wm
