#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wm/corpus/genre_pattern.hpp"
#include "wm/corpus/lexicon.hpp"
#include "wm/corpus/vocabulary.hpp"
#include "wm/training/trainer.hpp"

namespace wm {

inline constexpr int kCheckpointVersion = 1;

struct ParameterRecord {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<float> value;
  std::vector<float> adam_m;  // empty before the first optimizer step
  std::vector<float> adam_v;
  std::int64_t step_count = 0;
};

// Everything needed to resume training or to generate: parameters with
// optimizer moments, configs, trainer state and the data tables the model
// was trained against.
struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  TrainerState trainer;
  nlohmann::json run_config = nlohmann::json::object();
  std::vector<std::string> vocabulary;  // non-reserved characters in id order
  std::string lexicon;                  // PhonologyLexicon::serialize()
  PatternLibrary patterns;
  std::vector<ParameterRecord> parameters;

  Vocabulary make_vocabulary() const { return Vocabulary(vocabulary); }
  PhonologyLexicon make_lexicon() const { return PhonologyLexicon::parse(lexicon); }
};

Checkpoint make_checkpoint(const PoetModel<float>& model, const Trainer& trainer, const nlohmann::json& run_config,
                           const Vocabulary& vocab, const PhonologyLexicon& lexicon, const PatternLibrary& patterns);

std::vector<ParameterRecord> capture_parameters(const ParameterStore<float>& params);

// Copies parameters (and optimizer moments) into a live model. Any name or
// shape mismatch throws VersionError.
void restore_parameters(ParameterStore<float>& params, const std::vector<ParameterRecord>& records);

// Directory layout: manifest.json plus one little-endian float32 blob per
// array. Integrity is checked by size and CRC-32 on load.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& directory);

// Single-file archive: magic, manifest length, manifest, concatenated blobs
// (offsets recorded in the manifest).
void save_checkpoint_archive(const Checkpoint& checkpoint, const std::filesystem::path& file);

// Reads either layout. Unsupported versions throw VersionError; truncated or
// corrupted blobs throw IntegrityError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wm
