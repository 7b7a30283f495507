#include "wm/training/checkpoint.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <map>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "wm/error.hpp"

namespace wm {

namespace {

constexpr char kArchiveMagic[8] = {'W', 'M', 'P', 'O', 'E', 'T', 'C', '1'};
constexpr const char* kFormat = "wm-poet-checkpoint";

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

struct Blob {
  std::string key;  // "<param>.value" etc.
  const std::vector<float>* data;
};

std::uint32_t crc_of(const char* bytes, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes), chunk);
    bytes += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string blob_file(const std::string& key) {
  std::string out;
  for (char c : key) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_') ? c : '-';
  return out + ".f32";
}

std::vector<Blob> blobs_of(const Checkpoint& ck) {
  std::vector<Blob> out;
  for (const auto& p : ck.parameters) {
    out.push_back({p.name + ".value", &p.value});
    if (!p.adam_m.empty()) {
      out.push_back({p.name + ".adam_m", &p.adam_m});
      out.push_back({p.name + ".adam_v", &p.adam_v});
    }
  }
  return out;
}

nlohmann::json base_manifest(const Checkpoint& ck) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : ck.parameters) {
    params.push_back({{"name", p.name},
                      {"shape", {p.rows, p.cols}},
                      {"dtype", "float32"},
                      {"step_count", p.step_count},
                      {"has_moments", !p.adam_m.empty()}});
  }
  return nlohmann::json{{"format", kFormat},
                        {"version", kCheckpointVersion},
                        {"model_config", ck.model_config},
                        {"train_config", ck.train_config},
                        {"trainer", ck.trainer},
                        {"run_config", ck.run_config},
                        {"vocabulary", ck.vocabulary},
                        {"lexicon", ck.lexicon},
                        {"patterns", ck.patterns.patterns},
                        {"parameters", params}};
}

Checkpoint checkpoint_from_manifest(const nlohmann::json& m) {
  if (m.value("format", std::string()) != kFormat) throw VersionError("not a checkpoint manifest");
  const int version = m.value("version", -1);
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  try {
    from_json(m.at("model_config"), ck.model_config);
    from_json(m.at("train_config"), ck.train_config);
    from_json(m.at("trainer"), ck.trainer);
    ck.run_config = m.value("run_config", nlohmann::json::object());
    ck.vocabulary = m.at("vocabulary").get<std::vector<std::string>>();
    ck.lexicon = m.at("lexicon").get<std::string>();
    ck.patterns.patterns = m.at("patterns").get<std::vector<GenrePattern>>();
    for (const auto& p : m.at("parameters")) {
      ParameterRecord r;
      r.name = p.at("name").get<std::string>();
      r.rows = p.at("shape").at(0).get<int>();
      r.cols = p.at("shape").at(1).get<int>();
      r.step_count = p.at("step_count").get<std::int64_t>();
      if (p.at("dtype").get<std::string>() != "float32") throw VersionError("unsupported dtype for " + r.name);
      ck.parameters.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  return ck;
}

struct BlobTarget {
  nlohmann::json desc;
  std::vector<float>* dst;
  std::size_t floats;
};

// Wires every blob listed in the manifest to its destination vector.
std::vector<BlobTarget> blob_targets(Checkpoint& ck, const nlohmann::json& m) {
  std::vector<BlobTarget> out;
  const auto& params = m.at("parameters");
  const auto& blobs = m.at("blobs");
  std::map<std::string, nlohmann::json> by_key;
  for (const auto& b : blobs) by_key[b.at("key").get<std::string>()] = b;
  for (std::size_t i = 0; i < ck.parameters.size(); ++i) {
    auto& r = ck.parameters[i];
    auto want = [&](const std::string& suffix, std::vector<float>& dst) {
      auto it = by_key.find(r.name + suffix);
      if (it == by_key.end()) throw IntegrityError("checkpoint is missing blob " + r.name + suffix);
      out.push_back({it->second, &dst, static_cast<std::size_t>(r.rows) * static_cast<std::size_t>(r.cols)});
    };
    want(".value", r.value);
    if (params.at(i).value("has_moments", false)) {
      want(".adam_m", r.adam_m);
      want(".adam_v", r.adam_v);
    }
  }
  return out;
}

void fill_blob(const nlohmann::json& desc, const char* bytes, std::size_t available, std::vector<float>& dst,
               std::size_t expected_floats) {
  const std::size_t n = desc.at("bytes").get<std::size_t>();
  if (n != expected_floats * sizeof(float)) {
    throw IntegrityError("blob " + desc.at("key").get<std::string>() + " has the wrong size");
  }
  if (available < n) throw IntegrityError("blob " + desc.at("key").get<std::string>() + " is truncated");
  if (crc_of(bytes, n) != desc.at("crc32").get<std::uint32_t>()) {
    throw IntegrityError("blob " + desc.at("key").get<std::string>() + " fails its checksum");
  }
  dst.resize(expected_floats);
  std::memcpy(dst.data(), bytes, n);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_directory(const std::filesystem::path& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("unreadable checkpoint manifest: " + std::string(e.what()));
  }
  Checkpoint ck = checkpoint_from_manifest(m);
  for (auto& [desc, dst, floats] : blob_targets(ck, m)) {
    const std::string bytes = read_file(dir / desc.at("file").get<std::string>());
    fill_blob(desc, bytes.data(), bytes.size(), *dst, floats);
  }
  return ck;
}

Checkpoint load_archive(const std::filesystem::path& file) {
  const std::string data = read_file(file);
  if (data.size() < sizeof kArchiveMagic + sizeof(std::uint64_t) ||
      std::memcmp(data.data(), kArchiveMagic, sizeof kArchiveMagic) != 0) {
    throw IntegrityError("not a checkpoint archive: " + file.string());
  }
  std::uint64_t manifest_len = 0;
  std::memcpy(&manifest_len, data.data() + sizeof kArchiveMagic, sizeof manifest_len);
  const std::size_t header = sizeof kArchiveMagic + sizeof manifest_len;
  if (data.size() < header + manifest_len) throw IntegrityError("checkpoint archive manifest is truncated");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(data.substr(header, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("unreadable checkpoint manifest: " + std::string(e.what()));
  }
  Checkpoint ck = checkpoint_from_manifest(m);
  const std::size_t base = header + manifest_len;
  for (auto& [desc, dst, floats] : blob_targets(ck, m)) {
    const std::size_t offset = base + desc.at("offset").get<std::size_t>();
    const std::size_t available = offset <= data.size() ? data.size() - offset : 0;
    fill_blob(desc, data.data() + std::min(offset, data.size()), available, *dst, floats);
  }
  return ck;
}

void check_shapes(const Checkpoint& ck) {
  for (const auto& p : ck.parameters) {
    const std::size_t n = static_cast<std::size_t>(p.rows) * static_cast<std::size_t>(p.cols);
    if (p.value.size() != n) throw IntegrityError("parameter " + p.name + " value does not match its shape");
    if (!p.adam_m.empty() && (p.adam_m.size() != n || p.adam_v.size() != n)) {
      throw IntegrityError("parameter " + p.name + " moments do not match its shape");
    }
  }
}

}  // namespace

std::vector<ParameterRecord> capture_parameters(const ParameterStore<float>& params) {
  std::vector<ParameterRecord> out;
  for (const auto& p : params) {
    ParameterRecord r;
    r.name = p.name;
    r.rows = static_cast<int>(p.rows());
    r.cols = static_cast<int>(p.cols());
    const auto& v = p.tensor.value();
    r.value.assign(v.data(), v.data() + v.size());
    if (p.adam_m.size() != 0) {
      r.adam_m.assign(p.adam_m.data(), p.adam_m.data() + p.adam_m.size());
      r.adam_v.assign(p.adam_v.data(), p.adam_v.data() + p.adam_v.size());
    }
    r.step_count = p.step_count;
    out.push_back(std::move(r));
  }
  return out;
}

void restore_parameters(ParameterStore<float>& params, const std::vector<ParameterRecord>& records) {
  if (records.size() != params.size()) {
    throw VersionError("checkpoint holds " + std::to_string(records.size()) + " parameters, the model has " +
                       std::to_string(params.size()));
  }
  for (const auto& r : records) {
    if (!params.contains(r.name)) throw VersionError("checkpoint parameter '" + r.name + "' is not in the model");
    auto& p = params.get(r.name);
    if (p.rows() != r.rows || p.cols() != r.cols) {
      throw VersionError("parameter '" + r.name + "' is " + std::to_string(r.rows) + "x" + std::to_string(r.cols) +
                         " in the checkpoint but " + std::to_string(p.rows()) + "x" + std::to_string(p.cols()) +
                         " in the model");
    }
  }
  for (const auto& r : records) {
    auto& p = params.get(r.name);
    p.tensor.mutable_value() = Eigen::Map<const Matrix<float>>(r.value.data(), r.rows, r.cols);
    if (r.adam_m.empty()) {
      p.adam_m.resize(0, 0);
      p.adam_v.resize(0, 0);
    } else {
      p.adam_m = Eigen::Map<const Matrix<float>>(r.adam_m.data(), r.rows, r.cols);
      p.adam_v = Eigen::Map<const Matrix<float>>(r.adam_v.data(), r.rows, r.cols);
    }
    p.step_count = r.step_count;
    p.tensor.zero_grad();
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& directory) {
  check_shapes(checkpoint);
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
  nlohmann::json m = base_manifest(checkpoint);
  nlohmann::json blobs = nlohmann::json::array();
  for (const auto& b : blobs_of(checkpoint)) {
    const auto* bytes = reinterpret_cast<const char*>(b.data->data());
    const std::size_t n = b.data->size() * sizeof(float);
    const std::string file = blob_file(b.key);
    write_file(directory / file, std::string(bytes, n));
    blobs.push_back({{"key", b.key}, {"file", file}, {"bytes", n}, {"crc32", crc_of(bytes, n)}});
  }
  m["blobs"] = blobs;
  write_file(directory / "manifest.json", m.dump(1) + "\n");
}

void save_checkpoint_archive(const Checkpoint& checkpoint, const std::filesystem::path& file) {
  check_shapes(checkpoint);
  nlohmann::json m = base_manifest(checkpoint);
  nlohmann::json blobs = nlohmann::json::array();
  std::string payload;
  for (const auto& b : blobs_of(checkpoint)) {
    const auto* bytes = reinterpret_cast<const char*>(b.data->data());
    const std::size_t n = b.data->size() * sizeof(float);
    blobs.push_back({{"key", b.key}, {"offset", payload.size()}, {"bytes", n}, {"crc32", crc_of(bytes, n)}});
    payload.append(bytes, n);
  }
  m["blobs"] = blobs;
  const std::string manifest = m.dump();
  const std::uint64_t len = manifest.size();
  std::string out(kArchiveMagic, sizeof kArchiveMagic);
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += manifest;
  out += payload;
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  write_file(file, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no checkpoint at " + path.string());
  Checkpoint ck;
  try {
    ck = std::filesystem::is_directory(path) ? load_directory(path) : load_archive(path);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  check_shapes(ck);
  return ck;
}

Checkpoint make_checkpoint(const PoetModel<float>& model, const Trainer& trainer, const nlohmann::json& run_config,
                           const Vocabulary& vocab, const PhonologyLexicon& lexicon, const PatternLibrary& patterns) {
  Checkpoint ck;
  ck.model_config = model.config();
  ck.train_config = trainer.config();
  ck.trainer = trainer.state();
  ck.run_config = run_config;
  ck.vocabulary = vocab.characters();
  ck.lexicon = lexicon.serialize();
  ck.patterns = patterns;
  ck.parameters = capture_parameters(model.params());
  return ck;
}

}  // namespace wm
