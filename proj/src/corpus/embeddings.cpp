#include "wm/corpus/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "wm/corpus/utf8.hpp"
#include "wm/error.hpp"

namespace wm {

EmbeddingTable pretrain_embeddings(const std::vector<std::vector<int>>& sequences, int vocab_size,
                                   const SkipGramOptions& options, Rng& rng) {
  if (options.dim < 1 || vocab_size < 1) throw ConfigError("embedding size and vocabulary must be positive");
  const int dim = options.dim;
  EmbeddingTable input(vocab_size, dim);
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    input.data()[i] = static_cast<float>(rng.uniform(-0.5, 0.5) / dim);
  }
  EmbeddingTable output = EmbeddingTable::Zero(vocab_size, dim);

  std::vector<double> freq(static_cast<std::size_t>(vocab_size), 0.0);
  long total_tokens = 0;
  for (const auto& seq : sequences) {
    for (int id : seq) {
      if (id < 0 || id >= vocab_size) throw DataError("token id outside vocabulary in embedding corpus");
      freq[static_cast<std::size_t>(id)] += 1.0;
      ++total_tokens;
    }
  }
  if (total_tokens == 0) return input;
  std::vector<double> cumulative(freq.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < freq.size(); ++i) {
    acc += std::pow(freq[i], 0.75);
    cumulative[i] = acc;
  }
  auto sample_negative = [&] {
    const double r = rng.uniform() * acc;
    return static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
  };

  Eigen::VectorXf hidden_grad(dim);
  const long total_steps = total_tokens * std::max(1, options.epochs);
  long step = 0;
  auto train_pair = [&](int center, int target, float label, float lr) {
    auto in = input.row(center);
    auto out = output.row(target);
    const float score = in.dot(out);
    const float sig = 1.0f / (1.0f + std::exp(-score));
    const float g = lr * (label - sig);
    hidden_grad += g * out.transpose();
    out += g * in;
  };
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (const auto& seq : sequences) {
      for (std::size_t i = 0; i < seq.size(); ++i) {
        const float lr = static_cast<float>(
            std::max(options.learning_rate * 1e-4,
                     options.learning_rate * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps))));
        ++step;
        const std::size_t lo = i >= static_cast<std::size_t>(options.window) ? i - options.window : 0;
        const std::size_t hi = std::min(seq.size(), i + options.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          hidden_grad.setZero();
          train_pair(seq[i], seq[j], 1.0f, lr);
          for (int n = 0; n < options.negatives; ++n) {
            const int neg = sample_negative();
            if (neg == seq[j]) continue;
            train_pair(seq[i], neg, 0.0f, lr);
          }
          input.row(seq[i]) += hidden_grad.transpose();
        }
      }
    }
  }
  return input;
}

EmbeddingTable random_embeddings(int vocab_size, int dim, Rng& rng) {
  EmbeddingTable t(vocab_size, dim);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(rng.uniform(-0.08, 0.08));
  return t;
}

namespace {
constexpr char kEmbeddingMagic[8] = {'W', 'M', 'E', 'M', 'B', '0', '0', '1'};
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::int64_t dims[2] = {table.rows(), table.cols()};
  out.write(kEmbeddingMagic, sizeof kEmbeddingMagic);
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(table.data()),
            static_cast<std::streamsize>(table.size() * sizeof(float)));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  std::int64_t dims[2];
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || std::memcmp(magic, kEmbeddingMagic, sizeof magic) != 0 || dims[0] < 0 || dims[1] < 0) {
    throw IntegrityError("not an embedding file: " + path.string());
  }
  EmbeddingTable t(dims[0], dims[1]);
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!in) throw IntegrityError("truncated embedding file: " + path.string());
  return t;
}

RelevanceMap build_relevance_map(const std::vector<std::vector<std::string>>& poems,
                                 const std::vector<std::string>& keywords, int top_n,
                                 const std::set<std::string>& stopwords) {
  // Word sets per poem: every non-stopword unigram and bigram.
  std::vector<std::set<std::string>> docs;
  std::map<std::string, int> doc_freq;
  for (const auto& poem : poems) {
    std::set<std::string> words;
    for (const auto& line : poem) {
      const auto chars = split_chars(line);
      for (std::size_t i = 0; i < chars.size(); ++i) {
        if (stopwords.count(chars[i])) continue;
        words.insert(chars[i]);
        if (i + 1 < chars.size() && !stopwords.count(chars[i + 1])) words.insert(chars[i] + chars[i + 1]);
      }
    }
    for (const auto& w : words) ++doc_freq[w];
    docs.push_back(std::move(words));
  }
  auto contains_text = [&](const std::set<std::string>& doc, const std::vector<std::string>& poem,
                           const std::string& kw) {
    if (doc.count(kw)) return true;
    return std::any_of(poem.begin(), poem.end(), [&](const std::string& l) { return l.find(kw) != std::string::npos; });
  };

  const double n_docs = static_cast<double>(docs.size());
  RelevanceMap map;
  for (const auto& kw : std::set<std::string>(keywords.begin(), keywords.end())) {
    std::map<std::string, int> joint;
    int kw_count = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      if (!contains_text(docs[d], poems[d], kw)) continue;
      ++kw_count;
      for (const auto& w : docs[d]) ++joint[w];
    }
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& [w, c] : joint) {
      if (w == kw || kw.find(w) != std::string::npos || w.find(kw) != std::string::npos) continue;
      const double pmi = std::log(n_docs * c / (static_cast<double>(kw_count) * doc_freq[w]));
      scored.emplace_back(w, pmi);
    }
    std::stable_sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      if (joint[a.first] != joint[b.first]) return joint[a.first] > joint[b.first];
      return a.first < b.first;
    });
    auto& out = map[kw];
    for (std::size_t i = 0; i < scored.size() && static_cast<int>(i) < top_n; ++i) out.push_back(scored[i].first);
  }
  return map;
}

void save_relevance_map(const std::filesystem::path& path, const RelevanceMap& map) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << nlohmann::json(map).dump(1) << '\n';
}

RelevanceMap load_relevance_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open relevance map " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j.get<RelevanceMap>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("relevance map " + path.string() + ": " + e.what());
  }
}

}  // namespace wm
