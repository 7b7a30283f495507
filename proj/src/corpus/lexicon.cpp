#include "wm/corpus/lexicon.hpp"

#include <fstream>
#include <sstream>

#include "wm/corpus/utf8.hpp"
#include "wm/corpus/vocabulary.hpp"
#include "wm/error.hpp"

namespace wm {

PhonologyLexicon PhonologyLexicon::parse(std::string_view text) {
  PhonologyLexicon lex;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string ch;
    int category = -1;
    int rhyme = -1;
    in >> ch >> category;
    if (in.fail() || split_chars(ch).size() != 1) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": expected '<char> <category>'");
    }
    if (!(in >> rhyme)) rhyme = -1;
    if (category < 0 || category >= kNumCategories) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": category " +
                      std::to_string(category) + " outside [0, 35]");
    }
    lex.set(ch, category, rhyme);
  }
  return lex;
}

PhonologyLexicon PhonologyLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

void PhonologyLexicon::set(const std::string& ch, int category, int rhyme_class) {
  if (category < 0 || category > kFree) throw DataError("invalid category " + std::to_string(category));
  entries_[ch] = Entry{category, rhyme_class < 0 ? category : rhyme_class};
}

int PhonologyLexicon::category_of(std::string_view ch) const {
  auto it = entries_.find(ch);
  return it == entries_.end() ? kFree : it->second.category;
}

int PhonologyLexicon::rhyme_class_of(std::string_view ch) const {
  auto it = entries_.find(ch);
  return it == entries_.end() ? -1 : it->second.rhyme_class;
}

bool PhonologyLexicon::contains(std::string_view ch) const { return entries_.find(ch) != entries_.end(); }

std::vector<int> PhonologyLexicon::categories_for(const Vocabulary& vocab) const {
  std::vector<int> out(static_cast<std::size_t>(vocab.size()), kFree);
  for (int id = Vocabulary::kReserved; id < vocab.size(); ++id) {
    out[static_cast<std::size_t>(id)] = category_of(vocab.char_of(id));
  }
  return out;
}

std::string PhonologyLexicon::serialize() const {
  std::ostringstream out;
  for (const auto& [ch, e] : entries_) out << ch << ' ' << e.category << ' ' << e.rhyme_class << '\n';
  return out.str();
}

}  // namespace wm
