#include "wm/corpus/utf8.hpp"

#include "wm/error.hpp"

namespace wm {

namespace {

std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 0;
}

}  // namespace

std::vector<std::string> split_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t n = sequence_length(static_cast<unsigned char>(text[i]));
    if (n == 0 || i + n > text.size()) {
      throw DataError("malformed UTF-8 at byte " + std::to_string(i));
    }
    for (std::size_t j = 1; j < n; ++j) {
      if ((static_cast<unsigned char>(text[i + j]) & 0xC0) != 0x80) {
        throw DataError("malformed UTF-8 at byte " + std::to_string(i + j));
      }
    }
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

std::uint32_t code_point(std::string_view ch) {
  if (ch.empty()) return 0;
  const auto lead = static_cast<unsigned char>(ch[0]);
  const std::size_t n = sequence_length(lead);
  if (n == 0 || n > ch.size()) throw DataError("malformed UTF-8 character");
  static constexpr unsigned char kLeadMask[] = {0, 0x7F, 0x1F, 0x0F, 0x07};
  std::uint32_t cp = lead & kLeadMask[n];
  for (std::size_t j = 1; j < n; ++j) cp = (cp << 6) | (static_cast<unsigned char>(ch[j]) & 0x3F);
  return cp;
}

std::string join(const std::vector<std::string>& parts, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += separator;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view text, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

}  // namespace wm
