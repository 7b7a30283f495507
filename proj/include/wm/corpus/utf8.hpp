#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace wm {

// Splits UTF-8 text into one string per code point. Malformed bytes throw DataError.
std::vector<std::string> split_chars(std::string_view text);

// Code point of a single-character UTF-8 string.
std::uint32_t code_point(std::string_view ch);

std::string join(const std::vector<std::string>& parts, std::string_view separator = "");

// Splits on a single-byte delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view text, char delimiter);

std::string trim(std::string_view text);

}  // namespace wm
