#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace finkey::utf8 {

/// One decoded code point and the byte range it occupied.
struct CodePoint {
  char32_t value;
  std::size_t begin;
  std::size_t end;
  bool valid;  // false for malformed/overlong/surrogate sequences (value = U+FFFD)
};

std::vector<CodePoint> decode(std::string_view text);

void append(std::string& out, char32_t cp);

bool is_whitespace(char32_t cp);
bool is_control_or_invisible(char32_t cp);
bool is_cjk(char32_t cp);

inline bool is_ascii_alnum(char32_t cp) {
  return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') ||
         (cp >= U'0' && cp <= U'9');
}

}  // namespace finkey::utf8
