#pragma once

#include <array>
#include <string>
#include <string_view>

#include "finkey/rng.hpp"

namespace testutil {

// Random strings mixing ASCII words, whitespace of several kinds, CJK,
// invisible characters, URL fragments and broken UTF-8.
inline std::string random_text(finkey::Rng& rng, std::size_t pieces) {
  static constexpr std::array<std::string_view, 24> kPieces = {
      "a",     "Bank",  "x1",      " ",        "  ",        "\t",          "\n",   ",",
      ".",     "银",     "行",       "泰和",      "\xe2\x80\x8b", "\xef\xbb\xbf", "\x01", "\x7f",
      "\xff",  "\xe4\xb8", "http://", "https://e.co/a", "www.", "ftp://f", "\xe3\x80\x80", "\xc2\xa0"};
  std::string s;
  for (std::size_t i = 0; i < pieces; ++i) s += rng.pick(kPieces);
  return s;
}

inline std::string random_ascii(finkey::Rng& rng, std::size_t pieces) {
  static constexpr std::array<std::string_view, 16> kPieces = {
      "a", "Zb", "9", " ", "  ", "\t", "\r\n", ",", ".", "\x02", "\x7f", "http://", "https://ex.co/a",
      "www.", "ftp://q", "w"};
  std::string s;
  for (std::size_t i = 0; i < pieces; ++i) s += rng.pick(kPieces);
  return s;
}

}  // namespace testutil
