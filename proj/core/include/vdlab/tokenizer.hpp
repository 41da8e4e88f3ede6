#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vdlab {

// Byte-level vocabulary: 256 raw byte ids plus four reserved specials.
// The specials are never produced by encode(), so raw text can never
// collide with the control tokens.
namespace vocab {
inline constexpr int kSize = 260;
inline constexpr int kPad = 256;
inline constexpr int kEos = 257;
inline constexpr int kYes = 258;
inline constexpr int kNo = 259;
}  // namespace vocab

std::vector<int> encode(std::string_view text);
std::string decode(const std::vector<int>& tokens);

// Debug rendering only: specials appear as "<PAD>" etc.
std::string render(const std::vector<int>& tokens);

}  // namespace vdlab
