#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace solphish::base58 {

inline constexpr std::string_view kAlphabet =
    "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";

std::string encode(std::span<const std::uint8_t> bytes);

// Returns nullopt on any character outside the alphabet.
std::optional<std::vector<std::uint8_t>> decode(std::string_view text);

bool is_alphabet_char(char c);

}  // namespace solphish::base58
