#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace mcpforge {

// SHA-256 of the input, lowercase hex.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);

// Hex digest over a sequence of fields. Each field is length-prefixed so that
// ("ab", "c") and ("a", "bc") hash differently.
std::string field_digest(std::initializer_list<std::string_view> fields);

}  // namespace mcpforge
