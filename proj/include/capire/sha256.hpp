#pragma once

#include <string>
#include <string_view>

namespace capire {

// FIPS 180-4 SHA-256, returned as 64 lowercase hex chars. Self-contained so
// config hashing does not pull in a crypto library.
std::string sha256_hex(std::string_view data);

}  // namespace capire
